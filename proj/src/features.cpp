#include "scoresync/features.h"

#include <fftw3.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <memory>
#include <mutex>
#include <numbers>
#include <sstream>

#include "scoresync/error.h"

namespace scoresync {

namespace {

// The FFTW planner is not thread-safe; execution on distinct arrays is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

class RealFft {
 public:
  explicit RealFft(int n) : n_(n) {
    in_ = fftw_alloc_real(static_cast<std::size_t>(n));
    out_ = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
    std::lock_guard lock(planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(n, in_, out_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    {
      std::lock_guard lock(planner_mutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  double* input() { return in_; }
  void execute() { fftw_execute(plan_); }
  double power(int k) const { return out_[k][0] * out_[k][0] + out_[k][1] * out_[k][1]; }
  int bins() const { return n_ / 2 + 1; }

 private:
  int n_;
  double* in_;
  fftw_complex* out_;
  fftw_plan plan_;
};

std::vector<double> make_window(int n, WindowKind kind) {
  std::vector<double> w(static_cast<std::size_t>(n));
  const double a0 = kind == WindowKind::hann ? 0.5 : 0.54;
  for (int i = 0; i < n; ++i) {
    // Periodic window, as used for STFT analysis.
    w[i] = a0 - (1.0 - a0) * std::cos(2.0 * std::numbers::pi * i / n);
  }
  return w;
}

void normalize_rows(Matrix& m) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    double ss = 0.0;
    for (double v : row) ss += v * v;
    const double norm = std::sqrt(ss);
    if (norm <= 1e-12) {
      std::fill(row.begin(), row.end(), 0.0);
      continue;
    }
    for (double& v : row) v /= norm;
  }
}

double parse_cell(std::string_view cell, std::size_t line) {
  while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
  while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r')) {
    cell.remove_suffix(1);
  }
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty()) {
    throw InputError("non-numeric cell '" + std::string(cell) + "' on line " + std::to_string(line));
  }
  return v;
}

}  // namespace

std::string_view to_string(FeatureOrigin origin) {
  switch (origin) {
    case FeatureOrigin::audio:
      return "audio";
    case FeatureOrigin::midi:
      return "midi";
    case FeatureOrigin::external:
      return "external";
  }
  return "external";
}

FeatureOrigin parse_origin(std::string_view text) {
  if (text == "audio") return FeatureOrigin::audio;
  if (text == "midi") return FeatureOrigin::midi;
  if (text == "external") return FeatureOrigin::external;
  throw InputError("unknown feature origin '" + std::string(text) + "'");
}

void FeatureSequence::validate() const {
  SCORESYNC_REQUIRE(frames() >= 1, "feature sequence has no frames");
  SCORESYNC_REQUIRE(bins() >= 1, "feature sequence has no bins");
  SCORESYNC_REQUIRE(hop_seconds > 0.0 && std::isfinite(hop_seconds),
                    "feature hop_seconds must be positive and finite");
  for (double v : data.data()) {
    SCORESYNC_REQUIRE(std::isfinite(v), "feature sequence contains a non-finite value");
  }
}

int pitch_class_of(double hz) {
  const double midi = 69.0 + 12.0 * std::log2(hz / 440.0);
  const long nearest = std::lround(midi);
  return static_cast<int>(((nearest % 12) + 12) % 12);
}

FeatureSequence chromagram(const AudioClip& clip, const ChromaConfig& config) {
  SCORESYNC_REQUIRE(config.frame_length >= 64, "frame_length must be at least 64 samples");
  SCORESYNC_REQUIRE(config.hop_length >= 1, "hop_length must be at least 1 sample");
  SCORESYNC_REQUIRE(clip.sample_rate > 0, "sample rate must be positive");
  SCORESYNC_REQUIRE(clip.samples.size() > static_cast<std::size_t>(config.frame_length),
                    "clip too short: " + std::to_string(clip.samples.size()) +
                        " samples, need more than one frame of " +
                        std::to_string(config.frame_length));
  for (double s : clip.samples) {
    SCORESYNC_REQUIRE(std::isfinite(s), "clip contains non-finite samples");
  }

  const int n = config.frame_length;
  const std::size_t frames = 1 + (clip.samples.size() - static_cast<std::size_t>(n)) /
                                     static_cast<std::size_t>(config.hop_length);
  const auto window = make_window(n, config.window);

  RealFft fft(n);
  // Precompute the pitch class for each DFT bin; -1 means discarded.
  std::vector<int> fold(static_cast<std::size_t>(fft.bins()), -1);
  for (int k = 1; k < fft.bins(); ++k) {
    const double hz = static_cast<double>(k) * clip.sample_rate / n;
    if (hz >= kLowestFoldedHz) fold[k] = pitch_class_of(hz);
  }

  FeatureSequence out;
  out.data = Matrix(frames, kChromaBins);
  out.hop_seconds = static_cast<double>(config.hop_length) / clip.sample_rate;
  out.origin = FeatureOrigin::audio;

  for (std::size_t f = 0; f < frames; ++f) {
    const double* src = clip.samples.data() + f * static_cast<std::size_t>(config.hop_length);
    double* buf = fft.input();
    for (int i = 0; i < n; ++i) buf[i] = src[i] * window[i];
    fft.execute();
    auto row = out.data.row(f);
    for (int k = 1; k < fft.bins(); ++k) {
      if (fold[k] >= 0) row[fold[k]] += fft.power(k);
    }
  }
  normalize_rows(out.data);
  return out;
}

FeatureSequence midi_to_chroma(const MidiScore& score, double hop_seconds) {
  SCORESYNC_REQUIRE(!score.notes.empty(), "empty score: no notes to render");
  SCORESYNC_REQUIRE(hop_seconds > 0.0 && std::isfinite(hop_seconds), "hop_seconds must be positive");

  const double total = score.total_duration();
  const auto frames =
      static_cast<std::size_t>(std::max(1.0, std::ceil(total / hop_seconds - 1e-9)));

  FeatureSequence out;
  out.data = Matrix(frames, kChromaBins);
  out.hop_seconds = hop_seconds;
  out.origin = FeatureOrigin::midi;

  for (const auto& note : score.notes) {
    const double start = note.onset_seconds;
    const double end = note.onset_seconds + note.duration_seconds;
    const double weight = note.velocity / 127.0;
    const int pc = note.pitch % 12;
    // Frame f overlaps the note when f*hop < end and (f+1)*hop > start.
    auto first = static_cast<std::size_t>(std::max(0.0, std::floor(start / hop_seconds)));
    for (std::size_t f = first; f < frames; ++f) {
      const double f0 = static_cast<double>(f) * hop_seconds;
      const double f1 = f0 + hop_seconds;
      if (f0 >= end - 1e-12) break;
      if (f1 <= start + 1e-12) continue;
      out.data(f, static_cast<std::size_t>(pc)) += weight;
    }
  }
  normalize_rows(out.data);
  return out;
}

CrossSimilarityMatrix cross_similarity(const FeatureSequence& perf, const FeatureSequence& score) {
  SCORESYNC_REQUIRE(perf.bins() == score.bins(),
                    "bin-count mismatch: performance has " + std::to_string(perf.bins()) +
                        " bins, score has " + std::to_string(score.bins()));
  SCORESYNC_REQUIRE(perf.frames() >= 1 && score.frames() >= 1, "feature sequences must be non-empty");
  CrossSimilarityMatrix cost(perf.frames(), score.frames());
  for (std::size_t i = 0; i < perf.frames(); ++i) {
    const auto a = perf.data.row(i);
    for (std::size_t j = 0; j < score.frames(); ++j) {
      const auto b = score.data.row(j);
      double ss = 0.0;
      for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a[k] - b[k];
        ss += d * d;
      }
      cost(i, j) = std::sqrt(ss);
    }
  }
  return cost;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string format_features_csv(const FeatureSequence& seq, std::string_view comment) {
  std::ostringstream os;
  if (!comment.empty()) os << "# " << comment << '\n';
  os << "hop_seconds=" << format_double(seq.hop_seconds) << ",bins=" << seq.bins()
     << ",origin=" << to_string(seq.origin) << '\n';
  for (std::size_t r = 0; r < seq.frames(); ++r) {
    const auto row = seq.data.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) os << ',';
      os << format_double(row[c]);
    }
    os << '\n';
  }
  return os.str();
}

void save_features_csv(const FeatureSequence& seq, const std::filesystem::path& path,
                       std::string_view comment) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write feature CSV: " + path.string());
  f << format_features_csv(seq, comment);
}

FeatureSequence parse_features_csv(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    auto line = text.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = nl + 1;
  }

  std::size_t idx = 0;
  while (idx < lines.size() && (lines[idx].empty() || lines[idx].front() == '#')) ++idx;
  if (idx == lines.size()) throw InputError("feature CSV has no header line");

  // Header: hop_seconds=<real>,bins=<int>,origin=<name>
  const std::string header(lines[idx]);
  double hop = 0.0;
  long bins = 0;
  std::string origin_text;
  {
    std::istringstream hs(header);
    std::string field;
    int seen = 0;
    while (std::getline(hs, field, ',')) {
      const auto eq = field.find('=');
      if (eq == std::string::npos) throw InputError("header mismatch: field '" + field + "' has no '='");
      const auto key = field.substr(0, eq);
      const auto value = field.substr(eq + 1);
      if (key == "hop_seconds" && seen == 0) {
        hop = parse_cell(value, idx + 1);
      } else if (key == "bins" && seen == 1) {
        bins = static_cast<long>(parse_cell(value, idx + 1));
      } else if (key == "origin" && seen == 2) {
        origin_text = value;
      } else {
        throw InputError("header mismatch: expected hop_seconds=,bins=,origin= but got '" + header + "'");
      }
      ++seen;
    }
    if (seen != 3) throw InputError("header mismatch: expected 3 fields, got " + std::to_string(seen));
  }
  if (bins < 1) throw InputError("header mismatch: bins must be >= 1");

  std::vector<double> values;
  std::size_t frames = 0;
  for (std::size_t l = idx + 1; l < lines.size(); ++l) {
    const auto line = lines[l];
    if (line.empty()) continue;
    std::size_t count = 0;
    std::size_t pos = 0;
    while (true) {
      auto comma = line.find(',', pos);
      const auto cell = line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
      values.push_back(parse_cell(cell, l + 1));
      ++count;
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    if (count != static_cast<std::size_t>(bins)) {
      throw InputError("ragged row on line " + std::to_string(l + 1) + ": " + std::to_string(count) +
                       " values, header declares " + std::to_string(bins));
    }
    ++frames;
  }
  if (frames == 0) throw InputError("feature CSV has an empty data section");

  FeatureSequence seq;
  seq.data = Matrix(frames, static_cast<std::size_t>(bins));
  seq.data.data() = std::move(values);
  seq.hop_seconds = hop;
  seq.origin = parse_origin(origin_text);
  seq.validate();
  return seq;
}

FeatureSequence load_features_csv(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open feature CSV: " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_features_csv(ss.str());
}

}  // namespace scoresync
