#include "scoresync/ground_truth.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "scoresync/error.h"
#include "scoresync/features.h"

namespace scoresync {

void GroundTruthMap::validate() const {
  SCORESYNC_REQUIRE(!events.empty(), "ground truth has no events");
  for (std::size_t i = 0; i < events.size(); ++i) {
    SCORESYNC_REQUIRE(std::isfinite(events[i].perf_time_s) && std::isfinite(events[i].score_time_s),
                      "ground truth event " + std::to_string(i) + " is not finite");
    if (i > 0) {
      SCORESYNC_REQUIRE(events[i].perf_time_s > events[i - 1].perf_time_s,
                        "ground truth performance times must be strictly increasing (event " +
                            std::to_string(i) + ")");
    }
  }
}

double GroundTruthMap::score_time_at(double t) const {
  SCORESYNC_REQUIRE(!events.empty(), "ground truth has no events");
  if (t <= events.front().perf_time_s) return events.front().score_time_s;
  if (t >= events.back().perf_time_s) return events.back().score_time_s;
  const auto it = std::upper_bound(events.begin(), events.end(), t,
                                   [](double v, const GroundTruthEvent& e) { return v < e.perf_time_s; });
  const auto& hi = *it;
  const auto& lo = *(it - 1);
  const double w = (t - lo.perf_time_s) / (hi.perf_time_s - lo.perf_time_s);
  return lo.score_time_s + w * (hi.score_time_s - lo.score_time_s);
}

GroundTruthMap GroundTruthMap::identity(std::size_t frames, double perf_hop, double score_hop) {
  GroundTruthMap gt;
  gt.events.reserve(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    gt.events.push_back({static_cast<double>(i) * perf_hop, static_cast<double>(i) * score_hop});
  }
  return gt;
}

GroundTruthMap parse_ground_truth_csv(std::string_view text) {
  GroundTruthMap gt;
  std::istringstream in{std::string(text)};
  std::string line;
  bool header = false;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!header) {
      if (line != "perf_time_s,score_time_s") {
        throw InputError("ground truth CSV header mismatch: expected 'perf_time_s,score_time_s', got '" +
                         line + "'");
      }
      header = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) {
      throw InputError("ground truth CSV line " + std::to_string(lineno) + " must have 2 values");
    }
    auto parse = [&](std::string_view cell) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty()) {
        throw InputError("non-numeric cell on ground truth CSV line " + std::to_string(lineno));
      }
      return v;
    };
    const std::string_view sv(line);
    gt.events.push_back({parse(sv.substr(0, comma)), parse(sv.substr(comma + 1))});
  }
  if (!header) throw InputError("ground truth CSV has no header line");
  gt.validate();
  return gt;
}

GroundTruthMap load_ground_truth_csv(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open ground truth CSV: " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_ground_truth_csv(ss.str());
}

std::string format_ground_truth_csv(const GroundTruthMap& gt, std::string_view comment) {
  std::ostringstream os;
  if (!comment.empty()) os << "# " << comment << '\n';
  os << "perf_time_s,score_time_s\n";
  for (const auto& e : gt.events) {
    os << format_double(e.perf_time_s) << ',' << format_double(e.score_time_s) << '\n';
  }
  return os.str();
}

void save_ground_truth_csv(const GroundTruthMap& gt, const std::filesystem::path& path,
                           std::string_view comment) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write ground truth CSV: " + path.string());
  f << format_ground_truth_csv(gt, comment);
}

}  // namespace scoresync
