#include "scoresync/alignment_io.h"

#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

#include "scoresync/error.h"
#include "scoresync/features.h"

namespace scoresync {

namespace {

std::vector<std::string_view> split_lines(std::string_view text) {
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
  return lines;
}

std::vector<std::string_view> split_cells(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t pos = 0;
  while (true) {
    const auto comma = line.find(',', pos);
    cells.push_back(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
    if (comma == std::string_view::npos) return cells;
    pos = comma + 1;
  }
}

double parse_real(std::string_view cell, std::size_t lineno, std::string_view what) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size()) {
    throw InputError("non-numeric cell '" + std::string(cell) + "' on " + std::string(what) + " line " +
                     std::to_string(lineno));
  }
  return v;
}

std::size_t parse_index(std::string_view cell, std::size_t lineno) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size()) {
    throw InputError("frame index '" + std::string(cell) + "' on alignment CSV line " + std::to_string(lineno) +
                     " is not a non-negative integer");
  }
  return v;
}

constexpr std::string_view kAlignmentHeader = "perf_frame,score_frame,perf_time_s,score_time_s";

}  // namespace

std::string format_alignment_csv(const AlignmentPath& path, double perf_hop, double score_hop, bool jump_column,
                                 std::string_view comment) {
  std::ostringstream os;
  if (!comment.empty()) os << "# " << comment << '\n';
  os << "# total_cost=" << format_double(path.total_cost) << '\n';
  os << kAlignmentHeader << (jump_column ? ",jump" : "") << '\n';
  for (const auto& pt : path.points) {
    os << pt.perf << ',' << pt.score << ',' << format_double(static_cast<double>(pt.perf) * perf_hop) << ','
       << format_double(static_cast<double>(pt.score) * score_hop);
    if (jump_column) os << ',' << (pt.jump ? 1 : 0);
    os << '\n';
  }
  return os.str();
}

void save_alignment_csv(const AlignmentPath& path, double perf_hop, double score_hop, bool jump_column,
                        const std::filesystem::path& out, std::string_view comment) {
  write_text_file(out, format_alignment_csv(path, perf_hop, score_hop, jump_column, comment));
}

AlignmentTable parse_alignment_csv(std::string_view text) {
  AlignmentTable table;
  bool header = false;
  std::size_t lineno = 0;
  for (const auto line : split_lines(text)) {
    ++lineno;
    if (line.empty()) continue;
    if (line.front() == '#') {
      constexpr std::string_view key = "# total_cost=";
      if (line.starts_with(key)) table.path.total_cost = parse_real(line.substr(key.size()), lineno, "alignment CSV");
      continue;
    }
    if (!header) {
      if (line == kAlignmentHeader) {
        table.has_jump_column = false;
      } else if (line == std::string(kAlignmentHeader) + ",jump") {
        table.has_jump_column = true;
      } else {
        throw InputError("alignment CSV header mismatch: expected '" + std::string(kAlignmentHeader) +
                         "[,jump]', got '" + std::string(line) + "'");
      }
      header = true;
      continue;
    }
    const auto cells = split_cells(line);
    const std::size_t want = table.has_jump_column ? 5 : 4;
    if (cells.size() != want) {
      throw InputError("alignment CSV line " + std::to_string(lineno) + " has " + std::to_string(cells.size()) +
                       " cells, expected " + std::to_string(want));
    }
    PathPoint pt{parse_index(cells[0], lineno), parse_index(cells[1], lineno), false};
    if (table.has_jump_column) {
      if (cells[4] != "0" && cells[4] != "1") {
        throw InputError("jump flag on alignment CSV line " + std::to_string(lineno) + " must be 0 or 1");
      }
      pt.jump = cells[4] == "1";
    }
    const double pt_s = parse_real(cells[2], lineno, "alignment CSV");
    const double st_s = parse_real(cells[3], lineno, "alignment CSV");
    if (!table.timed.perf_time_s.empty() && pt_s < table.timed.perf_time_s.back()) {
      throw InputError("alignment CSV line " + std::to_string(lineno) + ": performance time decreases");
    }
    table.path.points.push_back(pt);
    table.timed.perf_time_s.push_back(pt_s);
    table.timed.score_time_s.push_back(st_s);
  }
  if (!header) throw InputError("alignment CSV has no header line");
  if (table.path.points.empty()) throw InputError("alignment CSV has no rows");
  return table;
}

AlignmentTable load_alignment_csv(const std::filesystem::path& path) {
  return parse_alignment_csv(read_text_file(path));
}

Matrix parse_matrix_csv(std::string_view text) {
  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t lineno = 0;
  for (const auto line : split_lines(text)) {
    ++lineno;
    if (line.empty() || line.front() == '#') continue;
    const auto cells = split_cells(line);
    if (rows == 0) cols = cells.size();
    if (cells.size() != cols) {
      throw InputError("matrix CSV line " + std::to_string(lineno) + " has " + std::to_string(cells.size()) +
                       " cells, expected " + std::to_string(cols));
    }
    for (const auto cell : cells) values.push_back(parse_real(cell, lineno, "matrix CSV"));
    ++rows;
  }
  if (rows == 0) throw InputError("matrix CSV has no rows");
  Matrix m(rows, cols);
  m.data() = std::move(values);
  return m;
}

Matrix load_matrix_csv(const std::filesystem::path& path) { return parse_matrix_csv(read_text_file(path)); }

std::string format_matrix_csv(const Matrix& m, std::string_view comment) {
  std::ostringstream os;
  if (!comment.empty()) os << "# " << comment << '\n';
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) os << (c ? "," : "") << format_double(m(r, c));
    os << '\n';
  }
  return os.str();
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write " + path.string());
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!f) throw InputError("failed writing " + path.string());
}

}  // namespace scoresync
