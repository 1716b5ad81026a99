#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "scoresync/dtw.h"
#include "scoresync/eval.h"
#include "scoresync/matrix.h"

namespace scoresync {

/// Alignment CSV: header `perf_frame,score_frame,perf_time_s,score_time_s`,
/// optionally followed by a `jump` column (0/1). '#' lines are comments.
struct AlignmentTable {
  AlignmentPath path;
  TimedPath timed;
  bool has_jump_column = false;
};

std::string format_alignment_csv(const AlignmentPath& path, double perf_hop, double score_hop, bool jump_column,
                                 std::string_view comment = {});
void save_alignment_csv(const AlignmentPath& path, double perf_hop, double score_hop, bool jump_column,
                        const std::filesystem::path& out, std::string_view comment = {});
AlignmentTable parse_alignment_csv(std::string_view text);
AlignmentTable load_alignment_csv(const std::filesystem::path& path);

/// Headerless numeric CSV, one matrix row per line; rows must agree in width.
Matrix parse_matrix_csv(std::string_view text);
Matrix load_matrix_csv(const std::filesystem::path& path);
std::string format_matrix_csv(const Matrix& m, std::string_view comment = {});

/// Whole file as bytes; InputError naming the path when it cannot be read.
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace scoresync
