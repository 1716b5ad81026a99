#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "scoresync/dtw.h"
#include "scoresync/matrix.h"

namespace scoresync {

struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major RGB triples

  std::uint8_t* at(std::size_t y, std::size_t x) { return pixels.data() + 3 * (y * width + x); }
  const std::uint8_t* at(std::size_t y, std::size_t x) const { return pixels.data() + 3 * (y * width + x); }
};

inline constexpr std::size_t kMaxPlotSide = 1024;

/// Integer block factor that brings the long side down to at most max_side.
std::size_t plot_scale_factor(std::size_t rows, std::size_t cols, std::size_t max_side = kMaxPlotSide);

/// Cost matrix as grayscale 255 * (1 - cost / max_cost), rounded; an all-zero
/// matrix renders black. Row y is performance frame, column x score frame.
/// Large matrices are reduced by a block factor f with area averaging and
/// path points map to (perf / f, score / f). The reference path is drawn in
/// blue, then the prediction in red on top. A path point outside the matrix
/// raises InvariantError.
RgbImage render_alignment_plot(const Matrix& cost, const AlignmentPath* predicted, const AlignmentPath* reference,
                               std::size_t max_side = kMaxPlotSide);

/// Binary P6 with an optional single comment line after the magic.
std::string format_ppm(const RgbImage& image, std::string_view comment = {});

}  // namespace scoresync
