#include "scoresync/plot.h"

#include <algorithm>
#include <cmath>

#include "scoresync/error.h"

namespace scoresync {

std::size_t plot_scale_factor(std::size_t rows, std::size_t cols, std::size_t max_side) {
  SCORESYNC_REQUIRE(max_side >= 1, "plot side limit must be >= 1");
  const std::size_t longest = std::max(rows, cols);
  return std::max<std::size_t>(1, (longest + max_side - 1) / max_side);
}

RgbImage render_alignment_plot(const Matrix& cost, const AlignmentPath* predicted, const AlignmentPath* reference,
                               std::size_t max_side) {
  SCORESYNC_REQUIRE(!cost.empty(), "cannot plot an empty matrix");
  double max_cost = 0.0;
  for (double v : cost.data()) {
    SCORESYNC_REQUIRE(std::isfinite(v) && v >= 0.0, "plot matrix cells must be finite and non-negative");
    max_cost = std::max(max_cost, v);
  }

  const std::size_t f = plot_scale_factor(cost.rows(), cost.cols(), max_side);
  RgbImage img;
  img.height = (cost.rows() + f - 1) / f;
  img.width = (cost.cols() + f - 1) / f;
  img.pixels.assign(3 * img.width * img.height, 0);

  if (max_cost > 0.0) {
    for (std::size_t y = 0; y < img.height; ++y) {
      for (std::size_t x = 0; x < img.width; ++x) {
        // Edge blocks average over the cells that exist.
        double sum = 0.0;
        std::size_t n = 0;
        for (std::size_t r = y * f; r < std::min(cost.rows(), (y + 1) * f); ++r) {
          for (std::size_t c = x * f; c < std::min(cost.cols(), (x + 1) * f); ++c) {
            sum += cost(r, c);
            ++n;
          }
        }
        const double g = std::round(255.0 * (1.0 - sum / static_cast<double>(n) / max_cost));
        const auto v = static_cast<std::uint8_t>(std::clamp(g, 0.0, 255.0));
        auto* px = img.at(y, x);
        px[0] = px[1] = px[2] = v;
      }
    }
  }

  auto draw = [&](const AlignmentPath* path, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    if (path == nullptr) return;
    for (const auto& pt : path->points) {
      SCORESYNC_ASSERT(pt.perf < cost.rows() && pt.score < cost.cols(),
                       "path point (" + std::to_string(pt.perf) + ", " + std::to_string(pt.score) +
                           ") lies outside the " + std::to_string(cost.rows()) + "x" + std::to_string(cost.cols()) +
                           " matrix");
      auto* px = img.at(pt.perf / f, pt.score / f);
      px[0] = r;
      px[1] = g;
      px[2] = b;
    }
  };
  draw(reference, 0, 0, 255);
  draw(predicted, 255, 0, 0);
  return img;
}

std::string format_ppm(const RgbImage& image, std::string_view comment) {
  std::string out = "P6\n";
  if (!comment.empty()) {
    std::string line(comment);
    std::replace(line.begin(), line.end(), '\n', ' ');
    out += "# " + line + "\n";
  }
  out += std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(image.pixels.data()), image.pixels.size());
  return out;
}

}  // namespace scoresync
