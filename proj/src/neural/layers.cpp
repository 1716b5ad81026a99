#include "scoresync/neural/layers.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "scoresync/error.h"

namespace scoresync::neural {

namespace {

void require_rank3(const Tensor& x, const char* op) {
  SCORESYNC_REQUIRE(x.rank() == 3, std::string(op) + " expects a [c, h, w] tensor, got " + shape_string(x.shape()));
}

void fill_normal(Tensor& t, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, stddev);
  for (auto& v : t.values()) v = n(rng);
}

void fill_uniform(Tensor& t, double half_width, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-half_width, half_width);
  for (auto& v : t.values()) v = u(rng);
}

}  // namespace

std::size_t effective_kernel_size(std::size_t m, std::size_t d) {
  SCORESYNC_REQUIRE(m >= 1 && d >= 1, "kernel size and dilation must be >= 1");
  return m + (d - 1) * (m - 1);
}

// ---------------------------------------------------------------------------
// Convolution

Tensor conv2d_forward(const Tensor& x, const Tensor& kernels, const Tensor& bias, std::size_t dilation) {
  require_rank3(x, "conv2d");
  SCORESYNC_REQUIRE(kernels.rank() == 4 && kernels.dim(2) == kernels.dim(3),
                    "conv2d kernels must be [out, in, m, m], got " + shape_string(kernels.shape()));
  SCORESYNC_REQUIRE(kernels.dim(1) == x.dim(0), "conv2d channel mismatch: kernels take " +
                                                    std::to_string(kernels.dim(1)) + ", input has " +
                                                    std::to_string(x.dim(0)));
  SCORESYNC_REQUIRE(bias.size() == kernels.dim(0), "conv2d bias length does not match output channels");
  const std::size_t out_ch = kernels.dim(0), in_ch = x.dim(0), m = kernels.dim(2);
  const std::size_t h = x.dim(1), w = x.dim(2);
  const std::size_t me = effective_kernel_size(m, dilation);
  SCORESYNC_REQUIRE(h >= me && w >= me, "conv2d kernel larger than input: effective size " + std::to_string(me) +
                                            " vs input " + shape_string(x.shape()));
  const std::size_t ho = h - me + 1, wo = w - me + 1;

  Tensor y({out_ch, ho, wo});
  for (std::size_t o = 0; o < out_ch; ++o) {
    double* yo = y.data() + o * ho * wo;
    std::fill(yo, yo + ho * wo, bias[o]);
    for (std::size_t c = 0; c < in_ch; ++c) {
      const double* xc = x.data() + c * h * w;
      for (std::size_t t = 0; t < m; ++t) {
        const std::size_t ro = dilation * (m - 1 - t);
        for (std::size_t s = 0; s < m; ++s) {
          const std::size_t co = dilation * (m - 1 - s);
          const double k = kernels[((o * in_ch + c) * m + t) * m + s];
          for (std::size_t i = 0; i < ho; ++i) {
            double* yr = yo + i * wo;
            const double* xr = xc + (i + ro) * w + co;
            for (std::size_t j = 0; j < wo; ++j) yr[j] += k * xr[j];
          }
        }
      }
    }
  }
  return y;
}

Tensor conv2d_backward(const Tensor& x, const Tensor& dy, const Tensor& kernels, std::size_t dilation,
                       Tensor& d_kernels, Tensor& d_bias) {
  const std::size_t out_ch = kernels.dim(0), in_ch = x.dim(0), m = kernels.dim(2);
  const std::size_t h = x.dim(1), w = x.dim(2);
  const std::size_t ho = dy.dim(1), wo = dy.dim(2);
  SCORESYNC_ASSERT(dy.dim(0) == out_ch && ho == h - effective_kernel_size(m, dilation) + 1,
                   "conv2d backward shape mismatch");

  Tensor dx(x.shape());
  for (std::size_t o = 0; o < out_ch; ++o) {
    const double* g = dy.data() + o * ho * wo;
    double db = 0.0;
    for (std::size_t k = 0; k < ho * wo; ++k) db += g[k];
    d_bias[o] += db;
    for (std::size_t c = 0; c < in_ch; ++c) {
      const double* xc = x.data() + c * h * w;
      double* dxc = dx.data() + c * h * w;
      for (std::size_t t = 0; t < m; ++t) {
        const std::size_t ro = dilation * (m - 1 - t);
        for (std::size_t s = 0; s < m; ++s) {
          const std::size_t co = dilation * (m - 1 - s);
          const std::size_t ki = ((o * in_ch + c) * m + t) * m + s;
          const double k = kernels[ki];
          double dk = 0.0;
          for (std::size_t i = 0; i < ho; ++i) {
            const double* gr = g + i * wo;
            const double* xr = xc + (i + ro) * w + co;
            double* dxr = dxc + (i + ro) * w + co;
            for (std::size_t j = 0; j < wo; ++j) {
              dk += gr[j] * xr[j];
              dxr[j] += k * gr[j];
            }
          }
          d_kernels[ki] += dk;
        }
      }
    }
  }
  return dx;
}

Tensor expand_kernel(const Tensor& kernels, std::size_t dilation) {
  SCORESYNC_REQUIRE(kernels.rank() == 4 && kernels.dim(2) == kernels.dim(3), "kernels must be [out, in, m, m]");
  const std::size_t out_ch = kernels.dim(0), in_ch = kernels.dim(1), m = kernels.dim(2);
  const std::size_t me = effective_kernel_size(m, dilation);
  Tensor e({out_ch, in_ch, me, me});
  for (std::size_t oc = 0; oc < out_ch * in_ch; ++oc) {
    for (std::size_t t = 0; t < m; ++t) {
      for (std::size_t s = 0; s < m; ++s) {
        e[(oc * me + dilation * t) * me + dilation * s] = kernels[(oc * m + t) * m + s];
      }
    }
  }
  return e;
}

// ---------------------------------------------------------------------------
// Padding, activation, pooling

Tensor zero_pad(const Tensor& x, std::size_t pad) {
  require_rank3(x, "pad");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t hp = h + 2 * pad, wp = w + 2 * pad;
  Tensor y({c, hp, wp});
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t i = 0; i < h; ++i) {
      std::copy_n(x.data() + (k * h + i) * w, w, y.data() + (k * hp + i + pad) * wp + pad);
    }
  }
  return y;
}

Tensor zero_pad_backward(const Tensor& dy, std::size_t pad) {
  const std::size_t c = dy.dim(0), hp = dy.dim(1), wp = dy.dim(2);
  SCORESYNC_ASSERT(hp > 2 * pad && wp > 2 * pad, "pad backward shape mismatch");
  const std::size_t h = hp - 2 * pad, w = wp - 2 * pad;
  Tensor dx({c, h, w});
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t i = 0; i < h; ++i) {
      std::copy_n(dy.data() + (k * hp + i + pad) * wp + pad, w, dx.data() + (k * h + i) * w);
    }
  }
  return dx;
}

Tensor relu(const Tensor& x) {
  Tensor y = x;
  for (auto& v : y.values()) v = v > 0.0 ? v : 0.0;
  return y;
}

Tensor relu_backward(const Tensor& x, const Tensor& dy) {
  Tensor dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i) {
    if (!(x[i] > 0.0)) dx[i] = 0.0;
  }
  return dx;
}

Tensor max_pool2d(const Tensor& x, PoolMask& mask) {
  require_rank3(x, "max_pool2d");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  SCORESYNC_REQUIRE(h % 2 == 0 && w % 2 == 0, "max_pool2d needs even spatial extents, got " + shape_string(x.shape()));
  const std::size_t ho = h / 2, wo = w / 2;
  Tensor y({c, ho, wo});
  mask.input_shape = x.shape();
  mask.argmax.assign(y.size(), 0);
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t i = 0; i < ho; ++i) {
      for (std::size_t j = 0; j < wo; ++j) {
        const std::size_t base = (k * h + 2 * i) * w + 2 * j;
        // Candidates in ascending flat index; strict > keeps the first maximum.
        const std::size_t cand[4] = {base, base + 1, base + w, base + w + 1};
        std::size_t best = cand[0];
        for (int q = 1; q < 4; ++q) {
          if (x[cand[q]] > x[best]) best = cand[q];
        }
        const std::size_t o = (k * ho + i) * wo + j;
        y[o] = x[best];
        mask.argmax[o] = best;
      }
    }
  }
  return y;
}

Tensor max_pool2d_backward(const Tensor& dy, const PoolMask& mask) {
  SCORESYNC_ASSERT(dy.size() == mask.argmax.size(), "max_pool2d backward shape mismatch");
  Tensor dx(mask.input_shape);
  for (std::size_t o = 0; o < dy.size(); ++o) dx[mask.argmax[o]] += dy[o];
  return dx;
}

Tensor max_unpool2d(const Tensor& x, const PoolMask& mask) {
  require_rank3(x, "max_unpool2d");
  SCORESYNC_REQUIRE(mask.input_shape.size() == 3 && x.dim(0) == mask.input_shape[0] &&
                        2 * x.dim(1) == mask.input_shape[1] && 2 * x.dim(2) == mask.input_shape[2] &&
                        mask.argmax.size() == x.size(),
                    "max_unpool2d mask/shape mismatch: input " + shape_string(x.shape()) + ", mask for " +
                        shape_string(mask.input_shape));
  Tensor y(mask.input_shape);
  for (std::size_t o = 0; o < x.size(); ++o) y[mask.argmax[o]] = x[o];
  return y;
}

Tensor max_unpool2d_backward(const Tensor& dy, const PoolMask& mask) {
  SCORESYNC_ASSERT(dy.shape() == mask.input_shape, "max_unpool2d backward shape mismatch");
  const Shape& s = mask.input_shape;
  Tensor dx({s[0], s[1] / 2, s[2] / 2});
  for (std::size_t o = 0; o < dx.size(); ++o) dx[o] = dy[mask.argmax[o]];
  return dx;
}

// ---------------------------------------------------------------------------
// Dense

Tensor dense_forward(const Tensor& x, const Tensor& weights, const Tensor& bias) {
  SCORESYNC_REQUIRE(weights.rank() == 2 && weights.dim(1) == x.size(),
                    "dense layer expects " + std::to_string(weights.rank() == 2 ? weights.dim(1) : 0) +
                        " inputs, got " + std::to_string(x.size()));
  const std::size_t out = weights.dim(0), in = weights.dim(1);
  Tensor y({out});
  for (std::size_t o = 0; o < out; ++o) {
    const double* wr = weights.data() + o * in;
    double acc = 0.0;
    for (std::size_t i = 0; i < in; ++i) acc += wr[i] * x[i];
    y[o] = acc + bias[o];
  }
  return y;
}

Tensor dense_backward(const Tensor& x, const Tensor& dy, const Tensor& weights, Tensor& d_weights,
                      Tensor& d_bias) {
  const std::size_t out = weights.dim(0), in = weights.dim(1);
  Tensor dx(x.shape());
  for (std::size_t o = 0; o < out; ++o) {
    const double g = dy[o];
    d_bias[o] += g;
    if (g == 0.0) continue;
    const double* wr = weights.data() + o * in;
    double* dwr = d_weights.data() + o * in;
    for (std::size_t i = 0; i < in; ++i) {
      dwr[i] += g * x[i];
      dx[i] += g * wr[i];
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Stand-alone self-attention

namespace {

struct SasaDims {
  std::size_t c, h, w, hd, half, k, side, slots;
};

SasaDims sasa_dims(const Tensor& x, const SasaParams& p) {
  require_rank3(x, "sasa");
  SasaDims d{};
  d.c = x.dim(0);
  d.h = x.dim(1);
  d.w = x.dim(2);
  SCORESYNC_REQUIRE(d.c % kSasaHeads == 0, "sasa channel count " + std::to_string(d.c) + " is not divisible by " +
                                               std::to_string(kSasaHeads) + " heads");
  d.hd = d.c / kSasaHeads;
  SCORESYNC_REQUIRE(d.hd % 2 == 0, "sasa head dimension must be even to split row/column embeddings");
  d.half = d.hd / 2;
  d.k = p.extent;
  d.side = 2 * d.k + 1;
  d.slots = d.side * d.side;
  SCORESYNC_REQUIRE(p.w_q.shape() == Shape({kSasaHeads, d.hd, d.hd}) && p.w_k.shape() == p.w_q.shape() &&
                        p.w_v.shape() == p.w_q.shape(),
                    "sasa projection shapes do not match the input channels");
  SCORESYNC_REQUIRE(p.row_embed.shape() == Shape({d.side, d.half}) && p.col_embed.shape() == p.row_embed.shape(),
                    "sasa embedding shapes do not match extent and head dimension");
  return d;
}

// out[h*hd + a] = sum_b W[h, a, b] in[h*hd + b], per pixel.
Tensor project(const Tensor& x, const Tensor& wt, const SasaDims& d) {
  Tensor y(x.shape());
  const std::size_t plane = d.h * d.w;
  for (std::size_t hh = 0; hh < kSasaHeads; ++hh) {
    for (std::size_t a = 0; a < d.hd; ++a) {
      double* yr = y.data() + (hh * d.hd + a) * plane;
      for (std::size_t b = 0; b < d.hd; ++b) {
        const double wv = wt[(hh * d.hd + a) * d.hd + b];
        const double* xr = x.data() + (hh * d.hd + b) * plane;
        for (std::size_t p = 0; p < plane; ++p) yr[p] += wv * xr[p];
      }
    }
  }
  return y;
}

// Adds W^T dy into dx and dy x^T into dW.
void project_backward(const Tensor& x, const Tensor& dy, const Tensor& wt, const SasaDims& d, Tensor& dx,
                      Tensor& dw) {
  const std::size_t plane = d.h * d.w;
  for (std::size_t hh = 0; hh < kSasaHeads; ++hh) {
    for (std::size_t a = 0; a < d.hd; ++a) {
      const double* gr = dy.data() + (hh * d.hd + a) * plane;
      for (std::size_t b = 0; b < d.hd; ++b) {
        const std::size_t wi = (hh * d.hd + a) * d.hd + b;
        const double wv = wt[wi];
        const double* xr = x.data() + (hh * d.hd + b) * plane;
        double* dxr = dx.data() + (hh * d.hd + b) * plane;
        double acc = 0.0;
        for (std::size_t p = 0; p < plane; ++p) {
          acc += gr[p] * xr[p];
          dxr[p] += wv * gr[p];
        }
        dw[wi] += acc;
      }
    }
  }
}

}  // namespace

Tensor sasa_forward(const Tensor& x, const SasaParams& p, SasaCache& cache) {
  const SasaDims d = sasa_dims(x, p);
  const std::size_t plane = d.h * d.w;
  cache.q = project(x, p.w_q, d);
  cache.k = project(x, p.w_k, d);
  cache.v = project(x, p.w_v, d);
  cache.weights.assign(kSasaHeads * plane * d.slots, 0.0);
  const Tensor& q = cache.q;
  const Tensor& kk = cache.k;
  const Tensor& v = cache.v;

  Tensor y(x.shape());
  std::vector<double> logits(d.slots);
  std::vector<double> qv(d.hd);
  const long ki = static_cast<long>(d.k);
  for (std::size_t hh = 0; hh < kSasaHeads; ++hh) {
    const std::size_t ch0 = hh * d.hd;
    for (std::size_t i = 0; i < d.h; ++i) {
      for (std::size_t j = 0; j < d.w; ++j) {
        const std::size_t pix = i * d.w + j;
        for (std::size_t e = 0; e < d.hd; ++e) qv[e] = q[(ch0 + e) * plane + pix];
        double top = -std::numeric_limits<double>::infinity();
        for (long di = -ki; di <= ki; ++di) {
          const long a = static_cast<long>(i) + di;
          for (long dj = -ki; dj <= ki; ++dj) {
            const long b = static_cast<long>(j) + dj;
            const std::size_t s = static_cast<std::size_t>((di + ki) * static_cast<long>(d.side) + dj + ki);
            if (a < 0 || b < 0 || a >= static_cast<long>(d.h) || b >= static_cast<long>(d.w)) continue;
            const std::size_t nb = static_cast<std::size_t>(a) * d.w + static_cast<std::size_t>(b);
            double l = 0.0;
            for (std::size_t e = 0; e < d.hd; ++e) l += qv[e] * kk[(ch0 + e) * plane + nb];
            const double* re = p.row_embed.data() + static_cast<std::size_t>(di + ki) * d.half;
            const double* ce = p.col_embed.data() + static_cast<std::size_t>(dj + ki) * d.half;
            for (std::size_t e = 0; e < d.half; ++e) l += qv[e] * re[e] + qv[d.half + e] * ce[e];
            logits[s] = l;
            top = std::max(top, l);
          }
        }
        double* wts = cache.weights.data() + (hh * plane + pix) * d.slots;
        double z = 0.0;
        for (long di = -ki; di <= ki; ++di) {
          const long a = static_cast<long>(i) + di;
          for (long dj = -ki; dj <= ki; ++dj) {
            const long b = static_cast<long>(j) + dj;
            if (a < 0 || b < 0 || a >= static_cast<long>(d.h) || b >= static_cast<long>(d.w)) continue;
            const std::size_t s = static_cast<std::size_t>((di + ki) * static_cast<long>(d.side) + dj + ki);
            wts[s] = std::exp(logits[s] - top);
            z += wts[s];
          }
        }
        for (std::size_t s = 0; s < d.slots; ++s) wts[s] /= z;
        for (long di = -ki; di <= ki; ++di) {
          const long a = static_cast<long>(i) + di;
          for (long dj = -ki; dj <= ki; ++dj) {
            const long b = static_cast<long>(j) + dj;
            if (a < 0 || b < 0 || a >= static_cast<long>(d.h) || b >= static_cast<long>(d.w)) continue;
            const std::size_t s = static_cast<std::size_t>((di + ki) * static_cast<long>(d.side) + dj + ki);
            const std::size_t nb = static_cast<std::size_t>(a) * d.w + static_cast<std::size_t>(b);
            for (std::size_t e = 0; e < d.hd; ++e) y[(ch0 + e) * plane + pix] += wts[s] * v[(ch0 + e) * plane + nb];
          }
        }
      }
    }
  }
  return y;
}

Tensor sasa_backward(const Tensor& x, const Tensor& dy, const SasaParams& p, const SasaCache& cache,
                     SasaParams& grads) {
  const SasaDims d = sasa_dims(x, p);
  const std::size_t plane = d.h * d.w;
  const Tensor& q = cache.q;
  const Tensor& kk = cache.k;
  const Tensor& v = cache.v;
  Tensor dq(x.shape()), dk(x.shape()), dv(x.shape());
  std::vector<double> dp(d.slots), qv(d.hd), g(d.hd), dqv(d.hd);
  const long ki = static_cast<long>(d.k);

  for (std::size_t hh = 0; hh < kSasaHeads; ++hh) {
    const std::size_t ch0 = hh * d.hd;
    for (std::size_t i = 0; i < d.h; ++i) {
      for (std::size_t j = 0; j < d.w; ++j) {
        const std::size_t pix = i * d.w + j;
        const double* wts = cache.weights.data() + (hh * plane + pix) * d.slots;
        for (std::size_t e = 0; e < d.hd; ++e) {
          qv[e] = q[(ch0 + e) * plane + pix];
          g[e] = dy[(ch0 + e) * plane + pix];
          dqv[e] = 0.0;
        }
        double mean = 0.0;
        for (long di = -ki; di <= ki; ++di) {
          const long a = static_cast<long>(i) + di;
          for (long dj = -ki; dj <= ki; ++dj) {
            const long b = static_cast<long>(j) + dj;
            if (a < 0 || b < 0 || a >= static_cast<long>(d.h) || b >= static_cast<long>(d.w)) continue;
            const std::size_t s = static_cast<std::size_t>((di + ki) * static_cast<long>(d.side) + dj + ki);
            const std::size_t nb = static_cast<std::size_t>(a) * d.w + static_cast<std::size_t>(b);
            double acc = 0.0;
            for (std::size_t e = 0; e < d.hd; ++e) {
              acc += g[e] * v[(ch0 + e) * plane + nb];
              dv[(ch0 + e) * plane + nb] += wts[s] * g[e];
            }
            dp[s] = acc;
            mean += wts[s] * acc;
          }
        }
        for (long di = -ki; di <= ki; ++di) {
          const long a = static_cast<long>(i) + di;
          for (long dj = -ki; dj <= ki; ++dj) {
            const long b = static_cast<long>(j) + dj;
            if (a < 0 || b < 0 || a >= static_cast<long>(d.h) || b >= static_cast<long>(d.w)) continue;
            const std::size_t s = static_cast<std::size_t>((di + ki) * static_cast<long>(d.side) + dj + ki);
            const std::size_t nb = static_cast<std::size_t>(a) * d.w + static_cast<std::size_t>(b);
            const double dl = wts[s] * (dp[s] - mean);
            const std::size_t ri = static_cast<std::size_t>(di + ki) * d.half;
            const std::size_t ci = static_cast<std::size_t>(dj + ki) * d.half;
            for (std::size_t e = 0; e < d.hd; ++e) {
              dqv[e] += dl * kk[(ch0 + e) * plane + nb];
              dk[(ch0 + e) * plane + nb] += dl * qv[e];
            }
            for (std::size_t e = 0; e < d.half; ++e) {
              dqv[e] += dl * p.row_embed[ri + e];
              dqv[d.half + e] += dl * p.col_embed[ci + e];
              grads.row_embed[ri + e] += dl * qv[e];
              grads.col_embed[ci + e] += dl * qv[d.half + e];
            }
          }
        }
        for (std::size_t e = 0; e < d.hd; ++e) dq[(ch0 + e) * plane + pix] = dqv[e];
      }
    }
  }

  Tensor dx(x.shape());
  project_backward(x, dq, p.w_q, d, dx, grads.w_q);
  project_backward(x, dk, p.w_k, d, dx, grads.w_k);
  project_backward(x, dv, p.w_v, d, dx, grads.w_v);
  return dx;
}

// ---------------------------------------------------------------------------
// Layer objects

Conv2dLayer::Conv2dLayer(std::size_t in_ch, std::size_t out_ch, std::size_t m, std::size_t dilation)
    : dilation_(dilation) {
  SCORESYNC_REQUIRE(in_ch >= 1 && out_ch >= 1 && m >= 1 && dilation >= 1,
                    "conv2d channels, kernel size and dilation must be >= 1");
  params_ = {Tensor({out_ch, in_ch, m, m}), Tensor({out_ch})};
}

void Conv2dLayer::init(std::mt19937_64& rng) {
  const Shape& s = params_[0].shape();
  fill_normal(params_[0], std::sqrt(2.0 / static_cast<double>(s[1] * s[2] * s[3])), rng);
  params_[1].fill(0.0);
}

Tensor Conv2dLayer::forward(const Tensor& x, LayerCache& cache) const {
  cache.input = x;
  return conv2d_forward(x, params_[0], params_[1], dilation_);
}

Tensor Conv2dLayer::backward(const Tensor& dy, const LayerCache& cache, std::vector<Tensor>& grads) const {
  return conv2d_backward(cache.input, dy, params_[0], dilation_, grads[0], grads[1]);
}

nlohmann::json Conv2dLayer::config() const {
  const Shape& s = params_[0].shape();
  return {{"kind", kind()}, {"in", s[1]}, {"out", s[0]}, {"m", s[2]}, {"dilation", dilation_}};
}

Tensor PadLayer::forward(const Tensor& x, LayerCache&) const { return zero_pad(x, pad_); }
Tensor PadLayer::backward(const Tensor& dy, const LayerCache&, std::vector<Tensor>&) const {
  return zero_pad_backward(dy, pad_);
}
nlohmann::json PadLayer::config() const { return {{"kind", kind()}, {"pad", pad_}}; }

Tensor ReluLayer::forward(const Tensor& x, LayerCache& cache) const {
  cache.input = x;
  return relu(x);
}
Tensor ReluLayer::backward(const Tensor& dy, const LayerCache& cache, std::vector<Tensor>&) const {
  return relu_backward(cache.input, dy);
}
nlohmann::json ReluLayer::config() const { return {{"kind", kind()}}; }

Tensor MaxPoolLayer::forward(const Tensor& x, LayerCache& cache) const { return max_pool2d(x, cache.mask); }
Tensor MaxPoolLayer::backward(const Tensor& dy, const LayerCache& cache, std::vector<Tensor>&) const {
  return max_pool2d_backward(dy, cache.mask);
}
nlohmann::json MaxPoolLayer::config() const { return {{"kind", kind()}}; }

Tensor MaxUnpoolLayer::forward(const Tensor& x, LayerCache& cache) const {
  SCORESYNC_ASSERT(cache.linked != nullptr, "unpool layer has no linked pooling mask");
  return max_unpool2d(x, *cache.linked);
}
Tensor MaxUnpoolLayer::backward(const Tensor& dy, const LayerCache& cache, std::vector<Tensor>&) const {
  return max_unpool2d_backward(dy, *cache.linked);
}
nlohmann::json MaxUnpoolLayer::config() const { return {{"kind", kind()}, {"source", source_}}; }

DenseLayer::DenseLayer(std::size_t in, std::size_t out) {
  SCORESYNC_REQUIRE(in >= 1 && out >= 1, "dense layer sizes must be >= 1");
  params_ = {Tensor({out, in}), Tensor({out})};
}

void DenseLayer::init(std::mt19937_64& rng) {
  fill_normal(params_[0], std::sqrt(2.0 / static_cast<double>(params_[0].dim(1))), rng);
  params_[1].fill(0.0);
}

Tensor DenseLayer::forward(const Tensor& x, LayerCache& cache) const {
  cache.input = x;
  return dense_forward(x, params_[0], params_[1]);
}
Tensor DenseLayer::backward(const Tensor& dy, const LayerCache& cache, std::vector<Tensor>& grads) const {
  return dense_backward(cache.input, dy, params_[0], grads[0], grads[1]);
}
nlohmann::json DenseLayer::config() const {
  return {{"kind", kind()}, {"in", params_[0].dim(1)}, {"out", params_[0].dim(0)}};
}

Tensor FlattenLayer::forward(const Tensor& x, LayerCache& cache) const {
  cache.input = Tensor();
  cache.mask.input_shape = x.shape();
  return x.reshaped({x.size()});
}
Tensor FlattenLayer::backward(const Tensor& dy, const LayerCache& cache, std::vector<Tensor>&) const {
  return dy.reshaped(cache.mask.input_shape);
}
nlohmann::json FlattenLayer::config() const { return {{"kind", kind()}}; }

SasaLayer::SasaLayer(std::size_t channels, std::size_t extent) : channels_(channels), extent_(extent) {
  SCORESYNC_REQUIRE(channels % kSasaHeads == 0, "sasa channel count " + std::to_string(channels) +
                                                    " is not divisible by " + std::to_string(kSasaHeads) + " heads");
  const std::size_t hd = channels / kSasaHeads;
  SCORESYNC_REQUIRE(hd % 2 == 0, "sasa head dimension must be even to split row/column embeddings");
  SCORESYNC_REQUIRE(extent >= 1, "sasa spatial extent must be >= 1");
  const std::size_t side = 2 * extent + 1;
  params_ = {Tensor({kSasaHeads, hd, hd}), Tensor({kSasaHeads, hd, hd}), Tensor({kSasaHeads, hd, hd}),
             Tensor({side, hd / 2}), Tensor({side, hd / 2})};
}

void SasaLayer::init(std::mt19937_64& rng) {
  const double std_dev = std::sqrt(2.0 / static_cast<double>(channels_ / kSasaHeads));
  for (int i = 0; i < 3; ++i) fill_normal(params_[i], std_dev, rng);
  fill_uniform(params_[3], 0.1, rng);
  fill_uniform(params_[4], 0.1, rng);
}

SasaParams SasaLayer::view() const {
  return {params_[0], params_[1], params_[2], params_[3], params_[4], extent_};
}

Tensor SasaLayer::forward(const Tensor& x, LayerCache& cache) const {
  cache.input = x;
  return sasa_forward(x, view(), cache.sasa);
}

Tensor SasaLayer::backward(const Tensor& dy, const LayerCache& cache, std::vector<Tensor>& grads) const {
  SasaParams g{std::move(grads[0]), std::move(grads[1]), std::move(grads[2]), std::move(grads[3]),
               std::move(grads[4]), extent_};
  Tensor dx = sasa_backward(cache.input, dy, view(), cache.sasa, g);
  grads[0] = std::move(g.w_q);
  grads[1] = std::move(g.w_k);
  grads[2] = std::move(g.w_v);
  grads[3] = std::move(g.row_embed);
  grads[4] = std::move(g.col_embed);
  return dx;
}

nlohmann::json SasaLayer::config() const {
  return {{"kind", kind()}, {"channels", channels_}, {"extent", extent_}};
}

std::unique_ptr<Layer> layer_from_config(const nlohmann::json& c) {
  SCORESYNC_REQUIRE(c.is_object() && c.contains("kind") && c["kind"].is_string(), "layer config needs a \"kind\"");
  const auto kind = c["kind"].get<std::string>();
  auto get = [&](const char* key) {
    SCORESYNC_REQUIRE(c.contains(key) && c[key].is_number_unsigned(),
                      "layer \"" + kind + "\" needs a non-negative integer \"" + key + "\"");
    return c[key].get<std::size_t>();
  };
  if (kind == "conv2d") return std::make_unique<Conv2dLayer>(get("in"), get("out"), get("m"), get("dilation"));
  if (kind == "pad") return std::make_unique<PadLayer>(get("pad"));
  if (kind == "relu") return std::make_unique<ReluLayer>();
  if (kind == "maxpool") return std::make_unique<MaxPoolLayer>();
  if (kind == "maxunpool") return std::make_unique<MaxUnpoolLayer>(get("source"));
  if (kind == "dense") return std::make_unique<DenseLayer>(get("in"), get("out"));
  if (kind == "flatten") return std::make_unique<FlattenLayer>();
  if (kind == "sasa") return std::make_unique<SasaLayer>(get("channels"), get("extent"));
  throw InputError("unknown layer kind \"" + kind + "\"");
}

}  // namespace scoresync::neural
