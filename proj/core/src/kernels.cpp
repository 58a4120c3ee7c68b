#include "mdt/kernels.hpp"

#include <cstring>

#include "mdt/errors.hpp"
#include "mdt/parallel.hpp"

namespace mdt::kern {

ConvGeom conv_geom(int c, int h, int w, int k, int stride, int pad) {
  ConvGeom g{c, h, w, k, stride, pad, 0, 0};
  g.out_h = (h + 2 * pad - k) / stride + 1;
  g.out_w = (w + 2 * pad - k) / stride + 1;
  if (g.out_h <= 0 || g.out_w <= 0)
    throw ConfigError("convolution input too small for kernel/stride");
  return g;
}

int deconv_out(int in, int k, int stride, int pad) { return (in - 1) * stride - 2 * pad + k; }

void im2col(const double* x, const ConvGeom& g, double* cols) {
  const std::int64_t K = g.patch_len();
  const std::int64_t plane = static_cast<std::int64_t>(g.in_h) * g.in_w;
  parallel_for(g.positions(), [&](std::int64_t pb, std::int64_t pe) {
    for (std::int64_t p = pb; p < pe; ++p) {
      const int oy = static_cast<int>(p / g.out_w);
      const int ox = static_cast<int>(p % g.out_w);
      double* row = cols + p * K;
      const int y0 = oy * g.stride - g.pad;
      const int x0 = ox * g.stride - g.pad;
      for (int c = 0; c < g.in_c; ++c) {
        const double* src = x + c * plane;
        for (int ky = 0; ky < g.k; ++ky) {
          const int yy = y0 + ky;
          if (yy < 0 || yy >= g.in_h) {
            for (int kx = 0; kx < g.k; ++kx) *row++ = 0.0;
            continue;
          }
          const double* line = src + static_cast<std::int64_t>(yy) * g.in_w;
          for (int kx = 0; kx < g.k; ++kx) {
            const int xx = x0 + kx;
            *row++ = (xx < 0 || xx >= g.in_w) ? 0.0 : line[xx];
          }
        }
      }
    }
  });
}

void col2im_add(const double* cols, const ConvGeom& g, double* x) {
  // Overlapping scatter: kept sequential so accumulation order is fixed.
  const std::int64_t K = g.patch_len();
  const std::int64_t plane = static_cast<std::int64_t>(g.in_h) * g.in_w;
  const std::int64_t P = g.positions();
  for (std::int64_t p = 0; p < P; ++p) {
    const int oy = static_cast<int>(p / g.out_w);
    const int ox = static_cast<int>(p % g.out_w);
    const double* row = cols + p * K;
    const int y0 = oy * g.stride - g.pad;
    const int x0 = ox * g.stride - g.pad;
    for (int c = 0; c < g.in_c; ++c) {
      double* dst = x + c * plane;
      for (int ky = 0; ky < g.k; ++ky) {
        const int yy = y0 + ky;
        if (yy < 0 || yy >= g.in_h) {
          row += g.k;
          continue;
        }
        double* line = dst + static_cast<std::int64_t>(yy) * g.in_w;
        for (int kx = 0; kx < g.k; ++kx) {
          const int xx = x0 + kx;
          if (xx >= 0 && xx < g.in_w) line[xx] += row[kx];
        }
        row += g.k;
      }
    }
  }
}

namespace {
// Dot product with a fixed reduction tree: 64 lanes of partial sums combined
// in a constant order, so the result is identical for every thread count.
constexpr int kLanes = 64;

inline double dot_fixed(const double* a, const double* b, std::int64_t n) {
  double acc[kLanes] = {0};
  std::int64_t i = 0;
  for (; i + kLanes <= n; i += kLanes)
    for (int j = 0; j < kLanes; ++j) acc[j] += a[i + j] * b[i + j];
  double tail = 0.0;
  for (; i < n; ++i) tail += a[i] * b[i];
  for (int step = kLanes / 2; step > 0; step /= 2)
    for (int j = 0; j < step; ++j) acc[j] += acc[j + step];
  return acc[0] + tail;
}
}  // namespace

double dot(const double* a, const double* b, std::int64_t n) { return dot_fixed(a, b, n); }

void rowdot(const double* a, const double* b, std::int64_t r_rows, std::int64_t p_rows,
            std::int64_t k, const double* bias, double* y) {
  // Each output element is a single fixed-order dot product.
  const std::int64_t total = r_rows * p_rows;
  parallel_for(total, [&](std::int64_t tb, std::int64_t te) {
    for (std::int64_t t = tb; t < te; ++t) {
      const std::int64_t r = t / p_rows;
      const std::int64_t p = t % p_rows;
      double v = dot_fixed(a + r * k, b + p * k, k);
      if (bias) v += bias[r];
      y[t] = v;
    }
  });
}

void accum_rows(const double* g, const double* b, std::int64_t r_rows, std::int64_t p_rows,
                std::int64_t k, double* da) {
  parallel_for(r_rows, [&](std::int64_t rb, std::int64_t re) {
    for (std::int64_t r = rb; r < re; ++r) {
      double* out = da + r * k;
      const double* grow = g + r * p_rows;
      for (std::int64_t p = 0; p < p_rows; ++p) {
        const double s = grow[p];
        if (s == 0.0) continue;
        const double* brow = b + p * k;
        for (std::int64_t j = 0; j < k; ++j) out[j] += s * brow[j];
      }
    }
  });
}

void scale_rows(const double* x, const double* w, std::int64_t r_rows, std::int64_t p_rows,
                std::int64_t k, double* out) {
  parallel_for(p_rows, [&](std::int64_t pb, std::int64_t pe) {
    for (std::int64_t p = pb; p < pe; ++p) {
      double* row = out + p * k;
      for (std::int64_t r = 0; r < r_rows; ++r) {
        const double s = x[r * p_rows + p];
        if (s == 0.0) continue;
        const double* wrow = w + r * k;
        for (std::int64_t j = 0; j < k; ++j) row[j] += s * wrow[j];
      }
    }
  });
}

}  // namespace mdt::kern
