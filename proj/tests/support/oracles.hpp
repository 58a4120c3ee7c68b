#pragma once

// Independent reference implementations used as test oracles. Everything here
// is deliberately naive and separate from the library's compute paths.

#include <cmath>
#include <functional>
#include <vector>

#include "mdt/graph.hpp"
#include "mdt/tensor.hpp"

namespace oracle {

// Central finite difference of f with respect to *x.
inline double numeric_grad(const std::function<double()>& f, double* x, double h = 1e-5) {
  const double orig = *x;
  *x = orig + h;
  const double fp = f();
  *x = orig - h;
  const double fm = f();
  *x = orig;
  return (fp - fm) / (2.0 * h);
}

inline double rel_err(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Best relative agreement between an analytic gradient and central
// differences over several step sizes. The objective has |.| and leaky-relu
// kinks, so any single h can land on a kink; the derivative check passes if
// one consistent step size confirms it.
inline double fd_rel_err(const std::function<double()>& f, double* x, double ad) {
  double best = 1e30;
  for (const double h : {1e-6, 1e-5, 1e-7}) {
    best = std::min(best, rel_err(ad, numeric_grad(f, x, h)));
    if (best < 1e-4) break;
  }
  return best;
}

// Direct quadruple-loop convolution.
inline mdt::Tensor conv2d(const mdt::Tensor& x, const mdt::Tensor& w, const mdt::Tensor* b,
                          int stride, int pad) {
  const int cin = x.dim(0), h = x.dim(1), ww = x.dim(2);
  const int cout = w.dim(0), k = w.dim(2);
  const int oh = (h + 2 * pad - k) / stride + 1;
  const int ow = (ww + 2 * pad - k) / stride + 1;
  mdt::Tensor y({cout, oh, ow});
  for (int co = 0; co < cout; ++co)
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        double s = b ? (*b)[co] : 0.0;
        for (int ci = 0; ci < cin; ++ci)
          for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
              const int yy = oy * stride - pad + ky;
              const int xx = ox * stride - pad + kx;
              if (yy < 0 || yy >= h || xx < 0 || xx >= ww) continue;
              s += x.at(ci, yy, xx) * w[((static_cast<std::int64_t>(co) * cin + ci) * k + ky) * k + kx];
            }
        y.at(co, oy, ox) = s;
      }
  return y;
}

// Direct scatter transposed convolution; w is (Cin,Cout,k,k).
inline mdt::Tensor conv_transpose2d(const mdt::Tensor& x, const mdt::Tensor& w,
                                    const mdt::Tensor* b, int stride, int pad) {
  const int cin = x.dim(0), h = x.dim(1), ww = x.dim(2);
  const int cout = w.dim(1), k = w.dim(2);
  const int oh = (h - 1) * stride - 2 * pad + k;
  const int ow = (ww - 1) * stride - 2 * pad + k;
  mdt::Tensor y({cout, oh, ow});
  for (int ci = 0; ci < cin; ++ci)
    for (int iy = 0; iy < h; ++iy)
      for (int ix = 0; ix < ww; ++ix) {
        const double v = x.at(ci, iy, ix);
        for (int co = 0; co < cout; ++co)
          for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
              const int yy = iy * stride - pad + ky;
              const int xx = ix * stride - pad + kx;
              if (yy < 0 || yy >= oh || xx < 0 || xx >= ow) continue;
              y.at(co, yy, xx) +=
                  v * w[((static_cast<std::int64_t>(ci) * cout + co) * k + ky) * k + kx];
            }
      }
  if (b)
    for (int co = 0; co < cout; ++co)
      for (int yy = 0; yy < oh; ++yy)
        for (int xx = 0; xx < ow; ++xx) y.at(co, yy, xx) += (*b)[co];
  return y;
}

// Per-window SSIM computed directly from the definition, one window at a
// time (valid positions, 11x11 Gaussian sigma 1.5, data range 2).
inline double ssim(const mdt::Tensor& x, const mdt::Tensor& y) {
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int win = 11;
  const double sigma = 1.5, c1 = 4.0e-4, c2 = 3.6e-3;
  std::vector<double> g(static_cast<size_t>(win) * win);
  double gsum = 0.0;
  for (int i = 0; i < win; ++i)
    for (int j = 0; j < win; ++j) {
      const double dy = i - (win - 1) / 2.0, dx = j - (win - 1) / 2.0;
      g[static_cast<size_t>(i) * win + j] = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
      gsum += g[static_cast<size_t>(i) * win + j];
    }
  for (double& v : g) v /= gsum;

  double total = 0.0;
  std::int64_t count = 0;
  for (int ch = 0; ch < c; ++ch)
    for (int oy = 0; oy + win <= h; ++oy)
      for (int ox = 0; ox + win <= w; ++ox) {
        double mx = 0, my = 0, mxx = 0, myy = 0, mxy = 0;
        for (int i = 0; i < win; ++i)
          for (int j = 0; j < win; ++j) {
            const double wij = g[static_cast<size_t>(i) * win + j];
            const double xv = x.at(ch, oy + i, ox + j);
            const double yv = y.at(ch, oy + i, ox + j);
            mx += wij * xv;
            my += wij * yv;
            mxx += wij * xv * xv;
            myy += wij * yv * yv;
            mxy += wij * xv * yv;
          }
        const double vx = mxx - mx * mx, vy = myy - my * my, cov = mxy - mx * my;
        total += ((2 * mx * my + c1) * (2 * cov + c2)) /
                 ((mx * mx + my * my + c1) * (vx + vy + c2));
        ++count;
      }
  return total / static_cast<double>(count);
}

}  // namespace oracle
