#pragma once

#include <cstdint>

namespace mdt::kern {

// Geometry of a stride/pad convolution over one (C,H,W) tensor.
struct ConvGeom {
  int in_c, in_h, in_w;
  int k, stride, pad;
  int out_h, out_w;
  std::int64_t patch_len() const { return static_cast<std::int64_t>(in_c) * k * k; }
  std::int64_t positions() const { return static_cast<std::int64_t>(out_h) * out_w; }
};

ConvGeom conv_geom(int c, int h, int w, int k, int stride, int pad);
// Output spatial size of a transposed convolution: (in-1)*stride - 2*pad + k.
int deconv_out(int in, int k, int stride, int pad);

// cols has positions() rows of patch_len() columns; row p holds the receptive
// field of output position p in (c, ky, kx) order. Out-of-bounds taps are 0.
void im2col(const double* x, const ConvGeom& g, double* cols);
// Scatter-add transpose of im2col.
void col2im_add(const double* cols, const ConvGeom& g, double* x);

// Y[r*P + p] = dot(A[r*K..], B[p*K..]) + (bias ? bias[r] : 0)
void rowdot(const double* a, const double* b, std::int64_t r_rows, std::int64_t p_rows,
            std::int64_t k, const double* bias, double* y);
// dA[r] += sum_p G[r*P+p] * B[p]  — fixed p order per row.
void accum_rows(const double* g, const double* b, std::int64_t r_rows, std::int64_t p_rows,
                std::int64_t k, double* da);
// out[p] += sum_r X[r*P+p] * W[r]  — fixed r order per row.
void scale_rows(const double* x, const double* w, std::int64_t r_rows, std::int64_t p_rows,
                std::int64_t k, double* out);

double dot(const double* a, const double* b, std::int64_t n);

}  // namespace mdt::kern
