#include "mdt/graph.hpp"

#include <algorithm>
#include <cmath>

#include "mdt/errors.hpp"
#include "mdt/kernels.hpp"

namespace mdt {
namespace {

void check_chw(const Tensor& t, const char* op) {
  if (t.rank() != 3) throw DataError(std::string(op) + ": expected a (C,H,W) tensor, got " + shape_str(t.shape()));
}

}  // namespace

Graph::Id Graph::emplace(Tensor value) {
  Node n;
  n.own = std::move(value);
  nodes_.push_back(std::move(n));
  return static_cast<Id>(nodes_.size() - 1);
}

Graph::Id Graph::input(Tensor v) { return emplace(std::move(v)); }

Graph::Id Graph::param(Param& p) {
  Node n;
  n.ext = &p.value;
  if (recording_ && p.requires_grad) n.bound = &p;
  nodes_.push_back(std::move(n));
  return static_cast<Id>(nodes_.size() - 1);
}

Graph::Id Graph::frozen(const Param& p) {
  Node n;
  n.ext = &p.value;
  nodes_.push_back(std::move(n));
  return static_cast<Id>(nodes_.size() - 1);
}

void Graph::backward(Id root) {
  if (!recording_) throw ConfigError("backward() on a non-recording graph");
  if (node_value(root).size() != 1) throw ConfigError("backward root must be a scalar");
  for (auto& n : nodes_) {
    const Tensor& v = n.ext ? *n.ext : n.own;
    if (n.g.size() != v.size()) n.g = Tensor(v.shape());
    else n.g.zero();
  }
  nodes_[static_cast<size_t>(root)].g[0] = 1.0;
  for (Id id = root; id >= 0; --id) {
    auto& n = nodes_[static_cast<size_t>(id)];
    if (n.back) n.back(*this);
  }
  for (auto& n : nodes_) {
    if (!n.bound) continue;
    Param& p = *n.bound;
    const std::int64_t sz = n.g.size();
    for (std::int64_t i = 0; i < sz; ++i) p.grad[i] += n.g[i];
  }
}

Graph::Id Graph::conv2d(Id x, Id w, Id bias, int stride, int pad) {
  const Tensor& xv = val(x);
  const Tensor& wv = val(w);
  check_chw(xv, "conv2d");
  const int cout = wv.dim(0), cin = wv.dim(1), k = wv.dim(2);
  if (cin != xv.dim(0))
    throw DataError("conv2d: input channels " + std::to_string(xv.dim(0)) + " != weight channels " +
                    std::to_string(cin));
  const auto g = kern::conv_geom(cin, xv.dim(1), xv.dim(2), k, stride, pad);
  const std::int64_t K = g.patch_len(), P = g.positions();

  std::vector<double> cols(static_cast<size_t>(K * P));
  kern::im2col(xv.data(), g, cols.data());
  Tensor out({cout, g.out_h, g.out_w});
  kern::rowdot(wv.data(), cols.data(), cout, P, K, bias >= 0 ? val(bias).data() : nullptr,
               out.data());
  const Id y = emplace(std::move(out));
  if (!recording_) return y;

  nodes_[static_cast<size_t>(y)].back = [x, w, bias, y, g](Graph& gr) {
    const Tensor& xv = gr.val(x);
    const Tensor& wv = gr.val(w);
    const Tensor& gy = gr.grad_buf(y);
    const int cout = wv.dim(0), k = wv.dim(2);
    const std::int64_t K = g.patch_len(), P = g.positions();
    (void)k;
    // d(input)
    {
      std::vector<double> dcols(static_cast<size_t>(K * P), 0.0);
      kern::scale_rows(gy.data(), wv.data(), cout, P, K, dcols.data());
      kern::col2im_add(dcols.data(), g, gr.grad_buf(x).data());
    }
    // d(weight): recompute patches rather than retaining them.
    {
      std::vector<double> cols(static_cast<size_t>(K * P));
      kern::im2col(xv.data(), g, cols.data());
      kern::accum_rows(gy.data(), cols.data(), cout, P, K, gr.grad_buf(w).data());
    }
    if (bias >= 0) {
      Tensor& gb = gr.grad_buf(bias);
      for (int c = 0; c < cout; ++c) {
        double s = 0.0;
        const double* row = gy.data() + static_cast<std::int64_t>(c) * P;
        for (std::int64_t p = 0; p < P; ++p) s += row[p];
        gb[c] += s;
      }
    }
  };
  return y;
}

Graph::Id Graph::conv_transpose2d(Id x, Id w, Id bias, int stride, int pad) {
  const Tensor& xv = val(x);
  const Tensor& wv = val(w);
  check_chw(xv, "conv_transpose2d");
  const int cin = wv.dim(0), cout = wv.dim(1), k = wv.dim(2);
  if (cin != xv.dim(0))
    throw DataError("conv_transpose2d: input channels " + std::to_string(xv.dim(0)) +
                    " != weight channels " + std::to_string(cin));
  const int oh = kern::deconv_out(xv.dim(1), k, stride, pad);
  const int ow = kern::deconv_out(xv.dim(2), k, stride, pad);
  if (oh <= 0 || ow <= 0) throw ConfigError("conv_transpose2d output is empty");
  // Forward is the adjoint of a conv over the *output* grid.
  const auto g = kern::conv_geom(cout, oh, ow, k, stride, pad);
  if (g.out_h != xv.dim(1) || g.out_w != xv.dim(2))
    throw ConfigError("conv_transpose2d geometry mismatch");
  const std::int64_t K = g.patch_len(), P = g.positions();

  Tensor out({cout, oh, ow});
  {
    std::vector<double> cols(static_cast<size_t>(K * P), 0.0);
    kern::scale_rows(xv.data(), wv.data(), cin, P, K, cols.data());
    kern::col2im_add(cols.data(), g, out.data());
  }
  if (bias >= 0) {
    const Tensor& bv = val(bias);
    const std::int64_t plane = static_cast<std::int64_t>(oh) * ow;
    for (int c = 0; c < cout; ++c) {
      double* dst = out.data() + c * plane;
      for (std::int64_t i = 0; i < plane; ++i) dst[i] += bv[c];
    }
  }
  const Id y = emplace(std::move(out));
  if (!recording_) return y;

  nodes_[static_cast<size_t>(y)].back = [x, w, bias, y, g, cin](Graph& gr) {
    const Tensor& xv = gr.val(x);
    const Tensor& wv = gr.val(w);
    const Tensor& gy = gr.grad_buf(y);
    const std::int64_t K = g.patch_len(), P = g.positions();
    std::vector<double> dcols(static_cast<size_t>(K * P));
    kern::im2col(gy.data(), g, dcols.data());
    // d(input): dX[ci][p] = dot(W[ci], dcols[p])
    {
      Tensor tmp(xv.shape());
      kern::rowdot(wv.data(), dcols.data(), cin, P, K, nullptr, tmp.data());
      Tensor& gx = gr.grad_buf(x);
      for (std::int64_t i = 0; i < tmp.size(); ++i) gx[i] += tmp[i];
    }
    // d(weight)
    kern::accum_rows(xv.data(), dcols.data(), cin, P, K, gr.grad_buf(w).data());
    if (bias >= 0) {
      const int cout = wv.dim(1);
      const std::int64_t plane = static_cast<std::int64_t>(gy.dim(1)) * gy.dim(2);
      Tensor& gb = gr.grad_buf(bias);
      for (int c = 0; c < cout; ++c) {
        double s = 0.0;
        const double* row = gy.data() + c * plane;
        for (std::int64_t i = 0; i < plane; ++i) s += row[i];
        gb[c] += s;
      }
    }
  };
  return y;
}

Graph::Id Graph::instance_norm(Id x, double eps) {
  const Tensor& xv = val(x);
  check_chw(xv, "instance_norm");
  const int c = xv.dim(0);
  const std::int64_t plane = static_cast<std::int64_t>(xv.dim(1)) * xv.dim(2);
  Tensor out(xv.shape());
  std::vector<double> istd(static_cast<size_t>(c));
  for (int ch = 0; ch < c; ++ch) {
    const double* src = xv.data() + ch * plane;
    double mean = 0.0;
    for (std::int64_t i = 0; i < plane; ++i) mean += src[i];
    mean /= static_cast<double>(plane);
    double var = 0.0;
    for (std::int64_t i = 0; i < plane; ++i) {
      const double d = src[i] - mean;
      var += d * d;
    }
    var /= static_cast<double>(plane);
    const double is = 1.0 / std::sqrt(var + eps);
    istd[static_cast<size_t>(ch)] = is;
    double* dst = out.data() + ch * plane;
    for (std::int64_t i = 0; i < plane; ++i) dst[i] = (src[i] - mean) * is;
  }
  const Id y = emplace(std::move(out));
  if (!recording_) return y;

  nodes_[static_cast<size_t>(y)].back = [x, y, c, plane, istd = std::move(istd)](Graph& gr) {
    const Tensor& yv = gr.val(y);
    const Tensor& gy = gr.grad_buf(y);
    Tensor& gx = gr.grad_buf(x);
    const double n = static_cast<double>(plane);
    for (int ch = 0; ch < c; ++ch) {
      const double* yrow = yv.data() + ch * plane;
      const double* grow = gy.data() + ch * plane;
      double* out = gx.data() + ch * plane;
      double gsum = 0.0, gysum = 0.0;
      for (std::int64_t i = 0; i < plane; ++i) {
        gsum += grow[i];
        gysum += grow[i] * yrow[i];
      }
      const double gmean = gsum / n, gymean = gysum / n;
      const double is = istd[static_cast<size_t>(ch)];
      for (std::int64_t i = 0; i < plane; ++i)
        out[i] += is * (grow[i] - gmean - yrow[i] * gymean);
    }
  };
  return y;
}

Graph::Id Graph::leaky_relu(Id x, double slope) {
  const Tensor& xv = val(x);
  Tensor out(xv.shape());
  for (std::int64_t i = 0; i < xv.size(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : slope * xv[i];
  const Id y = emplace(std::move(out));
  if (!recording_) return y;
  nodes_[static_cast<size_t>(y)].back = [x, y, slope](Graph& gr) {
    const Tensor& xv = gr.val(x);
    const Tensor& gy = gr.grad_buf(y);
    Tensor& gx = gr.grad_buf(x);
    for (std::int64_t i = 0; i < xv.size(); ++i) gx[i] += gy[i] * (xv[i] > 0.0 ? 1.0 : slope);
  };
  return y;
}

Graph::Id Graph::tanh_op(Id x) {
  const Tensor& xv = val(x);
  Tensor out(xv.shape());
  for (std::int64_t i = 0; i < xv.size(); ++i) out[i] = std::tanh(xv[i]);
  const Id y = emplace(std::move(out));
  if (!recording_) return y;
  nodes_[static_cast<size_t>(y)].back = [x, y](Graph& gr) {
    const Tensor& yv = gr.val(y);
    const Tensor& gy = gr.grad_buf(y);
    Tensor& gx = gr.grad_buf(x);
    for (std::int64_t i = 0; i < yv.size(); ++i) gx[i] += gy[i] * (1.0 - yv[i] * yv[i]);
  };
  return y;
}

Graph::Id Graph::sigmoid_op(Id x) {
  const Tensor& xv = val(x);
  Tensor out(xv.shape());
  for (std::int64_t i = 0; i < xv.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-xv[i]));
  const Id y = emplace(std::move(out));
  if (!recording_) return y;
  nodes_[static_cast<size_t>(y)].back = [x, y](Graph& gr) {
    const Tensor& yv = gr.val(y);
    const Tensor& gy = gr.grad_buf(y);
    Tensor& gx = gr.grad_buf(x);
    for (std::int64_t i = 0; i < yv.size(); ++i) gx[i] += gy[i] * yv[i] * (1.0 - yv[i]);
  };
  return y;
}

Graph::Id Graph::add(Id a, Id b) {
  const Tensor& av = val(a);
  const Tensor& bv = val(b);
  if (!av.same_shape(bv)) throw DataError("add: shape mismatch");
  Tensor out(av.shape());
  for (std::int64_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
  const Id y = emplace(std::move(out));
  if (!recording_) return y;
  nodes_[static_cast<size_t>(y)].back = [a, b, y](Graph& gr) {
    const Tensor& gy = gr.grad_buf(y);
    Tensor& ga = gr.grad_buf(a);
    Tensor& gb = gr.grad_buf(b);
    for (std::int64_t i = 0; i < gy.size(); ++i) {
      ga[i] += gy[i];
      gb[i] += gy[i];
    }
  };
  return y;
}

Graph::Id Graph::concat_channels(Id a, Id b) {
  const Tensor& av = val(a);
  const Tensor& bv = val(b);
  check_chw(av, "concat_channels");
  check_chw(bv, "concat_channels");
  if (av.dim(1) != bv.dim(1) || av.dim(2) != bv.dim(2))
    throw DataError("concat_channels: spatial mismatch " + shape_str(av.shape()) + " vs " +
                    shape_str(bv.shape()));
  Tensor out({av.dim(0) + bv.dim(0), av.dim(1), av.dim(2)});
  std::copy(av.data(), av.data() + av.size(), out.data());
  std::copy(bv.data(), bv.data() + bv.size(), out.data() + av.size());
  const Id y = emplace(std::move(out));
  if (!recording_) return y;
  nodes_[static_cast<size_t>(y)].back = [a, b, y](Graph& gr) {
    const Tensor& gy = gr.grad_buf(y);
    Tensor& ga = gr.grad_buf(a);
    Tensor& gb = gr.grad_buf(b);
    for (std::int64_t i = 0; i < ga.size(); ++i) ga[i] += gy[i];
    for (std::int64_t i = 0; i < gb.size(); ++i) gb[i] += gy[ga.size() + i];
  };
  return y;
}

Graph::Id Graph::channel_mean(Id x) {
  const Tensor& xv = val(x);
  check_chw(xv, "channel_mean");
  const int c = xv.dim(0);
  const std::int64_t plane = static_cast<std::int64_t>(xv.dim(1)) * xv.dim(2);
  Tensor out({c});
  for (int ch = 0; ch < c; ++ch) {
    double s = 0.0;
    const double* src = xv.data() + ch * plane;
    for (std::int64_t i = 0; i < plane; ++i) s += src[i];
    out[ch] = s / static_cast<double>(plane);
  }
  const Id y = emplace(std::move(out));
  if (!recording_) return y;
  nodes_[static_cast<size_t>(y)].back = [x, y, c, plane](Graph& gr) {
    const Tensor& gy = gr.grad_buf(y);
    Tensor& gx = gr.grad_buf(x);
    for (int ch = 0; ch < c; ++ch) {
      const double v = gy[ch] / static_cast<double>(plane);
      double* dst = gx.data() + ch * plane;
      for (std::int64_t i = 0; i < plane; ++i) dst[i] += v;
    }
  };
  return y;
}

Graph::Id Graph::global_mean(Id x) {
  const Tensor& xv = val(x);
  double s = 0.0;
  for (std::int64_t i = 0; i < xv.size(); ++i) s += xv[i];
  const Id y = emplace(Tensor::scalar(s / static_cast<double>(xv.size())));
  if (!recording_) return y;
  nodes_[static_cast<size_t>(y)].back = [x, y](Graph& gr) {
    const double g = gr.grad_buf(y)[0];
    Tensor& gx = gr.grad_buf(x);
    const double v = g / static_cast<double>(gx.size());
    for (std::int64_t i = 0; i < gx.size(); ++i) gx[i] += v;
  };
  return y;
}

Graph::Id Graph::linear(Id x, Id w, Id bias) {
  const Tensor& xv = val(x);
  const Tensor& wv = val(w);
  const int o = wv.dim(0), d = wv.dim(1);
  if (xv.size() != d) throw DataError("linear: input size mismatch");
  Tensor out({o});
  for (int i = 0; i < o; ++i)
    out[i] = kern::dot(wv.data() + static_cast<std::int64_t>(i) * d, xv.data(), d) +
             (bias >= 0 ? val(bias)[i] : 0.0);
  const Id y = emplace(std::move(out));
  if (!recording_) return y;
  nodes_[static_cast<size_t>(y)].back = [x, w, bias, y, o, d](Graph& gr) {
    const Tensor& xv = gr.val(x);
    const Tensor& wv = gr.val(w);
    const Tensor& gy = gr.grad_buf(y);
    Tensor& gx = gr.grad_buf(x);
    Tensor& gw = gr.grad_buf(w);
    for (int i = 0; i < o; ++i) {
      const double g = gy[i];
      const double* wrow = wv.data() + static_cast<std::int64_t>(i) * d;
      double* gwrow = gw.data() + static_cast<std::int64_t>(i) * d;
      for (int j = 0; j < d; ++j) {
        gx[j] += g * wrow[j];
        gwrow[j] += g * xv[j];
      }
    }
    if (bias >= 0) {
      Tensor& gb = gr.grad_buf(bias);
      for (int i = 0; i < o; ++i) gb[i] += gy[i];
    }
  };
  return y;
}

Graph::Id Graph::bce_mean(Id x, double target, double eps) {
  const Tensor& xv = val(x);
  const double n = static_cast<double>(xv.size());
  double s = 0.0;
  for (std::int64_t i = 0; i < xv.size(); ++i) {
    const double p = std::clamp(xv[i], eps, 1.0 - eps);
    s += -(target * std::log(p) + (1.0 - target) * std::log(1.0 - p));
  }
  const Id y = emplace(Tensor::scalar(s / n));
  if (!recording_) return y;
  nodes_[static_cast<size_t>(y)].back = [x, y, target, eps, n](Graph& gr) {
    const Tensor& xv = gr.val(x);
    const double g = gr.grad_buf(y)[0] / n;
    Tensor& gx = gr.grad_buf(x);
    for (std::int64_t i = 0; i < xv.size(); ++i) {
      if (xv[i] <= eps || xv[i] >= 1.0 - eps) continue;  // saturated: clamped, no gradient
      gx[i] += g * (-(target / xv[i]) + (1.0 - target) / (1.0 - xv[i]));
    }
  };
  return y;
}

Graph::Id Graph::l1_mean(Id a, Id b) {
  const Tensor& av = val(a);
  const Tensor& bv = val(b);
  if (!av.same_shape(bv)) throw DataError("l1_mean: shape mismatch " + shape_str(av.shape()) +
                                          " vs " + shape_str(bv.shape()));
  const double n = static_cast<double>(av.size());
  double s = 0.0;
  for (std::int64_t i = 0; i < av.size(); ++i) s += std::abs(av[i] - bv[i]);
  const Id y = emplace(Tensor::scalar(s / n));
  if (!recording_) return y;
  nodes_[static_cast<size_t>(y)].back = [a, b, y, n](Graph& gr) {
    const Tensor& av = gr.val(a);
    const Tensor& bv = gr.val(b);
    const double g = gr.grad_buf(y)[0] / n;
    Tensor& ga = gr.grad_buf(a);
    Tensor& gb = gr.grad_buf(b);
    for (std::int64_t i = 0; i < av.size(); ++i) {
      const double d = av[i] - bv[i];
      const double sgn = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
      ga[i] += g * sgn;
      gb[i] -= g * sgn;
    }
  };
  return y;
}

Graph::Id Graph::softmax_cross_entropy(Id logits, int label) {
  const Tensor& lv = val(logits);
  if (label < 0 || label >= lv.size()) throw ConfigError("softmax_cross_entropy: label out of range");
  double mx = lv[0];
  for (std::int64_t i = 1; i < lv.size(); ++i) mx = std::max(mx, lv[i]);
  double z = 0.0;
  for (std::int64_t i = 0; i < lv.size(); ++i) z += std::exp(lv[i] - mx);
  const double loss = std::log(z) + mx - lv[label];
  const Id y = emplace(Tensor::scalar(loss));
  if (!recording_) return y;
  nodes_[static_cast<size_t>(y)].back = [logits, y, label, mx, z](Graph& gr) {
    const Tensor& lv = gr.val(logits);
    const double g = gr.grad_buf(y)[0];
    Tensor& gl = gr.grad_buf(logits);
    for (std::int64_t i = 0; i < lv.size(); ++i) {
      const double p = std::exp(lv[i] - mx) / z;
      gl[i] += g * (p - (i == label ? 1.0 : 0.0));
    }
  };
  return y;
}

Graph::Id Graph::weighted_sum(const std::vector<std::pair<Id, double>>& terms) {
  double s = 0.0;
  for (const auto& [id, c] : terms) {
    if (val(id).size() != 1) throw ConfigError("weighted_sum: terms must be scalars");
    s += c * val(id)[0];
  }
  const Id y = emplace(Tensor::scalar(s));
  if (!recording_) return y;
  nodes_[static_cast<size_t>(y)].back = [terms, y](Graph& gr) {
    const double g = gr.grad_buf(y)[0];
    for (const auto& [id, c] : terms) gr.grad_buf(id)[0] += g * c;
  };
  return y;
}

}  // namespace mdt
