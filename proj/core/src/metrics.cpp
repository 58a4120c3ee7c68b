#include "mdt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <memory>
#include <numeric>

#include <Eigen/Dense>

#include "mdt/errors.hpp"
#include "mdt/rng.hpp"

namespace mdt {
namespace {

void check_same_embedder(const FeatureSet& a, const FeatureSet& b, const char* op) {
  if (a.embedder_id != b.embedder_id)
    throw ConfigError(std::string(op) + ": feature sets come from different embedders ('" +
                      a.embedder_id + "' vs '" + b.embedder_id + "')");
  if (a.dim != b.dim) throw ConfigError(std::string(op) + ": feature dimension mismatch");
}

// 11x11 Gaussian window, sigma 1.5, normalized to sum 1 (1-D; the 2-D window
// is the separable product).
constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr double kSsimC1 = 4.0e-4;    // (0.01 * 2)^2
constexpr double kSsimC2 = 3.6e-3;    // (0.03 * 2)^2

std::vector<double> ssim_window_1d() {
  std::vector<double> w(kSsimWindow);
  double sum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - (kSsimWindow - 1) / 2.0;
    w[static_cast<size_t>(i)] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    sum += w[static_cast<size_t>(i)];
  }
  for (double& v : w) v /= sum;
  return w;
}

// Valid-mode separable correlation with the 1-D window along both axes.
void blur_valid(const double* src, int h, int w, const std::vector<double>& win, double* dst) {
  const int k = static_cast<int>(win.size());
  const int oh = h - k + 1, ow = w - k + 1;
  std::vector<double> tmp(static_cast<size_t>(h) * ow);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < k; ++i) s += win[static_cast<size_t>(i)] * src[y * w + x + i];
      tmp[static_cast<size_t>(y) * ow + x] = s;
    }
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < k; ++i) s += win[static_cast<size_t>(i)] * tmp[static_cast<size_t>(y + i) * ow + x];
      dst[y * ow + x] = s;
    }
}

std::uint64_t fnv1a(const unsigned char* bytes, size_t len, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (size_t i = 0; i < len; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

double poly_kernel(const double* u, const double* v, int d) {
  double dot = 0.0;
  for (int i = 0; i < d; ++i) dot += u[i] * v[i];
  const double base = dot / d + 1.0;
  return base * base * base;
}

// Unbiased squared-MMD estimate over two equally sized index subsets.
double mmd2_unbiased(const FeatureSet& a, const std::vector<int>& ia, const FeatureSet& b,
                     const std::vector<int>& ib) {
  const int m = static_cast<int>(ia.size());
  const int n = static_cast<int>(ib.size());
  double kaa = 0.0, kbb = 0.0, kab = 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      if (i != j) kaa += poly_kernel(a.row(ia[static_cast<size_t>(i)]), a.row(ia[static_cast<size_t>(j)]), a.dim);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) kbb += poly_kernel(b.row(ib[static_cast<size_t>(i)]), b.row(ib[static_cast<size_t>(j)]), b.dim);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      kab += poly_kernel(a.row(ia[static_cast<size_t>(i)]), b.row(ib[static_cast<size_t>(j)]), a.dim);
  return kaa / (static_cast<double>(m) * (m - 1)) + kbb / (static_cast<double>(n) * (n - 1)) -
         2.0 * kab / (static_cast<double>(m) * n);
}

std::vector<int> draw_subset(int total, int count, Rng& rng) {
  std::vector<int> idx(static_cast<size_t>(total));
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < count; ++i) {
    const int j = i + rng.uniform_int(total - i);
    std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
  }
  idx.resize(static_cast<size_t>(count));
  return idx;
}

}  // namespace

Embedder random_projection_embedder(int channels, int image_size, int dim, std::uint64_t seed) {
  const std::int64_t in = static_cast<std::int64_t>(channels) * image_size * image_size;
  auto matrix = std::make_shared<std::vector<double>>(static_cast<size_t>(in * dim));
  Rng rng(seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(in));
  for (double& v : *matrix) v = rng.normal(0.0, scale);
  Embedder e;
  e.id = "rproj-d" + std::to_string(dim) + "-s" + std::to_string(seed);
  e.dim = dim;
  e.fn = [matrix, in, dim](const Tensor& img) {
    if (img.size() != in) throw DataError("random projection embedder: unexpected image shape");
    std::vector<double> out(static_cast<size_t>(dim), 0.0);
    for (std::int64_t i = 0; i < in; ++i) {
      const double x = img[i];
      if (x == 0.0) continue;
      const double* row = matrix->data() + i * dim;
      for (int j = 0; j < dim; ++j) out[static_cast<size_t>(j)] += x * row[j];
    }
    return out;
  };
  return e;
}

FeatureSet embed(const std::vector<Tensor>& images, const Embedder& embedder) {
  FeatureSet fs;
  fs.rows = static_cast<int>(images.size());
  fs.dim = embedder.dim;
  fs.embedder_id = embedder.id;
  fs.data.resize(static_cast<size_t>(fs.rows) * fs.dim);
  for (int i = 0; i < fs.rows; ++i) {
    const std::vector<double> f = embedder.fn(images[static_cast<size_t>(i)]);
    if (static_cast<int>(f.size()) != fs.dim) throw ConfigError("embedder dimension mismatch");
    std::copy(f.begin(), f.end(), fs.row(i));
  }
  return fs;
}

double ssim(const Tensor& x, const Tensor& y) {
  if (!x.same_shape(y))
    throw DataError("ssim: shape mismatch " + shape_str(x.shape()) + " vs " + shape_str(y.shape()));
  if (x.rank() != 3) throw DataError("ssim: expected (C,H,W)");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (h < kSsimWindow || w < kSsimWindow)
    throw DataError("ssim: image smaller than the 11x11 window");
  static const std::vector<double> win = ssim_window_1d();
  const int oh = h - kSsimWindow + 1, ow = w - kSsimWindow + 1;
  const std::int64_t plane = static_cast<std::int64_t>(h) * w;
  const std::int64_t oplane = static_cast<std::int64_t>(oh) * ow;

  std::vector<double> mx(static_cast<size_t>(oplane)), my(static_cast<size_t>(oplane)),
      mxx(static_cast<size_t>(oplane)), myy(static_cast<size_t>(oplane)),
      mxy(static_cast<size_t>(oplane));
  std::vector<double> xx(static_cast<size_t>(plane)), yy(static_cast<size_t>(plane)),
      xy(static_cast<size_t>(plane));
  double total = 0.0;
  for (int ch = 0; ch < c; ++ch) {
    const double* xs = x.data() + ch * plane;
    const double* ys = y.data() + ch * plane;
    for (std::int64_t i = 0; i < plane; ++i) {
      xx[static_cast<size_t>(i)] = xs[i] * xs[i];
      yy[static_cast<size_t>(i)] = ys[i] * ys[i];
      xy[static_cast<size_t>(i)] = xs[i] * ys[i];
    }
    blur_valid(xs, h, w, win, mx.data());
    blur_valid(ys, h, w, win, my.data());
    blur_valid(xx.data(), h, w, win, mxx.data());
    blur_valid(yy.data(), h, w, win, myy.data());
    blur_valid(xy.data(), h, w, win, mxy.data());
    double acc = 0.0;
    for (std::int64_t i = 0; i < oplane; ++i) {
      const double ux = mx[static_cast<size_t>(i)], uy = my[static_cast<size_t>(i)];
      const double vx = mxx[static_cast<size_t>(i)] - ux * ux;
      const double vy = myy[static_cast<size_t>(i)] - uy * uy;
      const double cov = mxy[static_cast<size_t>(i)] - ux * uy;
      // Denominators as numerator + non-negative gap: ux^2+uy^2 = 2*ux*uy +
      // (ux-uy)^2 and vx+vy = 2*cov + (vx+vy-2*cov). Identical inputs then
      // give a ratio of exactly one.
      const double dmu = ux - uy;
      const double l_num = 2.0 * ux * uy + kSsimC1;
      const double s_num = 2.0 * cov + kSsimC2;
      acc += (l_num / (l_num + dmu * dmu)) * (s_num / (s_num + (vx + vy - 2.0 * cov)));
    }
    total += acc / static_cast<double>(oplane);
  }
  return total / c;
}

double fid(const FeatureSet& a, const FeatureSet& b) {
  check_same_embedder(a, b, "fid");
  if (a.rows < 2 || b.rows < 2) throw ConfigError("fid: need at least 2 rows per set");
  const int d = a.dim;
  using Mat = Eigen::MatrixXd;
  using Vec = Eigen::VectorXd;

  auto moments = [d](const FeatureSet& fs, Vec& mu, Mat& sigma) {
    Eigen::Map<const Mat> rows(fs.data.data(), d, fs.rows);  // column-major: col = row of fs
    mu = rows.rowwise().mean();
    Mat centered = rows.colwise() - mu;
    sigma = centered * centered.transpose() / static_cast<double>(fs.rows - 1);
    sigma.diagonal().array() += 1e-6;
  };
  Vec mu_a, mu_b;
  Mat sa, sb;
  moments(a, mu_a, sa);
  moments(b, mu_b, sb);

  Eigen::SelfAdjointEigenSolver<Mat> es_a(sa);
  Vec ev = es_a.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  Mat sqrt_a = es_a.eigenvectors() * ev.asDiagonal() * es_a.eigenvectors().transpose();
  Mat inner = sqrt_a * sb * sqrt_a;
  inner = 0.5 * (inner + inner.transpose());  // symmetrize against round-off
  Eigen::SelfAdjointEigenSolver<Mat> es_i(inner);
  const double tr_sqrt = es_i.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();

  const double mean_term = (mu_a - mu_b).squaredNorm();
  return mean_term + sa.trace() + sb.trace() - 2.0 * tr_sqrt;
}

KidResult kid(const FeatureSet& a_in, const FeatureSet& b_in, int block_size, int blocks,
              std::uint64_t seed) {
  check_same_embedder(a_in, b_in, "kid");
  // Canonical argument order makes kid(a,b) == kid(b,a) for the same seed.
  auto content_key = [](const FeatureSet& f) {
    std::uint64_t h = fnv1a(reinterpret_cast<const unsigned char*>(f.data.data()),
                            f.data.size() * sizeof(double));
    return std::pair<int, std::uint64_t>(f.rows, h);
  };
  const bool swap = content_key(b_in) < content_key(a_in);
  const FeatureSet& a = swap ? b_in : a_in;
  const FeatureSet& b = swap ? a_in : b_in;

  const int bs = std::min({block_size, a.rows, b.rows});
  if (bs < 2) throw ConfigError("kid: need at least 2 rows per block");
  if (blocks < 1) throw ConfigError("kid: blocks must be >= 1");

  std::vector<double> estimates(static_cast<size_t>(blocks));
  for (int t = 0; t < blocks; ++t) {
    Rng ra(mix_seed(seed, 2 * static_cast<std::uint64_t>(t)));
    Rng rb(mix_seed(seed, 2 * static_cast<std::uint64_t>(t) + 1));
    const std::vector<int> ia = draw_subset(a.rows, bs, ra);
    const std::vector<int> ib = draw_subset(b.rows, bs, rb);
    estimates[static_cast<size_t>(t)] = mmd2_unbiased(a, ia, b, ib);
  }
  KidResult r;
  for (double e : estimates) r.mean += e;
  r.mean /= blocks;
  if (blocks > 1) {
    double ss = 0.0;
    for (double e : estimates) ss += (e - r.mean) * (e - r.mean);
    r.stddev = std::sqrt(ss / (blocks - 1));
  }
  return r;
}

double cosine_distance(const double* u, const double* v, int dim) {
  double nu = 0.0, nv = 0.0;
  for (int i = 0; i < dim; ++i) {
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  nu = std::sqrt(nu);
  nv = std::sqrt(nv);
  if (nu == 0.0 || nv == 0.0) throw DataError("cosine_distance: zero-norm feature vector");
  double s = 0.0;
  for (int i = 0; i < dim; ++i) {
    const double d = u[i] / nu - v[i] / nv;
    s += d * d;
  }
  return 0.5 * s;
}

double cosine_feature_distance(const FeatureSet& real, const FeatureSet& fake,
                               const std::vector<int>& pairing) {
  check_same_embedder(real, fake, "cosine_feature_distance");
  if (static_cast<int>(pairing.size()) != fake.rows)
    throw ConfigError("cosine_feature_distance: pairing size mismatch");
  double s = 0.0;
  int n = 0;
  for (int i = 0; i < fake.rows; ++i) {
    const int j = pairing[static_cast<size_t>(i)];
    if (j < 0 || j >= real.rows) throw ConfigError("cosine_feature_distance: pairing out of range");
    try {
      s += cosine_distance(fake.row(i), real.row(j), fake.dim);
      ++n;
    } catch (const DataError&) {
      std::cerr << "warning: skipping zero-norm feature pair " << i << "\n";
    }
  }
  if (n == 0) throw DataError("cosine_feature_distance: no valid pairs");
  return s / n;
}

double diversity_score(const std::vector<FeatureSet>& outputs) {
  if (outputs.size() < 2) throw ConfigError("diversity_score: need at least 2 target domains");
  const int rows = outputs.front().rows;
  for (const auto& f : outputs) {
    check_same_embedder(outputs.front(), f, "diversity_score");
    if (f.rows != rows) throw ConfigError("diversity_score: mismatched translation counts");
  }
  if (rows == 0) throw ConfigError("diversity_score: empty feature sets");
  double total = 0.0;
  int terms = 0;
  for (int k = 0; k < rows; ++k)
    for (size_t a = 0; a < outputs.size(); ++a)
      for (size_t b = a + 1; b < outputs.size(); ++b) {
        total += cosine_distance(outputs[a].row(k), outputs[b].row(k), outputs[a].dim);
        ++terms;
      }
  return total / terms;
}

IqaCurve iqa_curve(const std::vector<double>& values, std::vector<double> thresholds) {
  if (values.empty()) throw ConfigError("iqa_curve: no values");
  if (!std::is_sorted(thresholds.begin(), thresholds.end()))
    throw ConfigError("iqa_curve: thresholds must be ascending");
  IqaCurve c;
  c.thresholds = std::move(thresholds);
  c.fractions.reserve(c.thresholds.size());
  for (double t : c.thresholds) {
    std::int64_t count = 0;
    for (double v : values)
      if (v > t) ++count;
    c.fractions.push_back(static_cast<double>(count) / static_cast<double>(values.size()));
  }
  return c;
}

}  // namespace mdt
