#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mdt/tensor.hpp"

namespace mdt {

// M x D feature matrix, one row per image. Feature sets are only comparable
// when produced by the same embedder.
struct FeatureSet {
  int rows = 0;
  int dim = 0;
  std::vector<double> data;
  std::string embedder_id;

  double* row(int i) { return data.data() + static_cast<std::int64_t>(i) * dim; }
  const double* row(int i) const { return data.data() + static_cast<std::int64_t>(i) * dim; }
};

// Deterministic image -> feature map with a fixed output dimension.
struct Embedder {
  std::string id;
  int dim = 0;
  std::function<std::vector<double>(const Tensor&)> fn;
};

// Fixed Gaussian random projection of the flattened image; available before
// any classifier has been trained.
Embedder random_projection_embedder(int channels, int image_size, int dim, std::uint64_t seed);

FeatureSet embed(const std::vector<Tensor>& images, const Embedder& embedder);

// Windowed structural similarity: 11x11 Gaussian window (sigma 1.5),
// K1=0.01, K2=0.03, dynamic range 2 (data in [-1,1]); averaged over valid
// window positions and channels. Symmetric, ssim(x,x) == 1.
double ssim(const Tensor& x, const Tensor& y);

// Frechet distance between Gaussians fitted to the rows:
// |mu_a - mu_b|^2 + Tr(Sa + Sb - 2 (Sa Sb)^{1/2}). Covariances are unbiased
// and regularized by 1e-6 I; negative sqrt eigenvalues clamp to zero.
double fid(const FeatureSet& a, const FeatureSet& b);

struct KidResult {
  double mean = 0.0;
  double stddev = 0.0;
};

// Unbiased squared MMD with kernel (u.v/D + 1)^3, averaged over `blocks`
// random subsets of `block_size` rows. Deterministic in seed and symmetric:
// kid(a,b,..seed) == kid(b,a,..seed).
KidResult kid(const FeatureSet& a, const FeatureSet& b, int block_size = 50, int blocks = 100,
              std::uint64_t seed = 0);

// 1 - cos(u,v), computed as 0.5*|u/|u| - v/|v||^2 so identical vectors give
// exactly zero. Range [0,2].
double cosine_distance(const double* u, const double* v, int dim);

// Mean cosine distance over pairs; pairing[i] is the real row matching fake
// row i. Zero-norm rows are skipped with a warning.
double cosine_feature_distance(const FeatureSet& real, const FeatureSet& fake,
                               const std::vector<int>& pairing);

// Collapse indicator: mean over inputs of the mean pairwise cosine distance
// between the same input's translations into different domains.
// outputs[d].row(k) embeds translation of input k into domain d.
double diversity_score(const std::vector<FeatureSet>& outputs);

struct IqaCurve {
  std::vector<double> thresholds;
  std::vector<double> fractions;  // strictly-greater exceedance, non-increasing
};

IqaCurve iqa_curve(const std::vector<double>& values, std::vector<double> thresholds);

}  // namespace mdt
