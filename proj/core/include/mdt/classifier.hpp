#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "mdt/data.hpp"
#include "mdt/metrics.hpp"
#include "mdt/model.hpp"

namespace mdt {

struct ClassifierConfig {
  int image_size = 64;
  int num_domains = 2;
  int in_channels = 3;
  int base_channels = 16;
  int epochs = 12;
  int batch_size = 16;
  double lr = 1e-3;
  std::uint64_t seed = 0;

  void validate() const;
};

// Small from-scratch domain classifier: three stride-2 conv stages, global
// average pooling, one linear head. Its pooled features are the default
// embedder for the feature-space metrics.
class DomainClassifier {
public:
  static DomainClassifier build(const ClassifierConfig& cfg, std::uint64_t seed);

  const ClassifierConfig& config() const { return cfg_; }
  int feature_dim() const { return 4 * cfg_.base_channels; }

  std::vector<double> logits(const Tensor& image) const;
  int predict(const Tensor& image) const;
  std::vector<double> features(const Tensor& image) const;

  // Pooled-feature embedder; id encodes the training configuration.
  Embedder embedder() const;

  std::vector<Param*> params();

private:
  friend DomainClassifier train_domain_classifier(const MultiDomainDataset&,
                                                  const ClassifierConfig&);
  struct Net;
  ClassifierConfig cfg_;
  std::shared_ptr<Net> net_;
  std::string id_;
};

// Trains on the real images of `train` (domain index = label), deterministic
// for a fixed config seed.
DomainClassifier train_domain_classifier(const MultiDomainDataset& train,
                                         const ClassifierConfig& cfg);

double classification_accuracy(const DomainClassifier& clf, const std::vector<Tensor>& images,
                               const std::vector<int>& targets);

}  // namespace mdt
