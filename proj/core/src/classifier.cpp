#include "mdt/classifier.hpp"

#include <algorithm>
#include <numeric>

#include "mdt/errors.hpp"
#include "mdt/graph.hpp"
#include "mdt/optimizer.hpp"
#include "mdt/rng.hpp"

namespace mdt {
namespace {

Tensor gaussian(std::vector<int> shape, Rng& rng, double std) {
  Tensor t(std::move(shape));
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.normal(0.0, std);
  return t;
}

}  // namespace

void ClassifierConfig::validate() const {
  if (num_domains < 2) throw ConfigError("classifier needs at least 2 domains");
  if (image_size % 8 != 0) throw ConfigError("classifier image_size must be divisible by 8");
  if (base_channels < 1 || epochs < 1 || batch_size < 1 || lr <= 0.0)
    throw ConfigError("invalid classifier config");
}

struct DomainClassifier::Net {
  Param w1, b1, w2, w3;   // stride-2 convs
  Param wl, bl;           // linear head

  struct Out {
    Graph::Id features;
    Graph::Id logits;
  };

  Out forward(Graph& g, Graph::Id x, double slope, bool frozen) {
    auto p = [&g, frozen](Param& q) { return frozen ? g.frozen(q) : g.param(q); };
    Graph::Id h = g.conv2d(x, p(w1), p(b1), 2, 1);
    h = g.leaky_relu(h, slope);
    h = g.conv2d(h, p(w2), -1, 2, 1);
    h = g.instance_norm(h);
    h = g.leaky_relu(h, slope);
    h = g.conv2d(h, p(w3), -1, 2, 1);
    h = g.instance_norm(h);
    h = g.leaky_relu(h, slope);
    const Graph::Id feats = g.channel_mean(h);
    return {feats, g.linear(feats, p(wl), p(bl))};
  }
};

DomainClassifier DomainClassifier::build(const ClassifierConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  DomainClassifier c;
  c.cfg_ = cfg;
  c.net_ = std::make_shared<Net>();
  Rng rng(seed);
  const int b = cfg.base_channels;
  c.net_->w1 = Param("clf.conv1.w", gaussian({b, cfg.in_channels, 4, 4}, rng, 0.02));
  c.net_->b1 = Param("clf.conv1.b", Tensor({b}));
  c.net_->w2 = Param("clf.conv2.w", gaussian({2 * b, b, 4, 4}, rng, 0.02));
  c.net_->w3 = Param("clf.conv3.w", gaussian({4 * b, 2 * b, 4, 4}, rng, 0.02));
  c.net_->wl = Param("clf.head.w", gaussian({cfg.num_domains, 4 * b}, rng, 0.05));
  c.net_->bl = Param("clf.head.b", Tensor({cfg.num_domains}));
  c.id_ = "clf-b" + std::to_string(b) + "-e" + std::to_string(cfg.epochs) + "-s" +
          std::to_string(cfg.seed);
  return c;
}

std::vector<double> DomainClassifier::logits(const Tensor& image) const {
  Graph g(false);
  const auto out = net_->forward(g, g.input(image), 0.2, true);
  const Tensor& t = g.val(out.logits);
  return std::vector<double>(t.data(), t.data() + t.size());
}

int DomainClassifier::predict(const Tensor& image) const {
  const auto l = logits(image);
  return static_cast<int>(std::max_element(l.begin(), l.end()) - l.begin());
}

std::vector<double> DomainClassifier::features(const Tensor& image) const {
  Graph g(false);
  const auto out = net_->forward(g, g.input(image), 0.2, true);
  const Tensor& t = g.val(out.features);
  return std::vector<double>(t.data(), t.data() + t.size());
}

Embedder DomainClassifier::embedder() const {
  Embedder e;
  e.id = id_;
  e.dim = feature_dim();
  auto self = *this;  // shares net_
  e.fn = [self](const Tensor& img) { return self.features(img); };
  return e;
}

std::vector<Param*> DomainClassifier::params() {
  return {&net_->w1, &net_->b1, &net_->w2, &net_->w3, &net_->wl, &net_->bl};
}

DomainClassifier train_domain_classifier(const MultiDomainDataset& train,
                                         const ClassifierConfig& cfg_in) {
  ClassifierConfig cfg = cfg_in;
  cfg.num_domains = train.num_domains();
  cfg.image_size = train.image_size;
  cfg.validate();
  train.validate();

  DomainClassifier clf = DomainClassifier::build(cfg, mix_seed(cfg.seed, 0xc1a55));
  const auto params = clf.params();
  Adam opt(0.9, 0.999);
  Rng shuffle_rng(mix_seed(cfg.seed, 0x5852));

  std::vector<std::pair<int, int>> samples;  // (domain, index)
  for (int d = 0; d < train.num_domains(); ++d)
    for (int i = 0; i < train.domains[static_cast<size_t>(d)].size(); ++i)
      samples.emplace_back(d, i);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fisher-Yates with the run RNG keeps the order reproducible.
    for (size_t i = samples.size(); i > 1; --i)
      std::swap(samples[i - 1], samples[static_cast<size_t>(shuffle_rng.uniform_int(static_cast<int>(i)))]);
    for (size_t pos = 0; pos < samples.size(); pos += static_cast<size_t>(cfg.batch_size)) {
      const size_t end = std::min(samples.size(), pos + static_cast<size_t>(cfg.batch_size));
      for (Param* p : params) p->zero_grad();
      const double inv = 1.0 / static_cast<double>(end - pos);
      for (size_t s = pos; s < end; ++s) {
        const auto [dom, idx] = samples[s];
        Graph g;
        const auto out = clf.net_->forward(
            g, g.input(train.domains[static_cast<size_t>(dom)].images[static_cast<size_t>(idx)]),
            0.2, false);
        const Graph::Id loss = g.softmax_cross_entropy(out.logits, dom);
        g.backward(g.weighted_sum({{loss, inv}}));
      }
      opt.step(params, cfg.lr);
    }
  }
  return clf;
}

double classification_accuracy(const DomainClassifier& clf, const std::vector<Tensor>& images,
                               const std::vector<int>& targets) {
  if (images.empty()) throw ConfigError("classification_accuracy: no images");
  if (images.size() != targets.size())
    throw ConfigError("classification_accuracy: image/label count mismatch");
  std::int64_t hits = 0;
  for (size_t i = 0; i < images.size(); ++i)
    if (clf.predict(images[i]) == targets[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(images.size());
}

}  // namespace mdt
