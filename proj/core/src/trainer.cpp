#include "mdt/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "mdt/errors.hpp"
#include "mdt/schedule.hpp"

namespace mdt {
namespace {

constexpr std::uint64_t kGenStream = 0x9e4;
constexpr std::uint64_t kDiscStream = 0xd15c;
constexpr std::uint64_t kBagStream = 0xba9;

const Tensor& bag_image(const MultiDomainDataset& ds, const UnpairedBag& bag, int domain) {
  return ds.domains[static_cast<size_t>(domain)]
      .images[static_cast<size_t>(bag.index_per_domain[static_cast<size_t>(domain)])];
}

// Translation targets whose adversarial term includes source i == target.
std::vector<int> adv_sources(int target, int n, bool identity_path) {
  std::vector<int> out;
  for (int i = 0; i < n; ++i)
    if (identity_path || i != target) out.push_back(i);
  return out;
}

std::vector<double> discriminator_phase(TrainState& st, const MultiDomainDataset& ds,
                                        const std::vector<UnpairedBag>& bags, double lr) {
  const int n = st.gen_cfg.num_domains;
  const double inv_b = 1.0 / static_cast<double>(bags.size());
  std::vector<double> adv_d(static_cast<size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    Discriminator& disc = st.discs[static_cast<size_t>(i)];
    const auto params = disc.params();
    for (Param* p : params) p->zero_grad();
    for (const auto& bag : bags) {
      Graph g;
      const Graph::Id loss = build_discriminator_objective(g, st, ds, bag, i);
      g.backward(g.weighted_sum({{loss, inv_b}}));
      adv_d[static_cast<size_t>(i)] += g.val(loss)[0] * inv_b;
    }
    st.opt_d[static_cast<size_t>(i)].step(params, lr);
  }
  return adv_d;
}

LossRecord generator_phase(TrainState& st, const MultiDomainDataset& ds,
                           const std::vector<UnpairedBag>& bags, double lr) {
  const int n = st.gen_cfg.num_domains;
  const double inv_b = 1.0 / static_cast<double>(bags.size());
  const LossWeights& w = st.train_cfg.weights;

  LossRecord out;
  out.adv_g.assign(static_cast<size_t>(n), 0.0);
  out.rec.assign(static_cast<size_t>(n), 0.0);
  out.idt.assign(static_cast<size_t>(n), 0.0);

  const auto params = st.gen.params();
  for (Param* p : params) p->zero_grad();

  for (const auto& bag : bags) {
    Graph g;
    const GeneratorObjective obj = build_generator_objective(g, st, ds, bag, inv_b);
    g.backward(obj.root);
    for (int j = 0; j < n; ++j)
      out.adv_g[static_cast<size_t>(j)] += g.val(obj.adv_g[static_cast<size_t>(j)])[0] * inv_b;
    for (int i = 0; i < n; ++i) {
      out.idt[static_cast<size_t>(i)] += g.val(obj.idt[static_cast<size_t>(i)])[0] * inv_b;
      for (const Graph::Id term : obj.rec_terms[static_cast<size_t>(i)])
        out.rec[static_cast<size_t>(i)] += g.val(term)[0] * inv_b;
    }
  }
  st.opt_g.step(params, lr);
  out.total_g = out.compute_total(w);
  return out;
}

}  // namespace

Graph::Id build_discriminator_objective(Graph& g, TrainState& st, const MultiDomainDataset& ds,
                                        const UnpairedBag& bag, int domain) {
  const int n = st.gen_cfg.num_domains;
  Discriminator& disc = st.discs[static_cast<size_t>(domain)];
  // Fakes are produced without generator gradients and enter as constants.
  const DiscOutIds real = disc.apply_ids(g, g.input(bag_image(ds, bag, domain)));
  std::vector<DiscOutIds> fake_outs;
  for (int j : adv_sources(domain, n, st.train_cfg.adv_identity_path)) {
    const Tensor fake = st.gen.translate(bag_image(ds, bag, j), domain);
    fake_outs.push_back(disc.apply_ids(g, g.input(fake)));
  }
  return adv_loss_d_ids(g, real, fake_outs);
}

GeneratorObjective build_generator_objective(Graph& g, TrainState& st,
                                             const MultiDomainDataset& ds, const UnpairedBag& bag,
                                             double root_scale) {
  const int n = st.gen_cfg.num_domains;
  const LossWeights& w = st.train_cfg.weights;
  GeneratorObjective obj;

  std::vector<Graph::Id> xin(static_cast<size_t>(n));
  std::vector<EncodedIds> enc(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    xin[static_cast<size_t>(i)] = g.input(bag_image(ds, bag, i));
    enc[static_cast<size_t>(i)] = st.gen.encode_ids(g, xin[static_cast<size_t>(i)]);
  }
  // trans[src][tgt] = G_tgt(x_src)
  std::vector<std::vector<Graph::Id>> trans(static_cast<size_t>(n),
                                            std::vector<Graph::Id>(static_cast<size_t>(n)));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      trans[static_cast<size_t>(i)][static_cast<size_t>(j)] =
          st.gen.decode_ids(g, j, enc[static_cast<size_t>(i)]);

  std::vector<std::pair<Graph::Id, double>> root_terms;
  for (int j = 0; j < n; ++j) {
    std::vector<DiscOutIds> fake_outs;
    for (int i : adv_sources(j, n, st.train_cfg.adv_identity_path))
      fake_outs.push_back(st.discs[static_cast<size_t>(j)].apply_ids(
          g, trans[static_cast<size_t>(i)][static_cast<size_t>(j)], /*frozen=*/true));
    const Graph::Id adv = adv_loss_g_ids(g, fake_outs);
    obj.adv_g.push_back(adv);
    root_terms.emplace_back(adv, root_scale);
  }
  obj.rec_terms.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const Graph::Id idt = g.l1_mean(trans[static_cast<size_t>(i)][static_cast<size_t>(i)],
                                    xin[static_cast<size_t>(i)]);
    obj.idt.push_back(idt);
    root_terms.emplace_back(idt, w.lambda_idt * root_scale);
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      // Eq.-4 semantics: recover x_i by sending G_j(x_i) through G_i.
      const EncodedIds enc2 =
          st.gen.encode_ids(g, trans[static_cast<size_t>(i)][static_cast<size_t>(j)]);
      const Graph::Id back = st.gen.decode_ids(g, i, enc2);
      const Graph::Id term = g.l1_mean(back, xin[static_cast<size_t>(i)]);
      obj.rec_terms[static_cast<size_t>(i)].push_back(term);
      root_terms.emplace_back(term, w.lambda_rec * root_scale);
    }
  }
  obj.root = g.weighted_sum(root_terms);
  return obj;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (lr0 <= 0.0) throw ConfigError("lr0 must be > 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (iterations_per_epoch < 0) throw ConfigError("iterations_per_epoch must be >= 0");
  weights.validate();
}

int resolve_iterations_per_epoch(const TrainConfig& cfg, const MultiDomainDataset& ds) {
  if (cfg.iterations_per_epoch > 0) return cfg.iterations_per_epoch;
  int mx = 0;
  for (const auto& d : ds.domains) mx = std::max(mx, d.size());
  return mx;
}

TrainState init_training(const MultiDomainDataset& dataset, const GeneratorConfig& gen_cfg,
                         const DiscriminatorConfig& disc_cfg, const TrainConfig& train_cfg) {
  gen_cfg.validate();
  disc_cfg.validate();
  train_cfg.validate();
  dataset.validate();
  if (dataset.num_domains() != gen_cfg.num_domains)
    throw ConfigError("dataset has " + std::to_string(dataset.num_domains()) +
                      " domains but the model is configured for " +
                      std::to_string(gen_cfg.num_domains));
  if (dataset.image_size != gen_cfg.image_size)
    throw ConfigError("dataset image size " + std::to_string(dataset.image_size) +
                      " != configured image size " + std::to_string(gen_cfg.image_size));

  TrainState st;
  st.gen_cfg = gen_cfg;
  st.disc_cfg = disc_cfg;
  st.train_cfg = train_cfg;
  st.gen = Generator::build(gen_cfg, mix_seed(train_cfg.seed, kGenStream));
  // One seed for every discriminator: initially identical, like the decoders.
  const std::uint64_t dseed = mix_seed(train_cfg.seed, kDiscStream);
  for (int d = 0; d < gen_cfg.num_domains; ++d) {
    st.discs.push_back(Discriminator::build(disc_cfg, dseed));
    st.opt_d.emplace_back(train_cfg.beta1, train_cfg.beta2);
  }
  st.opt_g = Adam(train_cfg.beta1, train_cfg.beta2);
  st.rng = Rng(mix_seed(train_cfg.seed, kBagStream));
  for (const auto& d : dataset.domains) st.domain_names.push_back(d.name);
  return st;
}

std::vector<double> discriminator_step(TrainState& st, const MultiDomainDataset& ds,
                                       const UnpairedBag& bag, double lr) {
  return discriminator_phase(st, ds, {bag}, lr);
}

LossRecord generator_step(TrainState& st, const MultiDomainDataset& ds, const UnpairedBag& bag,
                          double lr) {
  return generator_phase(st, ds, {bag}, lr);
}

void train(TrainState& st, const MultiDomainDataset& dataset, const TrainSinks& sinks,
           const std::function<std::string(TrainState&)>& halt_save) {
  dataset.validate();
  if (dataset.num_domains() != st.gen_cfg.num_domains)
    throw ConfigError("dataset/model domain count mismatch");
  const int iters = resolve_iterations_per_epoch(st.train_cfg, dataset);

  for (int epoch = st.next_epoch; epoch < st.train_cfg.epochs; ++epoch) {
    const double lr = lr_at_epoch(epoch, st.train_cfg);
    LossRecord mean;
    const int n = st.gen_cfg.num_domains;
    mean.adv_d.assign(static_cast<size_t>(n), 0.0);
    mean.adv_g.assign(static_cast<size_t>(n), 0.0);
    mean.rec.assign(static_cast<size_t>(n), 0.0);
    mean.idt.assign(static_cast<size_t>(n), 0.0);

    for (int it = 0; it < iters; ++it) {
      std::vector<UnpairedBag> bags;
      for (int b = 0; b < st.train_cfg.batch_size; ++b) bags.push_back(sample_bag(dataset, st.rng));
      std::vector<double> adv_d = discriminator_phase(st, dataset, bags, lr);
      LossRecord rec = generator_phase(st, dataset, bags, lr);
      rec.adv_d = std::move(adv_d);
      rec.iter = st.next_iter;
      rec.epoch = epoch;
      if (!rec.finite()) {
        std::string saved = halt_save ? halt_save(st) : std::string();
        throw TrainingHalted("non-finite loss at iteration " + std::to_string(rec.iter) +
                                 " (epoch " + std::to_string(epoch) + ")",
                             std::move(saved));
      }
      if (sinks.on_iteration) sinks.on_iteration(rec);
      for (int d = 0; d < n; ++d) {
        mean.adv_d[static_cast<size_t>(d)] += rec.adv_d[static_cast<size_t>(d)];
        mean.adv_g[static_cast<size_t>(d)] += rec.adv_g[static_cast<size_t>(d)];
        mean.rec[static_cast<size_t>(d)] += rec.rec[static_cast<size_t>(d)];
        mean.idt[static_cast<size_t>(d)] += rec.idt[static_cast<size_t>(d)];
      }
      ++st.next_iter;
    }
    const double inv = 1.0 / static_cast<double>(iters);
    for (int d = 0; d < n; ++d) {
      mean.adv_d[static_cast<size_t>(d)] *= inv;
      mean.adv_g[static_cast<size_t>(d)] *= inv;
      mean.rec[static_cast<size_t>(d)] *= inv;
      mean.idt[static_cast<size_t>(d)] *= inv;
    }
    mean.total_g = mean.compute_total(st.train_cfg.weights);
    mean.epoch = epoch;
    mean.iter = st.next_iter - 1;
    st.next_epoch = epoch + 1;
    if (sinks.on_epoch) sinks.on_epoch(epoch, mean, st);
  }
}

}  // namespace mdt
