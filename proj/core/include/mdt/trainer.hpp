#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mdt/data.hpp"
#include "mdt/losses.hpp"
#include "mdt/model.hpp"
#include "mdt/optimizer.hpp"
#include "mdt/rng.hpp"

namespace mdt {

struct TrainConfig {
  int epochs = 200;
  double lr0 = 0.0002;
  double beta1 = 0.5;
  double beta2 = 0.999;
  int batch_size = 1;
  LossWeights weights;
  std::uint64_t seed = 0;
  // 0 = auto: the size of the largest domain.
  int iterations_per_epoch = 0;
  // Whether the own-domain translation G_i(x_i) also feeds D_i as a fake in
  // both update phases.
  bool adv_identity_path = true;

  void validate() const;
};

// Everything a run owns: models, optimizer state, bag-sampling RNG, progress
// counters. A checkpoint is this struct made durable.
struct TrainState {
  GeneratorConfig gen_cfg;
  DiscriminatorConfig disc_cfg;
  TrainConfig train_cfg;
  Generator gen;
  std::vector<Discriminator> discs;
  Adam opt_g;
  std::vector<Adam> opt_d;
  Rng rng;
  int next_epoch = 0;
  long long next_iter = 0;
  std::vector<std::string> domain_names;
};

struct TrainSinks {
  std::function<void(const LossRecord&)> on_iteration;
  // Called after each epoch with the mean record of that epoch.
  std::function<void(int epoch, const LossRecord& mean, TrainState& state)> on_epoch;
};

TrainState init_training(const MultiDomainDataset& dataset, const GeneratorConfig& gen_cfg,
                         const DiscriminatorConfig& disc_cfg, const TrainConfig& train_cfg);

// The generator objective over one bag, assembled on g. root carries
// coefficient `root_scale` on every term (1/batch_size when accumulating).
struct GeneratorObjective {
  Graph::Id root;
  std::vector<Graph::Id> adv_g;                   // per target domain
  std::vector<Graph::Id> idt;                     // per domain
  std::vector<std::vector<Graph::Id>> rec_terms;  // [source][j != source]
};
GeneratorObjective build_generator_objective(Graph& g, TrainState& st,
                                             const MultiDomainDataset& ds, const UnpairedBag& bag,
                                             double root_scale = 1.0);

// The BCE objective of one discriminator over one bag; fakes are detached.
Graph::Id build_discriminator_objective(Graph& g, TrainState& st, const MultiDomainDataset& ds,
                                        const UnpairedBag& bag, int domain);

// One discriminator phase over a bag: every D_i updated once against its real
// image and the current fakes; generator untouched. Returns per-domain adv_d.
std::vector<double> discriminator_step(TrainState& st, const MultiDomainDataset& ds,
                                       const UnpairedBag& bag, double lr);

// One bundled generator update (encoder + all decoders in a single backward
// pass); discriminators are frozen. Fills adv_g/rec/idt/total of the record.
LossRecord generator_step(TrainState& st, const MultiDomainDataset& ds, const UnpairedBag& bag,
                          double lr);

// Runs the remaining epochs of st (from st.next_epoch to train_cfg.epochs).
// Throws TrainingHalted on a non-finite loss after invoking halt_save.
void train(TrainState& st, const MultiDomainDataset& dataset, const TrainSinks& sinks,
           const std::function<std::string(TrainState&)>& halt_save = nullptr);

int resolve_iterations_per_epoch(const TrainConfig& cfg, const MultiDomainDataset& ds);

}  // namespace mdt
