#pragma once

#include <string>
#include <vector>

#include "mdt/graph.hpp"
#include "mdt/model.hpp"

namespace mdt {

struct LossWeights {
  double lambda_rec = 10.0;
  double lambda_idt = 10.0;

  void validate() const;
};

// Per-iteration scalars. total_g is always the exact affine combination
// sum(adv_g) + lambda_rec*sum(rec) + lambda_idt*sum(idt).
struct LossRecord {
  long long iter = 0;
  int epoch = 0;
  std::vector<double> adv_d;  // per domain, discriminator side
  std::vector<double> adv_g;  // per domain, generator side
  std::vector<double> rec;    // per source domain
  std::vector<double> idt;    // per domain
  double total_g = 0.0;

  double compute_total(const LossWeights& w) const;
  bool finite() const;
  // One JSON line with flat keys: iter, epoch, adv_d.<i>, adv_g.<i>,
  // rec.<i>, idt.<i>, total_g.
  std::string to_json_line() const;
  static LossRecord from_json_line(const std::string& line);
};

// Probability clamp applied before logarithms.
inline constexpr double kBceEps = 1e-7;

// Dual-output BCE: patch map averaged over elements, then weighted 50/50 with
// the whole-image score.
double bce_dual(const DiscriminatorOutput& out, double target);

// real -> 1 plus mean over fakes of fake -> 0. Inputs must be detached from
// the generator when used for a discriminator update.
double adv_loss_d(const DiscriminatorOutput& real, const std::vector<DiscriminatorOutput>& fakes);
// Mean over fakes of fake -> 1.
double adv_loss_g(const std::vector<DiscriminatorOutput>& fakes);
// Sum over the N-1 recoveries of the mean absolute difference to the source.
double reconstruction_loss(const Tensor& x, const std::vector<Tensor>& recovered);
// Mean absolute difference between an image and its own-domain translation.
double identity_loss(const Tensor& x, const Tensor& self_translated);
double total_generator_loss(double adv_g_sum, double rec_sum, double idt_sum,
                            const LossWeights& w);

// Graph-node builders used inside the training step.
Graph::Id bce_dual_ids(Graph& g, const DiscOutIds& out, double target);
Graph::Id adv_loss_d_ids(Graph& g, const DiscOutIds& real, const std::vector<DiscOutIds>& fakes);
Graph::Id adv_loss_g_ids(Graph& g, const std::vector<DiscOutIds>& fakes);

}  // namespace mdt
