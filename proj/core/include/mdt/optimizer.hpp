#pragma once

#include <vector>

#include "mdt/graph.hpp"

namespace mdt {

// Adaptive-moment optimizer. Moment buffers live inside each Param; the
// optimizer only carries hyperparameters and the step counter.
class Adam {
public:
  Adam(double beta1 = 0.5, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  // One update over p.grad for every param; skips requires_grad == false.
  void step(const std::vector<Param*>& params, double lr);

  long long steps() const { return t_; }
  void set_steps(long long t) { t_ = t; }
  double beta1() const { return beta1_; }
  double beta2() const { return beta2_; }
  double eps() const { return eps_; }

private:
  double beta1_, beta2_, eps_;
  long long t_ = 0;
};

}  // namespace mdt
