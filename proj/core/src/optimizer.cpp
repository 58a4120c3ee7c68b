#include "mdt/optimizer.hpp"

#include <cmath>

namespace mdt {

void Adam::step(const std::vector<Param*>& params, double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (Param* p : params) {
    if (!p->requires_grad) continue;
    const std::int64_t n = p->value.size();
    for (std::int64_t i = 0; i < n; ++i) {
      const double g = p->grad[i];
      p->m[i] = beta1_ * p->m[i] + (1.0 - beta1_) * g;
      p->v[i] = beta2_ * p->v[i] + (1.0 - beta2_) * g * g;
      const double mhat = p->m[i] / bc1;
      const double vhat = p->v[i] / bc2;
      p->value[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

}  // namespace mdt
