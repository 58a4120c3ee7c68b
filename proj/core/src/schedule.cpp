#include "mdt/schedule.hpp"

#include "mdt/errors.hpp"
#include "mdt/trainer.hpp"

namespace mdt {

double lr_at_epoch(int epoch, const TrainConfig& cfg) {
  if (epoch < 0 || epoch > cfg.epochs)
    throw ConfigError("epoch " + std::to_string(epoch) + " outside [0," +
                      std::to_string(cfg.epochs) + "]");
  const double half = cfg.epochs / 2.0;
  if (epoch < half) return cfg.lr0;
  return cfg.lr0 * (1.0 - (epoch - half) / half);
}

}  // namespace mdt
