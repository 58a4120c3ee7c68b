#pragma once

namespace mdt {

struct TrainConfig;

// Constant lr0 for the first half of the epochs, then linear decay to zero:
// lr(epoch) = lr0                                  for epoch < epochs/2
//           = lr0 * (1 - (epoch - epochs/2)/(epochs/2))  otherwise.
// epoch must lie in [0, epochs]; lr(epochs) == 0.
double lr_at_epoch(int epoch, const TrainConfig& cfg);

}  // namespace mdt
