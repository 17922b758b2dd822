#pragma once

#include <cstdint>
#include <vector>

#include "ablate/dataset.hpp"
#include "ablate/network.hpp"

namespace ablate {

struct TrainConfig {
  int epochs = 12;
  int batch_size = 32;
  float learning_rate = 0.05f;
  float momentum = 0.9f;
  std::uint64_t seed = 1;
};

struct EpochRecord {
  int epoch = 0;           // 1-based
  double mean_loss = 0;    // row-weighted mean over the epoch's batches
  double train_accuracy = 0;  // eval-mode top-1 on the training set
};

// Minibatch SGD with momentum, serial and bit-reproducible for a fixed
// seed: one stream drives the per-epoch shuffle and then the dropout draws
// of each batch, in that order. A trailing softmax layer is folded into the
// cross-entropy loss. Throws RuntimeError if the loss turns non-finite.
std::vector<EpochRecord> train(Network& net, const Dataset& data, const TrainConfig& cfg);

}  // namespace ablate
