#pragma once

#include <cstdint>

#include "rsdazzle/classifier.hpp"
#include "rsdazzle/dataset.hpp"

namespace rsdazzle {

struct TrainConfig {
  std::uint64_t seed = 11;
  int epochs = 12;
  int batch_size = 16;
  double learning_rate = 1e-3;
  double accuracy_bar = 0.95;
  int conv1_channels = 8;
  int conv2_channels = 16;
  int hidden_units = 64;
};

struct TrainResult {
  CnnModel model;
  double holdout_accuracy = 0.0;
  bool reached_bar = false;
  double final_train_loss = 0.0;
};

// Deterministic training of the bundled classifier on the synthetic dataset:
// fixed (seed, epochs) reproduces identical weights bit for bit. Runs single
// threaded. With epochs == 0 the initial weights are returned unchanged.
TrainResult train_bundled(const DatasetSpec& dataset, const TrainConfig& config);

double holdout_accuracy(CnnModel& model, const std::vector<Sample>& samples);

}  // namespace rsdazzle
