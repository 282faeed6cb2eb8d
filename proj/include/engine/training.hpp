#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "engine/dataset.hpp"
#include "engine/model.hpp"

namespace engine {

struct TrainConfig {
  int batch_size = 10;
  int epochs = 100;
  double base_rate = 0.01;
  double init_std = 0.01;
  double clip_norm = 5.0;
  double forget_bias = 0.0;
  std::uint64_t seed = 0;
  std::optional<int> truncation;  // BPTT horizon; full when unset
  int hidden_dim = 64;
  int projection_dim = 0;  // 0 means same as hidden_dim
  std::string log_path;    // per-epoch records written here when nonempty

  static TrainConfig classification_defaults();  // hidden 64
  static TrainConfig regression_defaults();      // hidden 128
};

struct EpochRecord {
  int epoch;
  double loss;    // training loss, summed over frames
  double metric;  // held-out accuracy (classification) or MAE (regression)
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
};

void write_train_log(const std::string& path, const TrainLog& log);

/// Raised when the training loss becomes non-finite; no parameters are
/// written past this point.
struct TrainingDiverged : std::runtime_error {
  explicit TrainingDiverged(int epoch_);
  int epoch;
};

/// Per-parameter adaptive learning rate: accumulate squared gradients and
/// scale each step by 1/(sqrt(accumulator) + 1e-8).
struct OptimizerState {
  std::vector<Vector> accumulators;
  long steps = 0;

  static OptimizerState zeros_like(const std::vector<Eigen::Map<Vector>>& blocks);
};

/// One update over matching parameter/gradient block lists.
void adaptive_update(std::vector<Eigen::Map<Vector>> params,
                     const std::vector<Eigen::Map<Vector>>& grads,
                     OptimizerState& state, double base_rate);

/// Minibatch training of projection + cell + softmax head with the
/// summed per-frame negative log-likelihood. Deterministic per seed.
std::pair<Model, TrainLog> train_classifier(
    const std::vector<FeatureSequence>& data,
    const std::vector<std::string>& label_names, const TrainConfig& cfg,
    const std::vector<FeatureSequence>* validation = nullptr);

/// Same loop with the affine force head and summed squared-error loss.
/// Force targets must already be normalized to [0,1].
std::pair<Model, TrainLog> train_regressor(
    const std::vector<FeatureSequence>& data,
    const std::vector<ForceTrace>& forces, const TrainConfig& cfg,
    const std::vector<FeatureSequence>* validation = nullptr,
    const std::vector<ForceTrace>* validation_forces = nullptr);

}  // namespace engine
