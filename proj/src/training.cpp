#include "engine/training.hpp"

#include <cmath>
#include <numeric>

#include "engine/inference.hpp"
#include "engine/io.hpp"

namespace engine {

TrainConfig TrainConfig::classification_defaults() {
  TrainConfig cfg;
  cfg.hidden_dim = 64;
  return cfg;
}

TrainConfig TrainConfig::regression_defaults() {
  TrainConfig cfg;
  cfg.hidden_dim = 128;
  return cfg;
}

TrainingDiverged::TrainingDiverged(int epoch_)
    : std::runtime_error("training diverged (non-finite loss) at epoch " +
                         std::to_string(epoch_)),
      epoch(epoch_) {}

void write_train_log(const std::string& path, const TrainLog& log) {
  io::AtomicFile file(path);
  auto& os = file.stream();
  os << "epoch,loss,metric\n";
  for (const auto& e : log.epochs) {
    os << e.epoch << "," << e.loss << "," << e.metric << "\n";
  }
  file.commit();
}

OptimizerState OptimizerState::zeros_like(
    const std::vector<Eigen::Map<Vector>>& blocks) {
  OptimizerState state;
  for (const auto& b : blocks) {
    state.accumulators.push_back(Vector::Zero(b.size()));
  }
  return state;
}

void adaptive_update(std::vector<Eigen::Map<Vector>> params,
                     const std::vector<Eigen::Map<Vector>>& grads,
                     OptimizerState& state, double base_rate) {
  if (params.size() != grads.size() ||
      params.size() != state.accumulators.size()) {
    throw std::invalid_argument("adaptive_update: block count mismatch");
  }
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].size() != grads[b].size()) {
      throw std::invalid_argument("adaptive_update: shape mismatch");
    }
    state.accumulators[b].array() += grads[b].array().square();
    params[b].array() -=
        base_rate * grads[b].array() /
        (state.accumulators[b].array().sqrt() + 1e-8);
  }
  ++state.steps;
}

namespace {

std::vector<Eigen::Map<Vector>> all_blocks(Model& m) {
  std::vector<Eigen::Map<Vector>> out;
  for (auto& b : m.projection.blocks()) out.push_back(b);
  for (auto& b : m.cell.blocks()) out.push_back(b);
  if (m.classifier) {
    for (auto& b : m.classifier->blocks()) out.push_back(b);
  }
  if (m.regressor) {
    for (auto& b : m.regressor->blocks()) out.push_back(b);
  }
  return out;
}

Model zeros_like(const Model& m) {
  Model g;
  g.projection = ProjectionParams::zeros(
      static_cast<int>(m.projection.W_p.cols()),
      static_cast<int>(m.projection.W_p.rows()));
  g.cell = CellParams::zeros(m.cell.input_dim, m.cell.hidden_dim);
  if (m.classifier) {
    g.classifier =
        ClassifierHead::zeros(m.hidden_dim(), m.classifier->label_count());
  }
  if (m.regressor) {
    g.regressor =
        RegressorHead::zeros(m.hidden_dim(), m.regressor->channel_count());
  }
  return g;
}

// Forward + backward for one sequence against the NLL loss; accumulates
// parameter gradients and returns the sequence loss.
double accumulate_classifier(const Model& m, const FeatureSequence& seq,
                             const TrainConfig& cfg, Model& grad) {
  const int t_len = seq.length();
  std::vector<Vector> projected;
  projected.reserve(t_len);
  for (const auto& x : seq.frames) projected.push_back(project(m.projection, x));
  const ForwardTape tape = forward_sequence(m.cell, projected);

  const ClassifierHead& head = *m.classifier;
  double loss = 0.0;
  std::vector<Vector> dh(t_len);
  for (int t = 0; t < t_len; ++t) {
    const Distribution p = classify_frame(head, tape.hidden(t));
    loss -= std::log(std::max(p.probs[seq.label], 1e-300));
    Vector dlogit = p.probs;
    dlogit[seq.label] -= 1.0;
    grad.classifier->W_u.noalias() += dlogit * tape.hidden(t).transpose();
    grad.classifier->b_u += dlogit;
    dh[t] = head.W_u.transpose() * dlogit;
  }

  BackwardResult back = backward_sequence(m.cell, tape, dh, cfg.truncation);
  auto cell_grad = grad.cell.blocks();
  auto seq_grad = back.grads.blocks();
  for (std::size_t b = 0; b < cell_grad.size(); ++b) cell_grad[b] += seq_grad[b];
  for (int t = 0; t < t_len; ++t) {
    grad.projection.W_p.noalias() += back.dx[t] * seq.frames[t].transpose();
    grad.projection.b_p += back.dx[t];
  }
  return loss;
}

double accumulate_regressor(const Model& m, const FeatureSequence& seq,
                            const ForceTrace& target, const TrainConfig& cfg,
                            Model& grad) {
  const int t_len = seq.length();
  std::vector<Vector> projected;
  projected.reserve(t_len);
  for (const auto& x : seq.frames) projected.push_back(project(m.projection, x));
  const ForwardTape tape = forward_sequence(m.cell, projected);

  const RegressorHead& head = *m.regressor;
  double loss = 0.0;
  std::vector<Vector> dh(t_len);
  for (int t = 0; t < t_len; ++t) {
    const Vector pred = regress_forces(head, tape.hidden(t));
    const Vector residual = pred - target.values.row(t).transpose();
    loss += residual.squaredNorm();
    const Vector dv = 2.0 * residual;
    grad.regressor->W_v.noalias() += dv * tape.hidden(t).transpose();
    grad.regressor->b_v += dv;
    dh[t] = head.W_v.transpose() * dv;
  }

  BackwardResult back = backward_sequence(m.cell, tape, dh, cfg.truncation);
  auto cell_grad = grad.cell.blocks();
  auto seq_grad = back.grads.blocks();
  for (std::size_t b = 0; b < cell_grad.size(); ++b) cell_grad[b] += seq_grad[b];
  for (int t = 0; t < t_len; ++t) {
    grad.projection.W_p.noalias() += back.dx[t] * seq.frames[t].transpose();
    grad.projection.b_p += back.dx[t];
  }
  return loss;
}

Model init_model(const TrainConfig& cfg, int input_dim, int labels,
                 int channels, Rng& rng) {
  const int proj_dim =
      cfg.projection_dim > 0 ? cfg.projection_dim : cfg.hidden_dim;
  Model m;
  m.projection = ProjectionParams::random(input_dim, proj_dim, cfg.init_std, rng);
  m.cell = CellParams::random(proj_dim, cfg.hidden_dim, cfg.init_std, rng,
                              cfg.forget_bias);
  if (labels > 0) {
    m.classifier =
        ClassifierHead::random(cfg.hidden_dim, labels, cfg.init_std, rng);
  }
  if (channels > 0) {
    m.regressor =
        RegressorHead::random(cfg.hidden_dim, channels, cfg.init_std, rng);
  }
  return m;
}

double classification_metric(const Model& m,
                             const std::vector<FeatureSequence>& data) {
  if (data.empty()) return 0.0;
  int correct = 0;
  for (const auto& seq : data) {
    if (classify_sequence(m, seq).label == seq.label) ++correct;
  }
  return static_cast<double>(correct) / data.size();
}

double regression_metric(const Model& m,
                         const std::vector<FeatureSequence>& data,
                         const std::vector<ForceTrace>& forces) {
  if (data.empty()) return 0.0;
  double abs_sum = 0.0;
  long count = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const ForceTrace pred = estimate_forces(m, data[i]);
    abs_sum += (pred.values - forces[i].values).cwiseAbs().sum();
    count += pred.values.size();
  }
  return abs_sum / count;
}

}  // namespace

std::pair<Model, TrainLog> train_classifier(
    const std::vector<FeatureSequence>& data,
    const std::vector<std::string>& label_names, const TrainConfig& cfg,
    const std::vector<FeatureSequence>* validation) {
  if (data.empty()) throw std::invalid_argument("train_classifier: no data");
  const int n_labels = static_cast<int>(label_names.size());
  int distinct = 0;
  std::vector<bool> seen(n_labels, false);
  for (const auto& seq : data) {
    if (seq.length() == 0) {
      throw std::invalid_argument("train_classifier: empty sequence");
    }
    if (seq.label < 0 || seq.label >= n_labels) {
      throw std::invalid_argument("train_classifier: label out of range");
    }
    if (!seen[seq.label]) {
      seen[seq.label] = true;
      ++distinct;
    }
  }
  if (distinct < 2) {
    throw std::invalid_argument("train_classifier: need >= 2 classes present");
  }

  Rng rng(cfg.seed);
  Model model = init_model(cfg, data[0].dim(), n_labels, 0, rng);
  model.label_names = label_names;
  auto params = all_blocks(model);
  OptimizerState opt = OptimizerState::zeros_like(params);

  std::vector<int> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  TrainLog log;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += cfg.batch_size) {
      Model grad = zeros_like(model);
      const std::size_t end =
          std::min(order.size(), start + cfg.batch_size);
      double batch_loss = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        batch_loss += accumulate_classifier(model, data[order[i]], cfg, grad);
      }
      if (!std::isfinite(batch_loss)) throw TrainingDiverged(epoch);
      auto grads = all_blocks(grad);
      clip_by_global_norm(grads, cfg.clip_norm);
      adaptive_update(params, grads, opt, cfg.base_rate);
      epoch_loss += batch_loss;
    }
    const double metric =
        classification_metric(model, validation ? *validation : data);
    log.epochs.push_back({epoch, epoch_loss, metric});
  }
  if (!cfg.log_path.empty()) write_train_log(cfg.log_path, log);
  return {std::move(model), std::move(log)};
}

std::pair<Model, TrainLog> train_regressor(
    const std::vector<FeatureSequence>& data,
    const std::vector<ForceTrace>& forces, const TrainConfig& cfg,
    const std::vector<FeatureSequence>* validation,
    const std::vector<ForceTrace>* validation_forces) {
  if (data.empty()) throw std::invalid_argument("train_regressor: no data");
  if (data.size() != forces.size()) {
    throw std::invalid_argument("train_regressor: feature/force count mismatch");
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data[i].length() != forces[i].frames()) {
      throw std::invalid_argument(
          "train_regressor: frame count mismatch in sequence " +
          std::to_string(i));
    }
  }
  const int channels = forces[0].channel_count();

  Rng rng(cfg.seed);
  Model model = init_model(cfg, data[0].dim(), 0, channels, rng);
  model.channel_names = forces[0].channels;
  auto params = all_blocks(model);
  OptimizerState opt = OptimizerState::zeros_like(params);

  std::vector<int> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  TrainLog log;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += cfg.batch_size) {
      Model grad = zeros_like(model);
      const std::size_t end =
          std::min(order.size(), start + cfg.batch_size);
      double batch_loss = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        batch_loss += accumulate_regressor(model, data[order[i]],
                                           forces[order[i]], cfg, grad);
      }
      if (!std::isfinite(batch_loss)) throw TrainingDiverged(epoch);
      auto grads = all_blocks(grad);
      clip_by_global_norm(grads, cfg.clip_norm);
      adaptive_update(params, grads, opt, cfg.base_rate);
      epoch_loss += batch_loss;
    }
    const double metric = regression_metric(
        model, validation ? *validation : data,
        validation_forces ? *validation_forces : forces);
    log.epochs.push_back({epoch, epoch_loss, metric});
  }
  if (!cfg.log_path.empty()) write_train_log(cfg.log_path, log);
  return {std::move(model), std::move(log)};
}

}  // namespace engine
