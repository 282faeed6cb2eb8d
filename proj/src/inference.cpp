#include "engine/inference.hpp"

#include <algorithm>
#include <stdexcept>

namespace engine {

Session::Session(const Model& model, int history_capacity)
    : model_(&model),
      state_(CellState::zeros(model.hidden_dim())),
      capacity_(std::max(history_capacity, 1)) {
  if (!model.classifier) {
    throw std::invalid_argument("Session: model has no classification head");
  }
}

FramePrediction Session::feed_frame(const Vector& x) {
  if (x.size() != model_->input_dim()) {
    throw std::invalid_argument("feed_frame: dimension mismatch");
  }
  const Vector projected = project(model_->projection, x);
  auto [next, record] = cell_step(model_->cell, state_, projected);
  state_ = std::move(next);
  ++frames_;

  FramePrediction out{classify_frame(*model_->classifier, state_.h), 0.0, 0};
  out.uncertainty = normalized_uncertainty(out.belief);
  out.label = predict_label(out.belief);

  recent_labels_.push_back(out.label);
  if (static_cast<int>(recent_labels_.size()) > capacity_) {
    recent_labels_.pop_front();
  }
  return out;
}

std::optional<int> Session::converged(int k) const {
  if (k < 1) throw std::invalid_argument("converged: k must be >= 1");
  if (frames_ < k || static_cast<int>(recent_labels_.size()) < k) {
    return std::nullopt;
  }
  const int candidate = recent_labels_.back();
  for (int i = 0; i < k; ++i) {
    if (recent_labels_[recent_labels_.size() - 1 - i] != candidate) {
      return std::nullopt;
    }
  }
  return candidate;
}

std::vector<FramePrediction> belief_trajectory(const Model& model,
                                               const FeatureSequence& xs) {
  if (xs.length() == 0) {
    throw std::invalid_argument("belief_trajectory: empty sequence");
  }
  Session session(model);
  std::vector<FramePrediction> out;
  out.reserve(xs.frames.size());
  for (const auto& x : xs.frames) out.push_back(session.feed_frame(x));
  return out;
}

SequenceClassification classify_sequence(const Model& model,
                                         const FeatureSequence& xs) {
  const auto trajectory = belief_trajectory(model, xs);
  const int t_len = static_cast<int>(trajectory.size());
  const int n = trajectory[0].belief.size();
  Vector avg = Vector::Zero(n);
  // weights t = 1..T, normalized by T(T+1)/2
  for (int t = 0; t < t_len; ++t) {
    avg += (t + 1) * trajectory[t].belief.probs;
  }
  avg /= 0.5 * t_len * (t_len + 1);
  avg /= avg.sum();  // guard against rounding drift
  Distribution d{std::move(avg)};
  return SequenceClassification{predict_label(d), std::move(d)};
}

ForceTrace estimate_forces(const Model& model, const FeatureSequence& xs) {
  if (!model.regressor) {
    throw std::invalid_argument("estimate_forces: model has no regression head");
  }
  if (xs.length() == 0) {
    throw std::invalid_argument("estimate_forces: empty sequence");
  }
  ForceTrace trace;
  trace.channels = model.channel_names;
  trace.normalized = true;
  trace.values = Matrix(xs.length(), model.regressor->channel_count());

  CellState state = CellState::zeros(model.hidden_dim());
  for (int t = 0; t < xs.length(); ++t) {
    const Vector projected = project(model.projection, xs.frames[t]);
    auto [next, record] = cell_step(model.cell, state, projected);
    state = std::move(next);
    const Vector v = regress_forces(*model.regressor, state.h);
    for (Eigen::Index ch = 0; ch < v.size(); ++ch) {
      trace.values(t, ch) = std::clamp(v[ch], 0.0, 1.0);
    }
  }
  return trace;
}

void write_trajectory(std::ostream& os,
                      const std::vector<FramePrediction>& trajectory) {
  for (std::size_t t = 0; t < trajectory.size(); ++t) {
    os << t;
    const auto& p = trajectory[t];
    for (int i = 0; i < p.belief.size(); ++i) os << "," << p.belief.probs[i];
    os << "," << p.uncertainty << "," << p.label << "\n";
  }
}

}  // namespace engine
