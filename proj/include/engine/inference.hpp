#pragma once

#include <deque>
#include <optional>
#include <ostream>

#include "engine/dataset.hpp"
#include "engine/model.hpp"

namespace engine {

struct FramePrediction {
  Distribution belief;
  double uncertainty;  // entropy / ln N, in [0,1]
  int label;
};

/// Streaming inference over one sequence. Memory is O(hidden + history);
/// the caller owns any trajectory log. Single-owner: one session must not
/// be driven from two execution contexts at once.
class Session {
 public:
  explicit Session(const Model& model, int history_capacity = 64);

  /// Advances the state by one projected frame and classifies it.
  FramePrediction feed_frame(const Vector& x);

  /// The common label of the last k frames, if the prediction has stayed
  /// the same that long; empty otherwise.
  std::optional<int> converged(int k) const;

  int frames_fed() const { return frames_; }
  const CellState& state() const { return state_; }

 private:
  const Model* model_;
  CellState state_;
  int frames_ = 0;
  int capacity_;
  std::deque<int> recent_labels_;
};

struct SequenceClassification {
  int label;
  Distribution average;
};

/// Whole-sequence decision: linearly weighted average of the per-frame
/// beliefs, weight t+1 on frame t, largest at the last frame.
SequenceClassification classify_sequence(const Model& model,
                                         const FeatureSequence& xs);

/// Per-frame belief trajectory of a whole sequence (offline evaluation).
std::vector<FramePrediction> belief_trajectory(const Model& model,
                                               const FeatureSequence& xs);

/// Streamed force estimates, clamped to [0,1] for reporting.
ForceTrace estimate_forces(const Model& model, const FeatureSequence& xs);

/// Line-delimited export: frame index, N probabilities, uncertainty, label.
void write_trajectory(std::ostream& os,
                      const std::vector<FramePrediction>& trajectory);

}  // namespace engine
