#pragma once

#include <vector>

#include "engine/force_signal.hpp"
#include "engine/numerics.hpp"

namespace engine {

/// Learnable linear map from raw features to the recurrent input space.
struct ProjectionParams {
  Matrix W_p;  // n_out x n_in
  Vector b_p;  // n_out

  static ProjectionParams zeros(int in_dim, int out_dim);
  static ProjectionParams random(int in_dim, int out_dim, double std, Rng& rng);

  std::vector<Eigen::Map<Vector>> blocks();
};

/// Softmax classification head over N action labels.
struct ClassifierHead {
  Matrix W_u;  // N x n
  Vector b_u;  // N

  int label_count() const { return static_cast<int>(b_u.size()); }

  static ClassifierHead zeros(int hidden_dim, int labels);
  static ClassifierHead random(int hidden_dim, int labels, double std, Rng& rng);

  std::vector<Eigen::Map<Vector>> blocks();
};

/// Affine force regression head over M channels, no output nonlinearity.
struct RegressorHead {
  Matrix W_v;  // M x n
  Vector b_v;  // M

  int channel_count() const { return static_cast<int>(b_v.size()); }

  static RegressorHead zeros(int hidden_dim, int channels);
  static RegressorHead random(int hidden_dim, int channels, double std, Rng& rng);

  std::vector<Eigen::Map<Vector>> blocks();
};

Vector project(const ProjectionParams& p, const Vector& x);

Distribution classify_frame(const ClassifierHead& head, const Vector& h);

/// Argmax with ties broken to the lowest index.
int predict_label(const Distribution& d);

/// Sum over frames of -ln p(true label).
double nll_loss(const std::vector<Distribution>& predictions,
                const std::vector<int>& labels);

Vector regress_forces(const RegressorHead& head, const Vector& h);

/// Sum over frames of the squared L2 residual.
double l2_loss(const ForceTrace& pred, const ForceTrace& truth);

}  // namespace engine
