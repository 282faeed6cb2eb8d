#include "engine/heads.hpp"

#include <cmath>
#include <stdexcept>

namespace engine {

ProjectionParams ProjectionParams::zeros(int in_dim, int out_dim) {
  return ProjectionParams{Matrix::Zero(out_dim, in_dim), Vector::Zero(out_dim)};
}

ProjectionParams ProjectionParams::random(int in_dim, int out_dim, double std,
                                          Rng& rng) {
  return ProjectionParams{randn(rng, out_dim, in_dim, std),
                          Vector::Zero(out_dim)};
}

std::vector<Eigen::Map<Vector>> ProjectionParams::blocks() {
  return {Eigen::Map<Vector>(W_p.data(), W_p.size()),
          Eigen::Map<Vector>(b_p.data(), b_p.size())};
}

ClassifierHead ClassifierHead::zeros(int hidden_dim, int labels) {
  return ClassifierHead{Matrix::Zero(labels, hidden_dim), Vector::Zero(labels)};
}

ClassifierHead ClassifierHead::random(int hidden_dim, int labels, double std,
                                      Rng& rng) {
  return ClassifierHead{randn(rng, labels, hidden_dim, std),
                        Vector::Zero(labels)};
}

std::vector<Eigen::Map<Vector>> ClassifierHead::blocks() {
  return {Eigen::Map<Vector>(W_u.data(), W_u.size()),
          Eigen::Map<Vector>(b_u.data(), b_u.size())};
}

RegressorHead RegressorHead::zeros(int hidden_dim, int channels) {
  return RegressorHead{Matrix::Zero(channels, hidden_dim),
                       Vector::Zero(channels)};
}

RegressorHead RegressorHead::random(int hidden_dim, int channels, double std,
                                    Rng& rng) {
  return RegressorHead{randn(rng, channels, hidden_dim, std),
                       Vector::Zero(channels)};
}

std::vector<Eigen::Map<Vector>> RegressorHead::blocks() {
  return {Eigen::Map<Vector>(W_v.data(), W_v.size()),
          Eigen::Map<Vector>(b_v.data(), b_v.size())};
}

Vector project(const ProjectionParams& p, const Vector& x) {
  if (x.size() != p.W_p.cols()) {
    throw std::invalid_argument("project: dimension mismatch");
  }
  return p.W_p * x + p.b_p;
}

Distribution classify_frame(const ClassifierHead& head, const Vector& h) {
  if (h.size() != head.W_u.cols()) {
    throw std::invalid_argument("classify_frame: dimension mismatch");
  }
  return softmax(head.W_u * h + head.b_u);
}

int predict_label(const Distribution& d) {
  int best = 0;
  for (int i = 1; i < d.size(); ++i) {
    if (d.probs[i] > d.probs[best]) best = i;
  }
  return best;
}

double nll_loss(const std::vector<Distribution>& predictions,
                const std::vector<int>& labels) {
  if (predictions.size() != labels.size()) {
    throw std::invalid_argument("nll_loss: length mismatch");
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= predictions[i].size()) {
      throw std::invalid_argument("nll_loss: label out of range");
    }
    loss -= std::log(std::max(predictions[i].probs[labels[i]], 1e-300));
  }
  return loss;
}

Vector regress_forces(const RegressorHead& head, const Vector& h) {
  if (h.size() != head.W_v.cols()) {
    throw std::invalid_argument("regress_forces: dimension mismatch");
  }
  return head.W_v * h + head.b_v;
}

double l2_loss(const ForceTrace& pred, const ForceTrace& truth) {
  if (pred.values.rows() != truth.values.rows() ||
      pred.values.cols() != truth.values.cols()) {
    throw std::invalid_argument("l2_loss: shape mismatch");
  }
  return (pred.values - truth.values).squaredNorm();
}

}  // namespace engine
