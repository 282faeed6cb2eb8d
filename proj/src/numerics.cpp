#include "engine/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace engine {

Distribution Distribution::from(Vector p) {
  if (p.size() == 0) throw std::invalid_argument("Distribution: empty vector");
  double sum = 0.0;
  for (int i = 0; i < p.size(); ++i) {
    if (!(p[i] >= 0.0 && p[i] <= 1.0)) {
      throw std::invalid_argument("Distribution: entry outside [0,1]");
    }
    sum += p[i];
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("Distribution: entries do not sum to 1");
  }
  return Distribution{std::move(p)};
}

Distribution softmax(const Vector& logits) {
  if (logits.size() == 0) throw std::invalid_argument("softmax: empty vector");
  if (!logits.allFinite()) throw std::invalid_argument("softmax: non-finite logits");
  const double m = logits.maxCoeff();
  Vector e = (logits.array() - m).exp();
  e /= e.sum();
  return Distribution{std::move(e)};
}

double entropy(const Distribution& d) {
  double h = 0.0;
  for (int i = 0; i < d.probs.size(); ++i) {
    const double p = d.probs[i];
    if (p > 0.0) h -= p * std::log(p);
  }
  return std::max(h, 0.0);
}

double normalized_uncertainty(const Distribution& d) {
  if (d.size() <= 1) return 0.0;
  return entropy(d) / std::log(static_cast<double>(d.size()));
}

PcaModel pca_fit(const std::vector<Vector>& samples, int k) {
  if (samples.size() < 2) throw std::invalid_argument("pca_fit: need >= 2 samples");
  const int n = static_cast<int>(samples.size());
  const int d = static_cast<int>(samples[0].size());
  if (k < 1 || k > std::min(n, d)) {
    throw std::invalid_argument("pca_fit: k out of range");
  }
  Vector mean = Vector::Zero(d);
  for (const auto& x : samples) {
    if (x.size() != d) throw std::invalid_argument("pca_fit: inconsistent dims");
    mean += x;
  }
  mean /= n;

  Matrix cov = Matrix::Zero(d, d);
  for (const auto& x : samples) {
    Vector c = x - mean;
    cov.noalias() += c * c.transpose();
  }
  cov /= (n - 1);

  Eigen::SelfAdjointEigenSolver<Matrix> solver(cov);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("pca_fit: eigendecomposition failed");
  }
  // Eigen returns ascending eigenvalues; take the top k in descending order.
  PcaModel model;
  model.mean = mean;
  model.components = Matrix(k, d);
  model.explained_variance = Vector(k);
  for (int i = 0; i < k; ++i) {
    const int src = d - 1 - i;
    Vector axis = solver.eigenvectors().col(src);
    int imax = 0;
    axis.cwiseAbs().maxCoeff(&imax);
    if (axis[imax] < 0.0) axis = -axis;
    model.components.row(i) = axis.transpose();
    model.explained_variance[i] = std::max(solver.eigenvalues()[src], 0.0);
  }
  return model;
}

Vector pca_transform(const PcaModel& m, const Vector& x) {
  if (x.size() != m.input_dim()) {
    throw std::invalid_argument("pca_transform: dimension mismatch");
  }
  return m.components * (x - m.mean);
}

Vector pca_reconstruct(const PcaModel& m, const Vector& y) {
  if (y.size() != m.output_dim()) {
    throw std::invalid_argument("pca_reconstruct: dimension mismatch");
  }
  return m.mean + m.components.transpose() * y;
}

double Rng::uniform() {
  // 53-bit mantissa from the top bits of one 64-bit draw.
  return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::below(std::uint64_t n) {
  // Rejection sampling for an unbiased bounded draw.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = gen_();
  } while (x >= limit);
  return x % n;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

Matrix randn_init(int rows, int cols, double std, std::uint64_t seed) {
  Rng rng(seed);
  return randn(rng, rows, cols, std);
}

Matrix randn(Rng& rng, int rows, int cols, double std) {
  if (std <= 0.0) throw std::invalid_argument("randn: std must be positive");
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      m(i, j) = std * rng.normal();
    }
  }
  return m;
}

Vector randn_vec(Rng& rng, int dim, double std) {
  Matrix m = randn(rng, dim, 1, std);
  return m.col(0);
}

}  // namespace engine
