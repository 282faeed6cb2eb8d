#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <vector>

namespace engine {

// Dense double-precision, row-major to match the on-disk layouts.
using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Probability distribution over a finite label set.
/// Invariants: entries in [0,1], sum to 1 within 1e-9.
struct Distribution {
  Vector probs;

  int size() const { return static_cast<int>(probs.size()); }

  /// Validates the invariants; throws std::invalid_argument on violation.
  static Distribution from(Vector p);
};

/// Numerically stable softmax (max-subtraction).
Distribution softmax(const Vector& logits);

/// Shannon entropy in nats, with 0*ln(0) := 0. Result in [0, ln N].
double entropy(const Distribution& d);

/// entropy(d) / ln(N); 1 at uniform, 0 at one-hot. Defined as 0 for N = 1.
double normalized_uncertainty(const Distribution& d);

/// Principal component model: k orthonormal axes over a d-dimensional space.
struct PcaModel {
  Vector mean;                // length d
  Matrix components;          // k x d, orthonormal rows, descending variance
  Vector explained_variance;  // length k

  int input_dim() const { return static_cast<int>(mean.size()); }
  int output_dim() const { return static_cast<int>(components.rows()); }
};

/// Fits PCA by eigendecomposition of the sample covariance.
/// Sign convention: the largest-magnitude entry of each component is positive.
PcaModel pca_fit(const std::vector<Vector>& samples, int k);

/// components * (x - mean).
Vector pca_transform(const PcaModel& m, const Vector& x);

/// Reconstruction from PCA coordinates: mean + components^T * y.
Vector pca_reconstruct(const PcaModel& m, const Vector& y);

/// Deterministic pseudo-random source. Uniform variates come from a
/// mersenne-twister (mt19937_64); normal variates via Box-Muller on top of
/// it, so streams are bit-reproducible for a fixed seed on any platform
/// with IEEE-754 doubles.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  /// Uniform in [0, 1).
  double uniform();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  /// Standard normal.
  double normal();

  /// Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[static_cast<std::size_t>(below(i))]);
    }
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Matrix with i.i.d. normal(0, std) entries, filled in row-major order.
Matrix randn_init(int rows, int cols, double std, std::uint64_t seed);

/// Same stream, drawn through an existing generator.
Matrix randn(Rng& rng, int rows, int cols, double std);
Vector randn_vec(Rng& rng, int dim, double std);

}  // namespace engine
