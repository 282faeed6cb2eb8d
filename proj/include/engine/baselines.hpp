#pragma once

#include <string>
#include <vector>

#include "engine/dataset.hpp"
#include "engine/numerics.hpp"

namespace engine {

/// Per-class hidden Markov model with one diagonal Gaussian per state.
struct GaussianHmm {
  Vector initial;   // S
  Matrix transition;  // S x S, rows are distributions
  Matrix means;     // S x d
  Matrix variances;  // S x d, floored at 1e-6

  int states() const { return static_cast<int>(initial.size()); }
  int dim() const { return static_cast<int>(means.cols()); }
};

struct HmmFitOptions {
  int states = 5;
  std::uint64_t seed = 0;
  int max_iterations = 100;
  double tolerance = 1e-4;  // stop when log-likelihood gain drops below
};

/// Baum-Welch over all sequences of one class, from a seeded k-means style
/// initialization. Per-iteration total log-likelihoods are returned for
/// monotonicity checks.
std::pair<GaussianHmm, std::vector<double>> hmm_fit(
    const std::vector<std::vector<Vector>>& sequences,
    const HmmFitOptions& options);

/// Scaled forward algorithm; finite for any input.
double hmm_log_likelihood(const GaussianHmm& hmm,
                          const std::vector<Vector>& xs);

/// Label of the per-class model with highest log-likelihood, ties to the
/// lowest index.
int hmm_classify(const std::vector<GaussianHmm>& models,
                 const std::vector<Vector>& xs);

/// PCA + sliding-window linear classifier with majority voting.
struct WindowClassifier {
  int window = 36;
  int stride = 1;
  PcaModel pca;
  Matrix weights;  // C x k
  Vector bias;     // C

  int label_count() const { return static_cast<int>(bias.size()); }
};

struct WindowFitOptions {
  int window = 36;
  int stride = 1;
  int pca_dim = 128;
  int epochs = 50;
  double rate = 0.1;
  double regularization = 1e-4;
  std::uint64_t seed = 0;
};

/// One-vs-rest hinge loss by subgradient descent over window summaries
/// (mean of PCA-projected frames per window).
WindowClassifier window_fit(const std::vector<FeatureSequence>& data,
                            int label_count, const WindowFitOptions& options);

/// Per-window linear decisions combined by majority vote, ties to the
/// lowest index. A sequence shorter than the window yields one window
/// spanning the whole sequence.
int window_classify(const WindowClassifier& c, const std::vector<Vector>& xs);

/// Per-window labels, exposed for vote-rule tests.
std::vector<int> window_votes(const WindowClassifier& c,
                              const std::vector<Vector>& xs);

/// Majority vote with lowest-index tie break.
int majority_vote(const std::vector<int>& votes, int label_count);

// Baseline serialization shares the model container envelope with
// distinct type tags.
void save_hmm_bank(const std::string& path,
                   const std::vector<GaussianHmm>& models,
                   const std::vector<std::string>& label_names);
std::pair<std::vector<GaussianHmm>, std::vector<std::string>> load_hmm_bank(
    const std::string& path);

void save_window_classifier(const std::string& path,
                            const WindowClassifier& c,
                            const std::vector<std::string>& label_names);
std::pair<WindowClassifier, std::vector<std::string>> load_window_classifier(
    const std::string& path);

}  // namespace engine
