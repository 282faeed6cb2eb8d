#include "engine/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include "engine/io.hpp"
#include "engine/model.hpp"

namespace engine {

namespace {

constexpr double kVarianceFloor = 1e-6;

// Log density of a diagonal Gaussian per state: T x S matrix.
Matrix log_emissions(const GaussianHmm& hmm, const std::vector<Vector>& xs) {
  const int t_len = static_cast<int>(xs.size());
  const int s_cnt = hmm.states();
  const int d = hmm.dim();
  Matrix logb(t_len, s_cnt);
  for (int s = 0; s < s_cnt; ++s) {
    double log_norm = 0.0;
    for (int j = 0; j < d; ++j) {
      log_norm += std::log(2.0 * std::numbers::pi * hmm.variances(s, j));
    }
    for (int t = 0; t < t_len; ++t) {
      double quad = 0.0;
      for (int j = 0; j < d; ++j) {
        const double diff = xs[t][j] - hmm.means(s, j);
        quad += diff * diff / hmm.variances(s, j);
      }
      logb(t, s) = -0.5 * (log_norm + quad);
    }
  }
  return logb;
}

struct ForwardBackward {
  Matrix alpha, beta, gamma;  // T x S, scaled
  Vector scale;               // T
  Vector shift;               // per-frame max log emission
  double log_likelihood;
};

ForwardBackward forward_backward(const GaussianHmm& hmm, const Matrix& logb) {
  const int t_len = static_cast<int>(logb.rows());
  const int s_cnt = static_cast<int>(logb.cols());
  ForwardBackward fb;
  fb.alpha = Matrix(t_len, s_cnt);
  fb.beta = Matrix(t_len, s_cnt);
  fb.gamma = Matrix(t_len, s_cnt);
  fb.scale = Vector(t_len);
  fb.shift = Vector(t_len);

  Matrix bhat(t_len, s_cnt);
  for (int t = 0; t < t_len; ++t) {
    fb.shift[t] = logb.row(t).maxCoeff();
    bhat.row(t) = (logb.row(t).array() - fb.shift[t]).exp();
  }

  fb.alpha.row(0) = hmm.initial.transpose().cwiseProduct(bhat.row(0));
  fb.scale[0] = fb.alpha.row(0).sum();
  fb.alpha.row(0) /= fb.scale[0];
  for (int t = 1; t < t_len; ++t) {
    fb.alpha.row(t) =
        (fb.alpha.row(t - 1) * hmm.transition).cwiseProduct(bhat.row(t));
    fb.scale[t] = fb.alpha.row(t).sum();
    fb.alpha.row(t) /= fb.scale[t];
  }

  fb.beta.row(t_len - 1).setOnes();
  for (int t = t_len - 2; t >= 0; --t) {
    const auto weighted =
        bhat.row(t + 1).cwiseProduct(fb.beta.row(t + 1)) / fb.scale[t + 1];
    fb.beta.row(t) = weighted * hmm.transition.transpose();
  }

  for (int t = 0; t < t_len; ++t) {
    fb.gamma.row(t) = fb.alpha.row(t).cwiseProduct(fb.beta.row(t));
    fb.gamma.row(t) /= fb.gamma.row(t).sum();
  }

  fb.log_likelihood = 0.0;
  for (int t = 0; t < t_len; ++t) {
    fb.log_likelihood += std::log(fb.scale[t]) + fb.shift[t];
  }
  return fb;
}

// Seeded k-means over all frames for initial state means.
Matrix kmeans_means(const std::vector<std::vector<Vector>>& sequences, int s_cnt,
                    int d, Rng& rng) {
  std::vector<const Vector*> frames;
  for (const auto& seq : sequences) {
    for (const auto& x : seq) frames.push_back(&x);
  }
  Matrix centers(s_cnt, d);
  for (int s = 0; s < s_cnt; ++s) {
    centers.row(s) = frames[rng.below(frames.size())]->transpose();
  }
  std::vector<int> assign(frames.size(), 0);
  for (int iter = 0; iter < 10; ++iter) {
    for (std::size_t i = 0; i < frames.size(); ++i) {
      double best = std::numeric_limits<double>::max();
      for (int s = 0; s < s_cnt; ++s) {
        const double dist =
            (frames[i]->transpose() - centers.row(s)).squaredNorm();
        if (dist < best) {
          best = dist;
          assign[i] = s;
        }
      }
    }
    Matrix sums = Matrix::Zero(s_cnt, d);
    std::vector<int> counts(s_cnt, 0);
    for (std::size_t i = 0; i < frames.size(); ++i) {
      sums.row(assign[i]) += frames[i]->transpose();
      ++counts[assign[i]];
    }
    for (int s = 0; s < s_cnt; ++s) {
      if (counts[s] > 0) centers.row(s) = sums.row(s) / counts[s];
    }
  }
  return centers;
}

}  // namespace

std::pair<GaussianHmm, std::vector<double>> hmm_fit(
    const std::vector<std::vector<Vector>>& sequences,
    const HmmFitOptions& options) {
  if (sequences.empty()) throw std::invalid_argument("hmm_fit: no sequences");
  const int s_cnt = options.states;
  const int d = static_cast<int>(sequences[0][0].size());
  for (const auto& seq : sequences) {
    if (static_cast<int>(seq.size()) < s_cnt) {
      throw std::invalid_argument("hmm_fit: sequence shorter than state count");
    }
  }

  Rng rng(options.seed);
  GaussianHmm hmm;
  hmm.initial = Vector::Constant(s_cnt, 1.0 / s_cnt);
  hmm.transition = Matrix::Constant(s_cnt, s_cnt,
                                    s_cnt > 1 ? 0.4 / (s_cnt - 1) : 0.0);
  for (int s = 0; s < s_cnt; ++s) {
    hmm.transition(s, s) = s_cnt > 1 ? 0.6 : 1.0;
  }
  hmm.means = kmeans_means(sequences, s_cnt, d, rng);

  Vector global_var = Vector::Zero(d);
  Vector global_mean = Vector::Zero(d);
  long total_frames = 0;
  for (const auto& seq : sequences) {
    for (const auto& x : seq) {
      global_mean += x;
      ++total_frames;
    }
  }
  global_mean /= total_frames;
  for (const auto& seq : sequences) {
    for (const auto& x : seq) {
      global_var += (x - global_mean).cwiseAbs2();
    }
  }
  global_var /= total_frames;
  hmm.variances = Matrix(s_cnt, d);
  for (int s = 0; s < s_cnt; ++s) {
    hmm.variances.row(s) =
        global_var.transpose().cwiseMax(kVarianceFloor);
  }

  std::vector<double> loglik_trace;
  double previous = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    Vector pi_acc = Vector::Zero(s_cnt);
    Matrix xi_acc = Matrix::Zero(s_cnt, s_cnt);
    Matrix mean_acc = Matrix::Zero(s_cnt, d);
    Matrix sq_acc = Matrix::Zero(s_cnt, d);
    Vector gamma_acc = Vector::Zero(s_cnt);
    double loglik = 0.0;

    for (const auto& seq : sequences) {
      const Matrix logb = log_emissions(hmm, seq);
      const ForwardBackward fb = forward_backward(hmm, logb);
      loglik += fb.log_likelihood;
      const int t_len = static_cast<int>(seq.size());

      pi_acc += fb.gamma.row(0).transpose();
      Matrix bhat(t_len, s_cnt);
      for (int t = 0; t < t_len; ++t) {
        bhat.row(t) = (logb.row(t).array() - fb.shift[t]).exp();
      }
      for (int t = 0; t + 1 < t_len; ++t) {
        Matrix xi = (fb.alpha.row(t).transpose() *
                     bhat.row(t + 1).cwiseProduct(fb.beta.row(t + 1)))
                        .cwiseProduct(hmm.transition) /
                    fb.scale[t + 1];
        xi_acc += xi;
      }
      for (int t = 0; t < t_len; ++t) {
        for (int s = 0; s < s_cnt; ++s) {
          const double g = fb.gamma(t, s);
          gamma_acc[s] += g;
          mean_acc.row(s) += g * seq[t].transpose();
          sq_acc.row(s) += g * seq[t].cwiseAbs2().transpose();
        }
      }
    }

    loglik_trace.push_back(loglik);

    hmm.initial = pi_acc / pi_acc.sum();
    for (int s = 0; s < s_cnt; ++s) {
      const double row_sum = xi_acc.row(s).sum();
      if (row_sum > 0.0) {
        hmm.transition.row(s) = xi_acc.row(s) / row_sum;
      }
      if (gamma_acc[s] > 0.0) {
        hmm.means.row(s) = mean_acc.row(s) / gamma_acc[s];
        hmm.variances.row(s) =
            (sq_acc.row(s) / gamma_acc[s] - hmm.means.row(s).cwiseAbs2())
                .cwiseMax(kVarianceFloor);
      }
    }

    if (loglik - previous < options.tolerance && iter > 0) break;
    previous = loglik;
  }
  return {std::move(hmm), std::move(loglik_trace)};
}

double hmm_log_likelihood(const GaussianHmm& hmm,
                          const std::vector<Vector>& xs) {
  if (xs.empty()) throw std::invalid_argument("hmm_log_likelihood: empty sequence");
  if (static_cast<int>(xs[0].size()) != hmm.dim()) {
    throw std::invalid_argument("hmm_log_likelihood: dimension mismatch");
  }
  return forward_backward(hmm, log_emissions(hmm, xs)).log_likelihood;
}

int hmm_classify(const std::vector<GaussianHmm>& models,
                 const std::vector<Vector>& xs) {
  if (models.empty()) throw std::invalid_argument("hmm_classify: no models");
  int best = 0;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < models.size(); ++c) {
    const double ll = hmm_log_likelihood(models[c], xs);
    if (ll > best_ll) {
      best_ll = ll;
      best = static_cast<int>(c);
    }
  }
  return best;
}

namespace {

std::vector<Vector> window_summaries(const PcaModel& pca, int window,
                                     int stride,
                                     const std::vector<Vector>& xs) {
  std::vector<Vector> projected;
  projected.reserve(xs.size());
  for (const auto& x : xs) projected.push_back(pca_transform(pca, x));
  const int t_len = static_cast<int>(projected.size());

  std::vector<Vector> out;
  auto mean_of = [&](int begin, int end) {
    Vector m = Vector::Zero(projected[0].size());
    for (int i = begin; i < end; ++i) m += projected[i];
    return (m / (end - begin)).eval();
  };
  if (t_len < window) {
    out.push_back(mean_of(0, t_len));
    return out;
  }
  for (int start = 0; start + window <= t_len; start += stride) {
    out.push_back(mean_of(start, start + window));
  }
  return out;
}

}  // namespace

WindowClassifier window_fit(const std::vector<FeatureSequence>& data,
                            int label_count, const WindowFitOptions& options) {
  if (data.empty()) throw std::invalid_argument("window_fit: no data");

  std::vector<Vector> all_frames;
  for (const auto& seq : data) {
    for (const auto& x : seq.frames) all_frames.push_back(x);
  }
  const int d = static_cast<int>(all_frames[0].size());
  const int k = std::min({options.pca_dim, d,
                          static_cast<int>(all_frames.size())});

  WindowClassifier c;
  c.window = options.window;
  c.stride = options.stride;
  c.pca = pca_fit(all_frames, k);

  std::vector<Vector> summaries;
  std::vector<int> labels;
  for (const auto& seq : data) {
    for (auto& w : window_summaries(c.pca, c.window, c.stride, seq.frames)) {
      summaries.push_back(std::move(w));
      labels.push_back(seq.label);
    }
  }

  c.weights = Matrix::Zero(label_count, k);
  c.bias = Vector::Zero(label_count);

  Rng rng(options.seed);
  std::vector<int> order(summaries.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    rng.shuffle(order);
    const double rate = options.rate / (1.0 + 0.1 * epoch);
    for (const int i : order) {
      const Vector& z = summaries[i];
      for (int cls = 0; cls < label_count; ++cls) {
        const double y = labels[i] == cls ? 1.0 : -1.0;
        const double score = c.weights.row(cls).dot(z) + c.bias[cls];
        c.weights.row(cls) *= 1.0 - rate * options.regularization;
        if (y * score < 1.0) {
          c.weights.row(cls) += rate * y * z.transpose();
          c.bias[cls] += rate * y;
        }
      }
    }
  }
  return c;
}

std::vector<int> window_votes(const WindowClassifier& c,
                              const std::vector<Vector>& xs) {
  if (xs.empty()) throw std::invalid_argument("window_votes: empty sequence");
  std::vector<int> votes;
  for (const auto& z : window_summaries(c.pca, c.window, c.stride, xs)) {
    const Vector scores = c.weights * z + c.bias;
    int best = 0;
    for (int i = 1; i < scores.size(); ++i) {
      if (scores[i] > scores[best]) best = i;
    }
    votes.push_back(best);
  }
  return votes;
}

int majority_vote(const std::vector<int>& votes, int label_count) {
  if (votes.empty()) throw std::invalid_argument("majority_vote: no votes");
  std::vector<int> counts(label_count, 0);
  for (const int v : votes) {
    if (v < 0 || v >= label_count) {
      throw std::invalid_argument("majority_vote: vote out of range");
    }
    ++counts[v];
  }
  int best = 0;
  for (int i = 1; i < label_count; ++i) {
    if (counts[i] > counts[best]) best = i;
  }
  return best;
}

int window_classify(const WindowClassifier& c, const std::vector<Vector>& xs) {
  return majority_vote(window_votes(c, xs), c.label_count());
}

namespace {

void write_envelope(std::ostream& os, std::uint32_t tag) {
  io::write_magic(os, "RMDL");
  io::write_u32(os, 1);
  io::write_u32(os, tag);
}

void check_envelope(std::istream& is, std::uint32_t tag,
                    const std::string& path) {
  io::expect_magic(is, "RMDL", path);
  const auto version = io::read_u32(is, path + ": version");
  if (version != 1) throw FormatError(path + ": unsupported version");
  const auto found = io::read_u32(is, path + ": type tag");
  if (found != tag) throw FormatError(path + ": unexpected container type");
}

}  // namespace

void save_hmm_bank(const std::string& path,
                   const std::vector<GaussianHmm>& models,
                   const std::vector<std::string>& label_names) {
  io::AtomicFile file(path);
  auto& os = file.stream();
  write_envelope(os, kModelTagHmmBank);
  io::write_u32(os, static_cast<std::uint32_t>(models.size()));
  for (const auto& name : label_names) io::write_string(os, name);
  for (const auto& m : models) {
    io::write_u32(os, static_cast<std::uint32_t>(m.states()));
    io::write_u32(os, static_cast<std::uint32_t>(m.dim()));
    io::write_vector_f64(os, m.initial);
    io::write_matrix_f64(os, m.transition);
    io::write_matrix_f64(os, m.means);
    io::write_matrix_f64(os, m.variances);
  }
  file.commit();
}

std::pair<std::vector<GaussianHmm>, std::vector<std::string>> load_hmm_bank(
    const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError(path + ": cannot open");
  check_envelope(is, kModelTagHmmBank, path);
  const auto count = io::read_u32(is, path + ": model count");
  std::vector<std::string> names;
  for (std::uint32_t i = 0; i < count; ++i) {
    names.push_back(io::read_string(is, path + ": label name"));
  }
  std::vector<GaussianHmm> models;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto s = io::read_u32(is, path + ": states");
    const auto d = io::read_u32(is, path + ": dim");
    GaussianHmm m;
    m.initial = io::read_vector_f64(is, s, path + ": initial");
    m.transition = io::read_matrix_f64(is, s, s, path + ": transition");
    m.means = io::read_matrix_f64(is, s, d, path + ": means");
    m.variances = io::read_matrix_f64(is, s, d, path + ": variances");
    models.push_back(std::move(m));
  }
  return {std::move(models), std::move(names)};
}

void save_window_classifier(const std::string& path, const WindowClassifier& c,
                            const std::vector<std::string>& label_names) {
  io::AtomicFile file(path);
  auto& os = file.stream();
  write_envelope(os, kModelTagWindowClassifier);
  io::write_u32(os, static_cast<std::uint32_t>(c.window));
  io::write_u32(os, static_cast<std::uint32_t>(c.stride));
  io::write_u32(os, static_cast<std::uint32_t>(c.pca.output_dim()));
  io::write_u32(os, static_cast<std::uint32_t>(c.pca.input_dim()));
  io::write_u32(os, static_cast<std::uint32_t>(c.label_count()));
  for (const auto& name : label_names) io::write_string(os, name);
  io::write_vector_f64(os, c.pca.mean);
  io::write_matrix_f64(os, c.pca.components);
  io::write_vector_f64(os, c.pca.explained_variance);
  io::write_matrix_f64(os, c.weights);
  io::write_vector_f64(os, c.bias);
  file.commit();
}

std::pair<WindowClassifier, std::vector<std::string>> load_window_classifier(
    const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError(path + ": cannot open");
  check_envelope(is, kModelTagWindowClassifier, path);
  WindowClassifier c;
  c.window = static_cast<int>(io::read_u32(is, path + ": window"));
  c.stride = static_cast<int>(io::read_u32(is, path + ": stride"));
  const auto k = io::read_u32(is, path + ": pca dim");
  const auto d = io::read_u32(is, path + ": input dim");
  const auto labels = io::read_u32(is, path + ": label count");
  std::vector<std::string> names;
  for (std::uint32_t i = 0; i < labels; ++i) {
    names.push_back(io::read_string(is, path + ": label name"));
  }
  c.pca.mean = io::read_vector_f64(is, d, path + ": pca mean");
  c.pca.components = io::read_matrix_f64(is, k, d, path + ": pca components");
  c.pca.explained_variance = io::read_vector_f64(is, k, path + ": pca variance");
  c.weights = io::read_matrix_f64(is, labels, k, path + ": weights");
  c.bias = io::read_vector_f64(is, labels, path + ": bias");
  return {std::move(c), std::move(names)};
}

}  // namespace engine
