// Acceptance suite: one self-contained check per release criterion, each
// printing a single PASS/FAIL line. Exit status is nonzero if any fails.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <vector>

#include "engine/baselines.hpp"
#include "engine/eval.hpp"
#include "engine/heads.hpp"
#include "engine/inference.hpp"
#include "engine/training.hpp"
#include "oracles.hpp"

using namespace engine;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Criterion {
  int id;
  std::string name;
  bool ok;
  double seconds;
};

std::vector<Criterion> g_results;

void report(int id, const std::string& name, bool ok, double seconds,
            const std::string& detail = "") {
  g_results.push_back({id, name, ok, seconds});
  std::cout << (ok ? "PASS" : "FAIL") << " criterion " << id << ": " << name
            << " (" << seconds << " s)";
  if (!detail.empty()) std::cout << " -- " << detail;
  std::cout << "\n" << std::flush;
}

// ---------------------------------------------------------------- 1

bool check_gradients() {
  const int d = 3, n = 4, classes = 3, t_len = 5;
  Rng rng(101);
  CellParams cell = CellParams::random(d, n, 0.3, rng);
  std::vector<Vector> xs;
  for (int t = 0; t < t_len; ++t) xs.push_back(randn_vec(rng, d, 1.0));
  std::vector<int> labels;
  for (int t = 0; t < t_len; ++t) {
    labels.push_back(static_cast<int>(rng.below(classes)));
  }
  const ClassifierHead head = ClassifierHead::random(n, classes, 0.3, rng);
  const RegressorHead reg = RegressorHead::random(n, classes, 0.3, rng);
  std::vector<Vector> targets;
  for (int t = 0; t < t_len; ++t) targets.push_back(randn_vec(rng, classes, 0.5));

  const SequenceLoss nll = [&](const std::vector<Vector>& hs) {
    double loss = 0.0;
    std::vector<Vector> dh(hs.size());
    for (std::size_t t = 0; t < hs.size(); ++t) {
      const Distribution p = classify_frame(head, hs[t]);
      loss += -std::log(std::max(p.probs[labels[t]], 1e-300));
      Vector grad = p.probs;
      grad[labels[t]] -= 1.0;
      dh[t] = head.W_u.transpose() * grad;
    }
    return std::make_pair(loss, dh);
  };
  const SequenceLoss l2 = [&](const std::vector<Vector>& hs) {
    double loss = 0.0;
    std::vector<Vector> dh(hs.size());
    for (std::size_t t = 0; t < hs.size(); ++t) {
      const Vector v = regress_forces(reg, hs[t]);
      const Vector r = v - targets[t];
      loss += r.squaredNorm();
      dh[t] = reg.W_v.transpose() * (2.0 * r);
    }
    return std::make_pair(loss, dh);
  };

  const double err_nll = gradient_check(cell, xs, nll);
  const double err_l2 = gradient_check(cell, xs, l2);
  return err_nll <= 1e-4 && err_l2 <= 1e-4;
}

// ---------------------------------------------------------------- 2

bool check_streaming_equivalence() {
  Rng rng(202);
  Model m;
  const int d = 6, n = 8, classes = 4;
  m.projection = ProjectionParams{randn(rng, n, d, 0.4), randn_vec(rng, n, 0.4)};
  m.cell = CellParams::random(n, n, 0.4, rng);
  m.classifier = ClassifierHead::random(n, classes, 0.4, rng);
  for (int c = 0; c < classes; ++c) m.label_names.push_back("c");

  for (int s = 0; s < 100; ++s) {
    FeatureSequence seq;
    const int frames = 10 + static_cast<int>(rng.below(30));
    for (int t = 0; t < frames; ++t) seq.frames.push_back(randn_vec(rng, d, 1.0));

    const auto batch = belief_trajectory(m, seq);
    Session session(m);
    for (int t = 0; t < frames; ++t) {
      const FramePrediction p = session.feed_frame(seq.frames[t]);
      if ((p.belief.probs - batch[t].belief.probs).cwiseAbs().maxCoeff() !=
              0.0 ||
          p.uncertainty != batch[t].uncertainty || p.label != batch[t].label) {
        return false;
      }
    }
  }
  return true;
}

// ------------------------------------------------------------ 3 + 4

struct SynthEval {
  bool ran = false;
  double accuracy = 0.0;
  double untrained_accuracy = 0.0;
  AlignedCurves accuracy_curves;
  AlignedCurves uncertainty_curves;
};

SynthEval run_synthetic_classification(const fs::path& work) {
  SynthSpec spec;  // defaults: 5 classes, d=32, 40/class, 5 subjects
  const SynthDataset data = synth_generate(spec);
  synth_write(data, (work / "data").string(), (work / "manifest.txt").string());
  const DatasetManifest manifest =
      load_manifest((work / "manifest.txt").string());

  EvalConfig cfg;
  cfg.train = TrainConfig::classification_defaults();
  cfg.l_pre = 50;
  cfg.l_post = 100;
  const EvalResult result =
      run_classification_eval(manifest, cfg, (work / "eval").string());

  SynthEval out;
  out.ran = !result.objects.empty();
  if (!out.ran) return out;
  out.accuracy = result.objects[0].accuracy;
  out.accuracy_curves = result.objects[0].accuracy_curves;
  out.uncertainty_curves = result.objects[0].uncertainty_curves;

  // chance-level control: untrained small-init models. A single draw maps
  // each class to one arbitrary prediction, so its accuracy is a lattice
  // value (0, 0.2, 0.4, ...); average over draws to estimate chance.
  double total = 0.0;
  const int trials = 100;
  for (int trial = 0; trial < trials; ++trial) {
    Rng rng(static_cast<std::uint64_t>(trial) * 1000 + 77);
    Model blank;
    blank.projection = ProjectionParams{
        randn(rng, cfg.train.hidden_dim, spec.dim, cfg.train.init_std),
        Vector::Zero(cfg.train.hidden_dim)};
    blank.cell = CellParams::random(cfg.train.hidden_dim, cfg.train.hidden_dim,
                                    cfg.train.init_std, rng);
    blank.classifier = ClassifierHead::random(
        cfg.train.hidden_dim, spec.classes, cfg.train.init_std, rng);
    blank.label_names = data.label_names;
    int hits = 0;
    for (const auto& seq : data.sequences) {
      if (classify_sequence(blank, seq).label == seq.label) ++hits;
    }
    total += static_cast<double>(hits) /
             static_cast<double>(data.sequences.size());
  }
  out.untrained_accuracy = total / trials;
  return out;
}

bool check_prediction_shape(const SynthEval& eval) {
  if (!eval.ran) return false;
  const auto& acc = eval.accuracy_curves;
  double pre = 0.0, post = 0.0;
  for (int k = 0; k < acc.l_pre; ++k) pre += acc.mean[k];
  for (int k = acc.l_pre; k < acc.length(); ++k) post += acc.mean[k];
  pre /= acc.l_pre;
  post /= acc.l_post;

  const auto& unc = eval.uncertainty_curves;
  const double first = unc.mean.front();
  const double last = unc.mean.back();
  return post > pre && first > last;
}

// ---------------------------------------------------------------- 5

bool check_force_regression(const fs::path& work, std::string& detail) {
  SynthSpec spec;
  spec.with_forces = true;
  spec.force_channels = 4;
  const SynthDataset data = synth_generate(spec);

  // hold out the last subject
  std::vector<FeatureSequence> train_x, test_x;
  std::vector<ForceTrace> train_f, test_f;
  const std::string held = "subject" + std::to_string(spec.subjects - 1);
  for (std::size_t i = 0; i < data.sequences.size(); ++i) {
    if (data.subject_of[i] == held) {
      test_x.push_back(data.sequences[i]);
      test_f.push_back(data.forces[i]);
    } else {
      train_x.push_back(data.sequences[i]);
      train_f.push_back(data.forces[i]);
    }
  }

  TrainConfig cfg = TrainConfig::regression_defaults();  // hidden 128
  cfg.log_path = (work / "force_train_log.csv").string();
  auto [model, log] = train_regressor(train_x, train_f, cfg);

  double mae = 0.0;
  long count = 0;
  for (std::size_t i = 0; i < test_x.size(); ++i) {
    const ForceTrace est = estimate_forces(model, test_x[i]);
    mae += (est.values - test_f[i].values).cwiseAbs().sum();
    count += est.values.size();
  }
  mae /= static_cast<double>(count);
  std::ostringstream os;
  os << "held-out MAE " << mae;
  detail = os.str();
  return mae <= 0.02;
}

// ---------------------------------------------------------------- 6

std::vector<Vector> sample_hmm(const GaussianHmm& hmm, int frames, Rng& rng) {
  std::vector<Vector> xs;
  int state = 0;
  double u = rng.uniform(), acc = 0.0;
  for (int s = 0; s < hmm.states(); ++s) {
    acc += hmm.initial[s];
    if (u <= acc) { state = s; break; }
  }
  for (int t = 0; t < frames; ++t) {
    Vector x(hmm.dim());
    for (int j = 0; j < hmm.dim(); ++j) {
      x[j] = hmm.means(state, j) +
             std::sqrt(hmm.variances(state, j)) * rng.normal();
    }
    xs.push_back(std::move(x));
    u = rng.uniform();
    acc = 0.0;
    for (int s = 0; s < hmm.states(); ++s) {
      acc += hmm.transition(state, s);
      if (u <= acc) { state = s; break; }
    }
  }
  return xs;
}

double brute_force_loglik(const GaussianHmm& hmm,
                          const std::vector<Vector>& xs) {
  auto log_gauss = [&](int s, const Vector& x) {
    double lp = 0.0;
    for (int j = 0; j < hmm.dim(); ++j) {
      const double var = hmm.variances(s, j);
      const double diff = x[j] - hmm.means(s, j);
      lp += -0.5 * std::log(2.0 * std::numbers::pi * var) -
            0.5 * diff * diff / var;
    }
    return lp;
  };
  const int S = hmm.states();
  double total = 0.0;
  for (int a = 0; a < S; ++a) {
    for (int b = 0; b < S; ++b) {
      total += std::exp(std::log(hmm.initial[a]) + log_gauss(a, xs[0]) +
                        std::log(hmm.transition(a, b)) + log_gauss(b, xs[1]));
    }
  }
  return std::log(total);
}

bool check_baselines() {
  // 2-class generative models far apart
  GaussianHmm a;
  a.initial = Vector(2);
  a.initial << 0.9, 0.1;
  a.transition = Matrix(2, 2);
  a.transition << 0.85, 0.15, 0.10, 0.90;
  a.means = Matrix(2, 2);
  a.means << -2.0, -2.0, 2.0, 2.0;
  a.variances = Matrix::Constant(2, 2, 0.25);
  GaussianHmm b = a;
  b.means.array() += 6.0;

  Rng rng(606);
  std::vector<std::vector<Vector>> train_a, train_b;
  for (int i = 0; i < 20; ++i) {
    train_a.push_back(sample_hmm(a, 30, rng));
    train_b.push_back(sample_hmm(b, 30, rng));
  }
  HmmFitOptions opt;
  opt.states = 2;
  auto [fa, ta] = hmm_fit(train_a, opt);
  auto [fb, tb] = hmm_fit(train_b, opt);
  const std::vector<GaussianHmm> bank = {fa, fb};
  for (int i = 0; i < 50; ++i) {
    if (hmm_classify(bank, sample_hmm(a, 30, rng)) != 0) return false;
    if (hmm_classify(bank, sample_hmm(b, 30, rng)) != 1) return false;
  }

  // forward vs brute force on random T=2, S=3 instances
  for (int trial = 0; trial < 20; ++trial) {
    GaussianHmm h;
    const int S = 3;
    Vector raw = Vector::Ones(S) + 2.0 * Vector::Random(S).cwiseAbs();
    h.initial = raw / raw.sum();
    h.transition = Matrix(S, S);
    for (int i = 0; i < S; ++i) {
      Vector row = Vector::Ones(S) + 2.0 * Vector::Random(S).cwiseAbs();
      h.transition.row(i) = (row / row.sum()).transpose();
    }
    h.means = randn(rng, S, 2, 1.5);
    h.variances = Matrix::Constant(S, 2, 0.5);
    std::vector<Vector> xs = {randn_vec(rng, 2, 1.0), randn_vec(rng, 2, 1.0)};
    const double fast = hmm_log_likelihood(h, xs);
    const double slow = brute_force_loglik(h, xs);
    if (std::abs(fast - slow) > 1e-9 * std::max(1.0, std::abs(slow))) {
      return false;
    }
  }

  // majority vote rules on constructed patterns
  if (majority_vote({0, 0, 1}, 2) != 0) return false;
  if (majority_vote({1, 0, 1}, 2) != 1) return false;
  if (majority_vote({0, 1}, 2) != 0) return false;          // tie: lowest
  if (majority_vote({2, 1, 1, 2}, 3) != 1) return false;    // tie: lowest
  if (majority_vote({2}, 3) != 2) return false;
  return true;
}

// ---------------------------------------------------------------- 7

bool check_signal_pipeline() {
  const double fs = 1000.0, f0 = 60.0;
  // attenuation at f0 (sine-fit on the central segment, clear of edges)
  {
    ForceTrace t;
    t.sample_rate = fs;
    t.channels = {"c"};
    t.values = Matrix(2000, 1);
    for (int i = 0; i < 2000; ++i) {
      t.values(i, 0) = std::sin(2.0 * std::numbers::pi * f0 * i / fs);
    }
    const ForceTrace filtered = notch_filter(t, f0, 30.0);
    std::vector<double> mid;
    for (int i = 500; i < 1500; ++i) mid.push_back(filtered.values(i, 0));
    if (oracle::sine_fit_amplitude(mid, f0, fs) > 0.0316) return false;  // 30 dB
  }
  // passband ripple at f0/4
  {
    ForceTrace t;
    t.sample_rate = fs;
    t.channels = {"c"};
    t.values = Matrix(4000, 1);
    for (int i = 0; i < 4000; ++i) {
      t.values(i, 0) = std::sin(2.0 * std::numbers::pi * (f0 / 4.0) * i / fs);
    }
    const ForceTrace filtered = notch_filter(t, f0, 30.0);
    std::vector<double> all;
    for (int i = 0; i < 4000; ++i) all.push_back(filtered.values(i, 0));
    const double amp = oracle::sine_fit_amplitude(all, f0 / 4.0, fs);
    if (std::abs(20.0 * std::log10(amp)) > 1.0) return false;
  }
  // calibration spot value: V_out = V_in/2 with C1=1, C2=0 gives 4.448 N
  {
    SensorCalibration cal;
    if (std::abs(volts_to_force(cal, 2.5) - 4.448) > 1e-12) return false;
  }
  // normalize / denormalize roundtrip
  {
    Rng rng(707);
    ForceTrace t;
    t.sample_rate = fs;
    t.channels = {"a", "b", "c"};
    t.values = Matrix(50, 3);
    for (int i = 0; i < 50; ++i) {
      for (int j = 0; j < 3; ++j) t.values(i, j) = 4.0 * rng.uniform();
    }
    auto [norm, params] = normalize(t);
    const ForceTrace back = denormalize(norm, params);
    if ((back.values - t.values).cwiseAbs().maxCoeff() > 1e-9) return false;
  }
  return true;
}

// ---------------------------------------------------------------- 8

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) return "<missing:" + path.string() + ">";
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

bool check_cli_determinism(const fs::path& work, std::string& detail) {
  const char* cli = std::getenv("ENGINE_CLI");
  if (cli == nullptr) {
    detail = "ENGINE_CLI is not set";
    return false;
  }
  auto run = [&](const std::string& args) {
    const std::string command = std::string(cli) + " " + args + " >/dev/null 2>&1";
    return std::system(command.c_str()) == 0;
  };

  for (const std::string tag : {"a", "b"}) {
    const fs::path dir = work / ("det_" + tag);
    fs::create_directories(dir);
    if (!run("synth --out " + (dir / "data").string() +
             " --classes 3 --dim 8 --per-class 6 --subjects 3 --seed 21")) {
      detail = "synth failed";
      return false;
    }
    if (!run("train --manifest " + (dir / "data/manifest.txt").string() +
             " --task action --out " + (dir / "model.rmdl").string() +
             " --hidden 8 --epochs 10 --seed 4")) {
      detail = "train failed";
      return false;
    }
    if (!run("eval --manifest " + (dir / "data/manifest.txt").string() +
             " --task action --out " + (dir / "eval").string() +
             " --hidden 8 --epochs 10 --seed 4 --lpre 8 --lpost 16")) {
      detail = "eval failed";
      return false;
    }
  }

  if (slurp(work / "det_a/model.rmdl") != slurp(work / "det_b/model.rmdl")) {
    detail = "model files differ";
    return false;
  }
  for (const auto& entry : fs::directory_iterator(work / "det_a/eval")) {
    const auto name = entry.path().filename();
    if (slurp(entry.path()) != slurp(work / "det_b/eval" / name)) {
      detail = "metric file differs: " + name.string();
      return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------- 9

int csv_rows(const fs::path& path, int* fields_in_row = nullptr) {
  std::ifstream in(path);
  if (!in.good()) return -1;
  int rows = 0;
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    if (fields_in_row != nullptr && rows == 0) {
      *fields_in_row = 1 + static_cast<int>(
          std::count(line.begin(), line.end(), ','));
    }
    ++rows;
  }
  return rows;
}

bool check_harness_tables(const fs::path& work, std::string& detail) {
  // stand-in recordings: the harness must produce per-object accuracy
  // tables, confusion matrices, aligned curves, and offset tables of the
  // documented shapes on any conforming manifest
  SynthSpec spec;
  spec.classes = 4;
  spec.dim = 10;
  spec.sequences_per_class = 6;
  spec.subjects = 3;
  spec.min_length = 40;
  spec.max_length = 48;
  const SynthDataset data = synth_generate(spec);
  const fs::path dir = work / "tables";
  synth_write(data, (dir / "data").string(), (dir / "manifest.txt").string());
  const DatasetManifest manifest = load_manifest((dir / "manifest.txt").string());

  EvalConfig cfg;
  cfg.train = TrainConfig::classification_defaults();
  cfg.train.hidden_dim = 8;
  cfg.train.epochs = 10;
  cfg.l_pre = 10;
  cfg.l_post = 20;
  const EvalResult result =
      run_classification_eval(manifest, cfg, (dir / "out").string());
  if (result.objects.size() != 1) {
    detail = "expected one object table set";
    return false;
  }

  int fields = 0;
  // per-action accuracy table: one row per action plus an average row
  if (csv_rows(dir / "out/synthetic_accuracy.csv", &fields) !=
      1 + spec.classes + 1) {
    detail = "accuracy table rows";
    return false;
  }
  // confusion: header plus one row per action, each with 1 + classes fields
  if (csv_rows(dir / "out/synthetic_confusion.csv", &fields) !=
          1 + spec.classes ||
      fields != 1 + spec.classes) {
    detail = "confusion shape";
    return false;
  }
  // aligned curves: header plus l_pre + l_post rows
  if (csv_rows(dir / "out/synthetic_accuracy_curves.csv", &fields) !=
      1 + cfg.l_pre + cfg.l_post) {
    detail = "curve rows";
    return false;
  }
  if (csv_rows(dir / "out/synthetic_uncertainty_curves.csv", &fields) !=
      1 + cfg.l_pre + cfg.l_post) {
    detail = "uncertainty curve rows";
    return false;
  }
  // offset table: one row per action, one column per offset
  if (csv_rows(dir / "out/synthetic_offset_accuracy.csv", &fields) !=
          1 + spec.classes ||
      fields != 1 + static_cast<int>(cfg.offsets.size())) {
    detail = "offset table shape";
    return false;
  }
  if (csv_rows(dir / "out/summary_accuracy.csv", &fields) < 2) {
    detail = "summary rows";
    return false;
  }

  // the README must state which published figures need the original
  // recordings and pre-trained visual features
  const char* readme_env = std::getenv("ENGINE_README");
  const fs::path readme =
      readme_env != nullptr ? fs::path(readme_env) : fs::path("README.md");
  const std::string text = slurp(readme);
  for (const std::string needle : {"MAD", "HAF", "not reproducible"}) {
    if (text.find(needle) == std::string::npos) {
      detail = "README missing statement: " + needle;
      return false;
    }
  }
  return true;
}

}  // namespace

int main() {
  const fs::path work =
      fs::temp_directory_path() / "engine_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);

  {
    const auto t0 = Clock::now();
    const bool ok = check_gradients();
    const double dt = seconds_since(t0);
    report(1, "gradient fidelity vs finite differences", ok && dt <= 10.0, dt);
  }
  {
    const auto t0 = Clock::now();
    const bool ok = check_streaming_equivalence();
    const double dt = seconds_since(t0);
    report(2, "streaming equals batch bitwise", ok && dt <= 5.0, dt);
  }
  SynthEval synth_eval;
  {
    const auto t0 = Clock::now();
    synth_eval = run_synthetic_classification(work);
    const double dt = seconds_since(t0);
    const bool ok = synth_eval.ran && synth_eval.accuracy >= 0.95 &&
                    std::abs(synth_eval.untrained_accuracy - 0.2) <= 0.05 &&
                    dt <= 300.0;
    std::ostringstream os;
    os << "LOSO accuracy " << synth_eval.accuracy << ", untrained "
       << synth_eval.untrained_accuracy;
    report(3, "synthetic classification", ok, dt, os.str());
  }
  {
    const auto t0 = Clock::now();
    const bool ok = check_prediction_shape(synth_eval);
    report(4, "prediction improves and uncertainty drops after contact", ok,
           seconds_since(t0));
  }
  {
    const auto t0 = Clock::now();
    std::string detail;
    const bool ok = check_force_regression(work, detail);
    report(5, "force regression on realizable targets", ok,
           seconds_since(t0), detail);
  }
  {
    const auto t0 = Clock::now();
    const bool ok = check_baselines();
    const double dt = seconds_since(t0);
    report(6, "baseline sanity", ok && dt <= 60.0, dt);
  }
  {
    const auto t0 = Clock::now();
    const bool ok = check_signal_pipeline();
    report(7, "signal pipeline", ok, seconds_since(t0));
  }
  {
    const auto t0 = Clock::now();
    std::string detail;
    const bool ok = check_cli_determinism(work, detail);
    report(8, "byte-identical reruns", ok, seconds_since(t0), detail);
  }
  {
    const auto t0 = Clock::now();
    std::string detail;
    const bool ok = check_harness_tables(work, detail);
    report(9, "evaluation tables and dataset statement", ok,
           seconds_since(t0), detail);
  }

  fs::remove_all(work);

  int failures = 0;
  for (const auto& c : g_results) {
    if (!c.ok) ++failures;
  }
  std::cout << (g_results.size() - failures) << "/" << g_results.size()
            << " criteria passed\n";
  return failures == 0 ? 0 : 1;
}
