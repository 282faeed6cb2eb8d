#include <CLI11.hpp>
#include <iostream>
#include <limits>
#include <set>

#include "engine/baselines.hpp"
#include "engine/eval.hpp"
#include "engine/inference.hpp"
#include "engine/io.hpp"
#include "engine/model.hpp"
#include "engine/training.hpp"

namespace {

using namespace engine;

struct TrainFlags {
  std::uint64_t seed = 0;
  int hidden = 0;  // 0 = task default
  int epochs = 100;
  int batch = 10;
  double rate = 0.01;
  std::string log_path;

  void attach(CLI::App* cmd) {
    cmd->add_option("--seed", seed, "random seed");
    cmd->add_option("--hidden", hidden,
                    "hidden size (default 64 for action, 128 for force)");
    cmd->add_option("--epochs", epochs, "training epochs");
    cmd->add_option("--batch", batch, "minibatch size");
    cmd->add_option("--rate", rate, "base learning rate");
    cmd->add_option("--log", log_path, "per-epoch training log path");
  }

  TrainConfig to_config(bool force_task) const {
    TrainConfig cfg = force_task ? TrainConfig::regression_defaults()
                                 : TrainConfig::classification_defaults();
    cfg.seed = seed;
    if (hidden > 0) cfg.hidden_dim = hidden;
    cfg.epochs = epochs;
    cfg.batch_size = batch;
    cfg.base_rate = rate;
    cfg.log_path = log_path;
    return cfg;
  }
};

std::string pick_object(const DatasetManifest& manifest,
                        const std::string& requested) {
  const auto objects = manifest.objects();
  if (!requested.empty()) {
    if (std::find(objects.begin(), objects.end(), requested) == objects.end()) {
      throw FormatError("manifest has no object named \"" + requested + "\"");
    }
    return requested;
  }
  if (objects.size() != 1) {
    throw FormatError(
        "manifest covers multiple objects; pick one with --object");
  }
  return objects[0];
}

int cmd_train(const std::string& manifest_path, const std::string& task,
              const std::string& object, const std::string& out_path,
              const TrainFlags& flags) {
  const DatasetManifest manifest = load_manifest(manifest_path);
  const std::string obj = pick_object(manifest, object);
  const auto actions = manifest.actions_for(obj);

  std::vector<FeatureSequence> sequences;
  std::vector<const ManifestRecord*> records;
  for (const auto& r : manifest.records) {
    if (r.object != obj) continue;
    sequences.push_back(load_record(manifest, r));
    records.push_back(&r);
  }

  if (task == "action") {
    auto [model, log] =
        train_classifier(sequences, actions, flags.to_config(false));
    save_model(out_path, model);
  } else {
    std::vector<ForceTrace> raw;
    for (const auto* r : records) {
      if (r->force_path.empty()) {
        throw FormatError("force training needs forces for every record; "
                          "missing for " + r->feature_path);
      }
      raw.push_back(read_recording(r->force_path).to_forces());
    }
    const int m = raw[0].channel_count();
    Vector lo = Vector::Constant(m, std::numeric_limits<double>::max());
    Vector hi = Vector::Constant(m, std::numeric_limits<double>::lowest());
    for (const auto& trace : raw) {
      lo = lo.cwiseMin(trace.values.colwise().minCoeff().transpose());
      hi = hi.cwiseMax(trace.values.colwise().maxCoeff().transpose());
    }
    NormParams norm{lo, hi};
    std::vector<ForceTrace> targets;
    for (const auto& trace : raw) {
      targets.push_back(normalize(trace, norm).first);
    }
    auto [model, log] =
        train_regressor(sequences, targets, flags.to_config(true));
    model.force_norm = norm;
    save_model(out_path, model);
  }
  std::cout << "model written to " << out_path << "\n";
  return 0;
}

int cmd_predict(const std::string& model_path, const std::string& input,
                bool from_stdin, int convergence_window) {
  const Model model = load_model(model_path);
  Session session(model);

  auto emit = [&](const FramePrediction& p) {
    std::cout << session.frames_fed() - 1;
    for (int i = 0; i < p.belief.size(); ++i) {
      std::cout << "," << p.belief.probs[i];
    }
    std::cout << "," << p.uncertainty << "," << p.label;
    if (auto label = session.converged(convergence_window)) {
      std::cout << ",converged=" << model.label_names[*label];
    }
    std::cout << std::endl;  // flush per frame: streaming contract
  };

  if (from_stdin) {
    // Framing: u32 dim, then consecutive frames of dim f32 values.
    const auto dim = io::read_u32(std::cin, "stdin: frame dim");
    if (static_cast<int>(dim) != model.input_dim()) {
      throw FormatError("stdin: frame dim does not match model input dim");
    }
    while (true) {
      Vector frame(dim);
      for (std::uint32_t j = 0; j < dim; ++j) {
        float v;
        std::cin.read(reinterpret_cast<char*>(&v), sizeof v);
        if (!std::cin) {
          if (j == 0) return 0;  // clean EOF at a frame boundary
          throw FormatError("stdin: truncated frame");
        }
        frame[j] = v;
      }
      emit(session.feed_frame(frame));
    }
  }
  const FeatureSequence seq = read_features(input);
  for (const auto& x : seq.frames) emit(session.feed_frame(x));
  return 0;
}

int cmd_eval(const std::string& manifest_path, const std::string& task,
             const std::string& out_dir, const TrainFlags& flags,
             const std::vector<int>& offsets, int l_pre, int l_post,
             bool no_parallel) {
  const DatasetManifest manifest = load_manifest(manifest_path);
  EvalConfig cfg;
  cfg.train = flags.to_config(task == "force");
  cfg.offsets = offsets;
  cfg.l_pre = l_pre;
  cfg.l_post = l_post;
  cfg.parallel_folds = !no_parallel;
  if (task == "action") {
    const EvalResult result = run_classification_eval(manifest, cfg, out_dir);
    for (const auto& obj : result.objects) {
      std::cout << obj.object << ": accuracy " << obj.accuracy << "\n";
    }
    std::cout << "average accuracy: " << result.average_accuracy << "\n";
  } else {
    const ForceEvalResult result = run_force_eval(manifest, cfg, out_dir);
    std::cout << "overall force MAE (normalized): " << result.overall_mae
              << "\n";
  }
  std::cout << "tables written to " << out_dir << "\n";
  return 0;
}

int cmd_forces(const std::string& in_path, const std::string& out_path,
               double notch_freq, double notch_q, bool do_normalize) {
  const ForceRecording rec = read_recording(in_path);
  ForceTrace trace = rec.to_forces();
  trace = notch_filter(trace, notch_freq, notch_q);
  if (do_normalize) trace = normalize(trace).first;

  io::AtomicFile file(out_path);
  auto& os = file.stream();
  os << "frame";
  for (const auto& name : trace.channels) os << "," << name;
  os << "\n";
  for (int t = 0; t < trace.frames(); ++t) {
    os << t;
    for (int ch = 0; ch < trace.channel_count(); ++ch) {
      os << "," << trace.values(t, ch);
    }
    os << "\n";
  }
  file.commit();
  std::cout << "conditioned trace written to " << out_path << "\n";
  return 0;
}

int cmd_synth(const SynthSpec& spec, const std::string& out_dir,
              const std::string& manifest_path) {
  const SynthDataset data = synth_generate(spec);
  synth_write(data, out_dir, manifest_path);
  std::cout << data.sequences.size() << " sequences written to " << out_dir
            << " (manifest " << manifest_path << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online action prediction and fingertip force estimation"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "train a model from a manifest");
  std::string manifest_path, task = "action", object, model_path, out_path;
  TrainFlags flags;
  train->add_option("--manifest", manifest_path, "dataset manifest")->required();
  train->add_option("--task", task, "action | force")
      ->check(CLI::IsMember({"action", "force"}));
  train->add_option("--object", object, "object to train on");
  train->add_option("--out", out_path, "output model path")->required();
  flags.attach(train);

  // predict
  auto* predict = app.add_subcommand("predict", "stream per-frame predictions");
  std::string input_path;
  bool from_stdin = false;
  int convergence_window = 5;
  predict->add_option("--model", model_path, "model file")->required();
  predict->add_option("--input", input_path, "feature file (FSEQ)");
  predict->add_flag("--stdin", from_stdin, "read frames from standard input");
  predict->add_option("--window", convergence_window,
                      "convergence window in frames");

  // eval
  auto* eval = app.add_subcommand("eval", "leave-one-subject-out evaluation");
  std::string eval_out = "eval_out";
  std::vector<int> offsets = {-10, 0, 10, 25};
  int l_pre = 50, l_post = 100;
  bool no_parallel = false;
  eval->add_option("--manifest", manifest_path, "dataset manifest")->required();
  eval->add_option("--task", task, "action | force")
      ->check(CLI::IsMember({"action", "force"}));
  eval->add_option("--out", eval_out, "output directory for tables");
  eval->add_option("--offsets", offsets, "frame offsets around the touching point");
  eval->add_option("--lpre", l_pre, "aligned pre-contact length");
  eval->add_option("--lpost", l_post, "aligned post-contact length");
  eval->add_flag("--no-parallel", no_parallel, "train folds sequentially");
  flags.attach(eval);

  // forces
  auto* forces = app.add_subcommand("forces",
                                    "calibrate, notch-filter, and normalize a recording");
  std::string rec_in, rec_out;
  double notch_freq = 60.0, notch_q = 30.0;
  bool do_normalize = false;
  forces->add_option("--in", rec_in, "force recording (FREC)")->required();
  forces->add_option("--out", rec_out, "output CSV path")->required();
  forces->add_option("--notch-freq", notch_freq, "notch center frequency (Hz)");
  forces->add_option("--notch-q", notch_q, "notch quality factor");
  forces->add_flag("--normalize", do_normalize, "min-max normalize to [0,1]");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a seeded synthetic dataset");
  SynthSpec spec;
  std::string synth_dir = "synth_data", synth_manifest;
  synth->add_option("--out", synth_dir, "output directory");
  synth->add_option("--manifest", synth_manifest, "manifest path (default <out>/manifest.txt)");
  synth->add_option("--seed", spec.seed, "random seed");
  synth->add_option("--classes", spec.classes, "number of action classes");
  synth->add_option("--dim", spec.dim, "feature dimension");
  synth->add_option("--per-class", spec.sequences_per_class, "sequences per class");
  synth->add_option("--subjects", spec.subjects, "number of synthetic subjects");
  synth->add_option("--noise", spec.noise, "feature noise std");
  synth->add_option("--separation", spec.separation, "class mean separation");
  synth->add_flag("--forces", spec.with_forces, "also generate force traces");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (train->parsed()) {
      return cmd_train(manifest_path, task, object, out_path, flags);
    }
    if (predict->parsed()) {
      if (input_path.empty() && !from_stdin) {
        std::cerr << "predict: need --input or --stdin\n";
        return 1;
      }
      return cmd_predict(model_path, input_path, from_stdin,
                         convergence_window);
    }
    if (eval->parsed()) {
      return cmd_eval(manifest_path, task, eval_out, flags, offsets, l_pre,
                      l_post, no_parallel);
    }
    if (forces->parsed()) {
      return cmd_forces(rec_in, rec_out, notch_freq, notch_q, do_normalize);
    }
    if (synth->parsed()) {
      if (synth_manifest.empty()) synth_manifest = synth_dir + "/manifest.txt";
      return cmd_synth(spec, synth_dir, synth_manifest);
    }
  } catch (const TrainingDiverged& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
