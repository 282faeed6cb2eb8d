#include "engine/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "engine/io.hpp"

namespace engine {

void write_features(const std::string& path, const FeatureSequence& seq) {
  io::AtomicFile file(path);
  auto& os = file.stream();
  io::write_magic(os, "FSEQ");
  io::write_u32(os, 1);
  io::write_u32(os, static_cast<std::uint32_t>(seq.dim()));
  io::write_u32(os, static_cast<std::uint32_t>(seq.length()));
  io::write_i32(os, seq.touching_point);
  io::write_i32(os, seq.label);
  for (const auto& frame : seq.frames) {
    for (Eigen::Index j = 0; j < frame.size(); ++j) {
      io::write_f32(os, static_cast<float>(frame[j]));
    }
  }
  file.commit();
}

FeatureSequence read_features(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError(path + ": cannot open");
  io::expect_magic(is, "FSEQ", path);
  const auto version = io::read_u32(is, path + ": version");
  if (version != 1) throw FormatError(path + ": unsupported version");
  const auto d = io::read_u32(is, path + ": dim");
  const auto t = io::read_u32(is, path + ": frame count");
  if (d == 0 || t == 0) throw FormatError(path + ": empty sequence");
  FeatureSequence seq;
  seq.touching_point = io::read_i32(is, path + ": touching point");
  seq.label = io::read_i32(is, path + ": label");
  if (seq.touching_point >= 0 &&
      seq.touching_point >= static_cast<int>(t)) {
    throw FormatError(path + ": touching point out of range");
  }
  seq.frames.reserve(t);
  for (std::uint32_t i = 0; i < t; ++i) {
    Vector frame(d);
    for (std::uint32_t j = 0; j < d; ++j) {
      frame[j] = io::read_f32(is, path + ": frame data");
    }
    seq.frames.push_back(std::move(frame));
  }
  return seq;
}

std::vector<std::string> DatasetManifest::subjects() const {
  std::set<std::string> s;
  for (const auto& r : records) s.insert(r.subject);
  return {s.begin(), s.end()};
}

std::vector<std::string> DatasetManifest::objects() const {
  std::set<std::string> s;
  for (const auto& r : records) s.insert(r.object);
  return {s.begin(), s.end()};
}

std::vector<std::string> DatasetManifest::actions_for(
    const std::string& object) const {
  std::set<std::string> s;
  for (const auto& r : records) {
    if (r.object == object) s.insert(r.action);
  }
  return {s.begin(), s.end()};
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatError(path + ": cannot open");
  DatasetManifest m;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::istringstream ls(line);
    std::string token;
    ManifestRecord rec;
    bool any = false;
    while (ls >> token) {
      const auto eq = token.find('=');
      if (eq == std::string::npos) {
        throw FormatError(path + ":" + std::to_string(lineno) +
                          ": expected key=value, got \"" + token + "\"");
      }
      const std::string key = token.substr(0, eq);
      const std::string value = token.substr(eq + 1);
      any = true;
      if (key == "subject") rec.subject = value;
      else if (key == "object") rec.object = value;
      else if (key == "action") rec.action = value;
      else if (key == "rep") rec.repetition = std::stoi(value);
      else if (key == "features") rec.feature_path = value;
      else if (key == "forces") rec.force_path = value;
      else if (key == "touch") rec.touching_point = std::stoi(value);
      else throw FormatError(path + ":" + std::to_string(lineno) +
                             ": unknown key \"" + key + "\"");
    }
    if (!any) continue;
    if (rec.subject.empty() || rec.object.empty() || rec.action.empty() ||
        rec.feature_path.empty()) {
      throw FormatError(path + ":" + std::to_string(lineno) +
                        ": record needs subject, object, action, features");
    }
    m.records.push_back(std::move(rec));
  }
  return m;
}

void save_manifest(const std::string& path, const DatasetManifest& m) {
  io::AtomicFile file(path);
  auto& os = file.stream();
  os << "# dataset manifest v1\n";
  for (const auto& r : m.records) {
    os << "subject=" << r.subject << " object=" << r.object
       << " action=" << r.action << " rep=" << r.repetition
       << " features=" << r.feature_path;
    if (!r.force_path.empty()) os << " forces=" << r.force_path;
    if (r.touching_point >= 0) os << " touch=" << r.touching_point;
    os << "\n";
  }
  file.commit();
}

FeatureSequence load_record(const DatasetManifest& m, const ManifestRecord& r) {
  if (!std::filesystem::exists(r.feature_path)) {
    throw FormatError("manifest record references missing file: " +
                      r.feature_path);
  }
  FeatureSequence seq = read_features(r.feature_path);
  const auto actions = m.actions_for(r.object);
  const auto it = std::find(actions.begin(), actions.end(), r.action);
  seq.label = static_cast<int>(it - actions.begin());
  if (r.touching_point >= 0) {
    if (r.touching_point >= seq.length()) {
      throw FormatError(r.feature_path + ": manifest touching point " +
                        std::to_string(r.touching_point) +
                        " out of range for " + std::to_string(seq.length()) +
                        " frames");
    }
    seq.touching_point = r.touching_point;
  }
  return seq;
}

namespace {

// Structural randomness of the generator, fully determined by the seed.
struct SynthModel {
  Matrix embedding;                   // d x L
  std::vector<Matrix> class_freq;     // per class, L x 1
  std::vector<Vector> class_phase;    // per class, L
  Vector shared_freq, shared_phase;   // L
  std::vector<Vector> class_offset;   // per class, d
  Matrix force_map;                   // M x L, rows scaled to L1 norm 0.4
  Vector force_bias;                  // M

  static SynthModel build(const SynthSpec& spec) {
    Rng rng(spec.seed);
    SynthModel m;
    const int l = spec.latent_dim;
    m.embedding = randn(rng, spec.dim, l, 1.0 / std::sqrt(l));
    for (int c = 0; c < spec.classes; ++c) {
      Matrix f(l, 1);
      Vector ph(l);
      for (int j = 0; j < l; ++j) {
        f(j, 0) = 0.5 + 2.5 * rng.uniform();
        ph[j] = 2.0 * std::numbers::pi * rng.uniform();
      }
      m.class_freq.push_back(f);
      m.class_phase.push_back(ph);
      Vector dir = randn_vec(rng, spec.dim, 1.0);
      m.class_offset.push_back(spec.separation * dir / dir.norm());
    }
    m.shared_freq = Vector(l);
    m.shared_phase = Vector(l);
    for (int j = 0; j < l; ++j) {
      m.shared_freq[j] = 0.5 + 2.5 * rng.uniform();
      m.shared_phase[j] = 2.0 * std::numbers::pi * rng.uniform();
    }
    m.force_map = randn(rng, spec.force_channels, l, 1.0);
    for (int i = 0; i < spec.force_channels; ++i) {
      const double l1 = m.force_map.row(i).cwiseAbs().sum();
      if (l1 > 0.0) m.force_map.row(i) *= 0.4 / l1;
    }
    m.force_bias = Vector::Constant(spec.force_channels, 0.5);
    return m;
  }

  Vector latent(int cls, double tau, double gain) const {
    const int l = static_cast<int>(shared_freq.size());
    Vector z(l);
    for (int j = 0; j < l; ++j) {
      const double zc = std::sin(2.0 * std::numbers::pi *
                                     class_freq[cls](j, 0) * tau +
                                 class_phase[cls][j]);
      const double zs = std::sin(
          2.0 * std::numbers::pi * shared_freq[j] * tau + shared_phase[j]);
      z[j] = (1.0 - gain) * zs + gain * zc;
    }
    return z;
  }

  Vector feature(const SynthSpec& spec, int cls, double tau,
                 double gain) const {
    return embedding * latent(cls, tau, gain) + gain * class_offset[cls];
  }
};

int planted_touch(const SynthSpec& spec, int length) {
  int tp = static_cast<int>(std::lround(spec.touch_fraction * length));
  return std::clamp(tp, 1, length - 2);
}

}  // namespace

SynthDataset synth_generate(const SynthSpec& spec) {
  if (spec.classes < 2) throw std::invalid_argument("synth_generate: need >= 2 classes");
  const SynthModel model = SynthModel::build(spec);
  // Structural draws and noise come from separate streams so the clean
  // trajectories are identical across noise settings at a fixed seed.
  Rng shape_rng(spec.seed ^ 0x5851f42d4c957f2dULL);
  Rng noise_rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);

  SynthDataset data;
  for (int c = 0; c < spec.classes; ++c) {
    data.label_names.push_back("action" + std::to_string(c));
  }
  int seq_index = 0;
  for (int c = 0; c < spec.classes; ++c) {
    for (int k = 0; k < spec.sequences_per_class; ++k, ++seq_index) {
      const int span = spec.max_length - spec.min_length + 1;
      const int length =
          spec.min_length + static_cast<int>(shape_rng.below(span));
      const int tp = planted_touch(spec, length);

      FeatureSequence seq;
      seq.label = c;
      seq.touching_point = tp;
      ForceTrace trace;
      if (spec.with_forces) {
        trace.sample_rate = 30.0;
        for (int ch = 0; ch < spec.force_channels; ++ch) {
          trace.channels.push_back("ch" + std::to_string(ch));
        }
        trace.values = Matrix(length, spec.force_channels);
        trace.normalized = true;
      }
      for (int t = 0; t < length; ++t) {
        const double tau = static_cast<double>(t) / (length - 1);
        const double gain = t < tp ? spec.pre_contact_gain : 1.0;
        Vector x = model.feature(spec, c, tau, gain);
        for (int j = 0; j < spec.dim; ++j) {
          x[j] += spec.noise * noise_rng.normal();
        }
        seq.frames.push_back(std::move(x));
        if (spec.with_forces) {
          Vector v = model.force_map * model.latent(c, tau, gain) +
                     model.force_bias;
          for (int ch = 0; ch < spec.force_channels; ++ch) {
            double s = v[ch] + spec.force_noise * noise_rng.normal();
            trace.values(t, ch) = std::clamp(s, 0.0, 1.0);
          }
        }
      }
      data.sequences.push_back(std::move(seq));
      data.subject_of.push_back(
          "subject" + std::to_string(seq_index % spec.subjects));
      if (spec.with_forces) data.forces.push_back(std::move(trace));
    }
  }
  return data;
}

std::vector<Vector> synth_clean_trajectory(const SynthSpec& spec, int cls,
                                           int length) {
  const SynthModel model = SynthModel::build(spec);
  std::vector<Vector> out;
  const int tp = planted_touch(spec, length);
  for (int t = 0; t < length; ++t) {
    const double tau = static_cast<double>(t) / (length - 1);
    const double gain = t < tp ? spec.pre_contact_gain : 1.0;
    out.push_back(model.feature(spec, cls, tau, gain));
  }
  return out;
}

void synth_write(const SynthDataset& data, const std::string& dir,
                 const std::string& manifest_path) {
  std::filesystem::create_directories(dir);
  DatasetManifest manifest;
  std::map<std::pair<std::string, int>, int> rep_counter;
  for (std::size_t i = 0; i < data.sequences.size(); ++i) {
    const auto& seq = data.sequences[i];
    ManifestRecord rec;
    rec.subject = data.subject_of[i];
    rec.object = "synthetic";
    rec.action = data.label_names[seq.label];
    rec.repetition = rep_counter[{rec.subject, seq.label}]++;
    rec.touching_point = seq.touching_point;
    const std::string stem = rec.subject + "_" + rec.action + "_r" +
                             std::to_string(rec.repetition);
    rec.feature_path = dir + "/" + stem + ".fseq";
    write_features(rec.feature_path, seq);
    if (!data.forces.empty()) {
      // Synthetic forces are stored as a pre-calibrated recording with an
      // identity-like transfer: volts chosen so to_forces() reproduces the
      // normalized values times f_max.
      rec.force_path = dir + "/" + stem + ".frec";
      const ForceTrace& trace = data.forces[i];
      ForceRecording fr;
      fr.sample_rate = trace.sample_rate;
      fr.channels = trace.channels;
      fr.calibration = SensorCalibration{};
      fr.volts = Matrix(trace.values.rows(), trace.values.cols());
      const auto& cal = fr.calibration;
      for (Eigen::Index r = 0; r < trace.values.rows(); ++r) {
        for (Eigen::Index ch = 0; ch < trace.values.cols(); ++ch) {
          // invert F = 4.448 * (c1 * v/(vin - v) - c2)
          const double f = trace.values(r, ch) * cal.f_max;
          const double ratio = f / 4.448 / cal.c1 + cal.c2;
          fr.volts(r, ch) = cal.v_in * ratio / (1.0 + ratio);
        }
      }
      write_recording(rec.force_path, fr);
    }
    manifest.records.push_back(std::move(rec));
  }
  save_manifest(manifest_path, manifest);
}

FeatureSequence fuse_modalities(const FeatureSequence& features,
                                const ForceTrace& forces) {
  if (features.length() != forces.frames()) {
    throw std::invalid_argument("fuse_modalities: frame count mismatch");
  }
  FeatureSequence out;
  out.label = features.label;
  out.touching_point = features.touching_point;
  const int d = features.dim();
  const int m = forces.channel_count();
  out.frames.reserve(features.frames.size());
  for (int t = 0; t < features.length(); ++t) {
    Vector fused(d + m);
    fused.head(d) = features.frames[t];
    fused.tail(m) = forces.values.row(t).transpose();
    out.frames.push_back(std::move(fused));
  }
  return out;
}

}  // namespace engine
