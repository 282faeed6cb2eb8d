#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "engine/force_signal.hpp"
#include "engine/numerics.hpp"

namespace engine {

/// One recorded action: per-frame feature vectors plus optional annotations.
struct FeatureSequence {
  std::vector<Vector> frames;
  int label = -1;           // -1 when unlabeled
  int touching_point = -1;  // frame of first hand-object contact, -1 if absent

  int length() const { return static_cast<int>(frames.size()); }
  int dim() const { return frames.empty() ? 0 : static_cast<int>(frames[0].size()); }
};

/// Binary feature container: magic "FSEQ", version, d, T, touching point
/// (-1 if absent), label id (-1 if absent), then T*d little-endian f32
/// values, frame-major.
void write_features(const std::string& path, const FeatureSequence& seq);
FeatureSequence read_features(const std::string& path);

struct ManifestRecord {
  std::string subject;
  std::string object;
  std::string action;
  int repetition = 0;
  std::string feature_path;
  std::string force_path;   // empty if absent
  int touching_point = -1;  // -1 if absent
};

/// Index over subjects x objects x actions x repetitions. Text format:
/// one record per line of space-separated key=value pairs; '#' comments.
struct DatasetManifest {
  std::vector<ManifestRecord> records;

  std::vector<std::string> subjects() const;
  std::vector<std::string> objects() const;
  /// Sorted distinct action names for one object; label ids are indices
  /// into this list.
  std::vector<std::string> actions_for(const std::string& object) const;
};

DatasetManifest load_manifest(const std::string& path);
void save_manifest(const std::string& path, const DatasetManifest& m);

/// Loads one record's features, applying the manifest's label id (within
/// the object's action set) and touching point.
FeatureSequence load_record(const DatasetManifest& m, const ManifestRecord& r);

/// Configuration of the seeded synthetic generator. Each class follows a
/// distinct smooth latent trajectory (a small sinusoid bank) embedded in d
/// dimensions plus Gaussian noise. Before the planted touching point the
/// class signal is attenuated to pre_contact_gain, so sequences start
/// ambiguous and become identifiable after contact.
struct SynthSpec {
  int classes = 5;
  int dim = 32;
  int sequences_per_class = 40;
  int subjects = 5;
  int min_length = 60;
  int max_length = 90;
  int latent_dim = 4;
  double noise = 0.05;
  double separation = 1.0;       // distance between class feature means
  double touch_fraction = 0.35;  // touching point position within [0,1]
  double pre_contact_gain = 0.1;
  bool with_forces = false;
  int force_channels = 4;
  double force_noise = 0.0;
  std::uint64_t seed = 1;
};

struct SynthDataset {
  std::vector<FeatureSequence> sequences;    // labels and touching points set
  std::vector<std::string> subject_of;       // aligned with sequences
  std::vector<ForceTrace> forces;            // aligned; empty if !with_forces
  std::vector<std::string> label_names;
};

SynthDataset synth_generate(const SynthSpec& spec);

/// Noise-free latent feature trajectory of one class at given length, as
/// produced by the generator; used for nearest-trajectory oracles.
std::vector<Vector> synth_clean_trajectory(const SynthSpec& spec, int cls,
                                           int length);

/// Writes a synthetic dataset to disk (FSEQ files plus manifest).
void synth_write(const SynthDataset& data, const std::string& dir,
                 const std::string& manifest_path);

/// Per-frame concatenation of features and force channels.
FeatureSequence fuse_modalities(const FeatureSequence& features,
                                const ForceTrace& forces);

}  // namespace engine
