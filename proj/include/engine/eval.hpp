#pragma once

#include <map>
#include <string>
#include <vector>

#include "engine/dataset.hpp"
#include "engine/model.hpp"
#include "engine/training.hpp"

namespace engine {

struct LosoFold {
  std::string held_out_subject;
  std::vector<int> train;  // record indices
  std::vector<int> test;
};

/// One fold per subject; test = that subject's records, train = the rest.
std::vector<LosoFold> loso_splits(const std::vector<std::string>& subject_of);
std::vector<LosoFold> loso_splits(const DatasetManifest& m);

/// One per-frame value series (accuracy flag, uncertainty, ...) with its
/// touching point and action id.
struct SeriesWithTouch {
  std::vector<double> values;
  int touching_point;
  int action;
};

/// Per-action mean curves after resampling each series' pre-contact
/// segment to l_pre points and post-contact segment to l_post (linear
/// interpolation). Aligned index l_pre is the touching point.
struct AlignedCurves {
  int l_pre = 0;
  int l_post = 0;
  std::vector<std::vector<double>> per_action;  // action x (l_pre + l_post)
  std::vector<int> sequences_per_action;
  std::vector<double> mean;  // across all series

  int length() const { return l_pre + l_post; }
};

AlignedCurves align_at_touching_point(const std::vector<SeriesWithTouch>& series,
                                      int l_pre, int l_post, int n_actions);

/// Accuracy of the streaming prediction taken at touching point + offset.
struct OffsetReport {
  std::vector<int> offsets;
  // per action: hit/total count per offset
  std::vector<std::vector<int>> hits;    // action x offset
  std::vector<std::vector<int>> totals;  // action x offset
  int skipped_before_start = 0;  // offset fell before frame 0
  int clamped_past_end = 0;      // offset fell past the last frame

  double accuracy(int action, int offset_index) const;
  double overall_accuracy(int offset_index) const;
};

OffsetReport offset_accuracy(const Model& model,
                             const std::vector<FeatureSequence>& data,
                             const std::vector<int>& offsets);

/// Row-normalized confusion counts; all-zero rows for absent classes.
Matrix confusion_matrix(const std::vector<int>& predictions,
                        const std::vector<int>& labels, int n);

/// Per-channel mean absolute error over frames.
Vector force_error(const ForceTrace& pred, const ForceTrace& truth);

// CSV table writers (shapes of the reported accuracy / force-error tables).

void write_accuracy_table(const std::string& path,
                          const std::vector<std::string>& row_names,
                          const std::vector<std::string>& col_names,
                          const Matrix& values);
void write_confusion_csv(const std::string& path,
                         const std::vector<std::string>& labels,
                         const Matrix& confusion);
void write_curves_csv(const std::string& path, const AlignedCurves& curves,
                      const std::vector<std::string>& action_names);

/// Full leave-one-subject-out evaluation over one manifest, per object.
struct EvalConfig {
  TrainConfig train;
  std::vector<int> offsets = {-10, 0, 10, 25};
  int l_pre = 50;
  int l_post = 100;
  int convergence_window = 5;
  bool parallel_folds = true;
};

struct ObjectEvalResult {
  std::string object;
  std::vector<std::string> actions;
  std::vector<double> per_action_accuracy;
  double accuracy = 0.0;
  Matrix confusion;
  AlignedCurves accuracy_curves;
  AlignedCurves uncertainty_curves;
  OffsetReport offsets;
};

struct EvalResult {
  std::vector<ObjectEvalResult> objects;
  double average_accuracy = 0.0;
};

/// Trains and tests per object across LOSO folds; writes the metric
/// tables, curves, and a skip report under out_dir when nonempty.
EvalResult run_classification_eval(const DatasetManifest& manifest,
                                   const EvalConfig& cfg,
                                   const std::string& out_dir);

struct ForceEvalResult {
  std::vector<std::string> channels;
  // per action: per-channel MAE in normalized units
  std::vector<std::string> actions;
  Matrix per_action_channel_mae;  // action x M
  double overall_mae = 0.0;
};

/// LOSO force-regression evaluation; requires force recordings in the
/// manifest. Normalization bounds come from each fold's training split.
ForceEvalResult run_force_eval(const DatasetManifest& manifest,
                               const EvalConfig& cfg,
                               const std::string& out_dir);

}  // namespace engine
