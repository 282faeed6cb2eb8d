#include "engine/eval.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <set>

#include "engine/inference.hpp"
#include "engine/io.hpp"

namespace engine {

std::vector<LosoFold> loso_splits(const std::vector<std::string>& subject_of) {
  std::set<std::string> subjects(subject_of.begin(), subject_of.end());
  if (subjects.size() < 2) {
    throw std::invalid_argument(
        "loso_splits: leave-one-subject-out needs >= 2 subjects");
  }
  std::vector<LosoFold> folds;
  for (const auto& subject : subjects) {
    LosoFold fold;
    fold.held_out_subject = subject;
    for (std::size_t i = 0; i < subject_of.size(); ++i) {
      (subject_of[i] == subject ? fold.test : fold.train)
          .push_back(static_cast<int>(i));
    }
    folds.push_back(std::move(fold));
  }
  return folds;
}

std::vector<LosoFold> loso_splits(const DatasetManifest& m) {
  std::vector<std::string> subjects;
  subjects.reserve(m.records.size());
  for (const auto& r : m.records) subjects.push_back(r.subject);
  return loso_splits(subjects);
}

namespace {

// Linear-interpolation resampling of one segment to a fixed length.
std::vector<double> resample(const double* data, int n, int target) {
  std::vector<double> out(target);
  if (n == 1) {
    std::fill(out.begin(), out.end(), data[0]);
    return out;
  }
  for (int k = 0; k < target; ++k) {
    const double pos =
        target == 1 ? 0.0 : static_cast<double>(k) * (n - 1) / (target - 1);
    const int lo = static_cast<int>(pos);
    const int hi = std::min(lo + 1, n - 1);
    const double frac = pos - lo;
    out[k] = (1.0 - frac) * data[lo] + frac * data[hi];
  }
  return out;
}

}  // namespace

AlignedCurves align_at_touching_point(const std::vector<SeriesWithTouch>& series,
                                      int l_pre, int l_post, int n_actions) {
  std::string offenders;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const int t_len = static_cast<int>(s.values.size());
    if (s.touching_point <= 0 || s.touching_point >= t_len) {
      offenders += (offenders.empty() ? "" : ", ") + std::to_string(i);
    }
  }
  if (!offenders.empty()) {
    throw std::invalid_argument(
        "align_at_touching_point: touching point missing or not strictly "
        "inside for sequences " + offenders);
  }

  AlignedCurves curves;
  curves.l_pre = l_pre;
  curves.l_post = l_post;
  curves.per_action.assign(n_actions,
                           std::vector<double>(l_pre + l_post, 0.0));
  curves.sequences_per_action.assign(n_actions, 0);
  curves.mean.assign(l_pre + l_post, 0.0);

  for (const auto& s : series) {
    const int t_len = static_cast<int>(s.values.size());
    const auto pre = resample(s.values.data(), s.touching_point, l_pre);
    const auto post = resample(s.values.data() + s.touching_point,
                               t_len - s.touching_point, l_post);
    for (int k = 0; k < l_pre; ++k) {
      curves.per_action[s.action][k] += pre[k];
      curves.mean[k] += pre[k];
    }
    for (int k = 0; k < l_post; ++k) {
      curves.per_action[s.action][l_pre + k] += post[k];
      curves.mean[l_pre + k] += post[k];
    }
    ++curves.sequences_per_action[s.action];
  }
  for (int a = 0; a < n_actions; ++a) {
    if (curves.sequences_per_action[a] == 0) continue;
    for (auto& v : curves.per_action[a]) v /= curves.sequences_per_action[a];
  }
  if (!series.empty()) {
    for (auto& v : curves.mean) v /= static_cast<double>(series.size());
  }
  return curves;
}

double OffsetReport::accuracy(int action, int offset_index) const {
  const int total = totals[action][offset_index];
  return total == 0 ? 0.0
                    : static_cast<double>(hits[action][offset_index]) / total;
}

double OffsetReport::overall_accuracy(int offset_index) const {
  int hit = 0, total = 0;
  for (std::size_t a = 0; a < hits.size(); ++a) {
    hit += hits[a][offset_index];
    total += totals[a][offset_index];
  }
  return total == 0 ? 0.0 : static_cast<double>(hit) / total;
}

namespace {

OffsetReport make_offset_report(const std::vector<int>& offsets,
                                int n_actions) {
  OffsetReport report;
  report.offsets = offsets;
  report.hits.assign(n_actions, std::vector<int>(offsets.size(), 0));
  report.totals.assign(n_actions, std::vector<int>(offsets.size(), 0));
  return report;
}

void accumulate_offsets(const Model& model,
                        const std::vector<FeatureSequence>& data,
                        OffsetReport& report) {
  for (const auto& seq : data) {
    if (seq.touching_point < 0) {
      throw std::invalid_argument("offset_accuracy: missing touching point");
    }
    const auto trajectory = belief_trajectory(model, seq);
    for (std::size_t oi = 0; oi < report.offsets.size(); ++oi) {
      int frame = seq.touching_point + report.offsets[oi];
      if (frame < 0) {
        ++report.skipped_before_start;
        continue;
      }
      if (frame >= seq.length()) {
        frame = seq.length() - 1;
        ++report.clamped_past_end;
      }
      ++report.totals[seq.label][oi];
      if (trajectory[frame].label == seq.label) ++report.hits[seq.label][oi];
    }
  }
}

}  // namespace

OffsetReport offset_accuracy(const Model& model,
                             const std::vector<FeatureSequence>& data,
                             const std::vector<int>& offsets) {
  int n_actions = 0;
  for (const auto& seq : data) n_actions = std::max(n_actions, seq.label + 1);
  OffsetReport report = make_offset_report(offsets, n_actions);
  accumulate_offsets(model, data, report);
  return report;
}

Matrix confusion_matrix(const std::vector<int>& predictions,
                        const std::vector<int>& labels, int n) {
  if (predictions.size() != labels.size()) {
    throw std::invalid_argument("confusion_matrix: length mismatch");
  }
  Matrix counts = Matrix::Zero(n, n);
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i] < 0 || predictions[i] >= n || labels[i] < 0 ||
        labels[i] >= n) {
      throw std::invalid_argument("confusion_matrix: label out of range");
    }
    counts(labels[i], predictions[i]) += 1.0;
  }
  for (int r = 0; r < n; ++r) {
    const double row_sum = counts.row(r).sum();
    if (row_sum > 0.0) counts.row(r) /= row_sum;
  }
  return counts;
}

Vector force_error(const ForceTrace& pred, const ForceTrace& truth) {
  if (pred.values.rows() != truth.values.rows() ||
      pred.values.cols() != truth.values.cols()) {
    throw std::invalid_argument("force_error: shape mismatch");
  }
  return (pred.values - truth.values)
      .cwiseAbs()
      .colwise()
      .mean()
      .transpose();
}

void write_accuracy_table(const std::string& path,
                          const std::vector<std::string>& row_names,
                          const std::vector<std::string>& col_names,
                          const Matrix& values) {
  io::AtomicFile file(path);
  auto& os = file.stream();
  os << "name";
  for (const auto& c : col_names) os << "," << c;
  os << "\n";
  for (std::size_t r = 0; r < row_names.size(); ++r) {
    os << row_names[r];
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      os << "," << values(static_cast<Eigen::Index>(r), c);
    }
    os << "\n";
  }
  file.commit();
}

void write_confusion_csv(const std::string& path,
                         const std::vector<std::string>& labels,
                         const Matrix& confusion) {
  write_accuracy_table(path, labels, labels, confusion);
}

void write_curves_csv(const std::string& path, const AlignedCurves& curves,
                      const std::vector<std::string>& action_names) {
  io::AtomicFile file(path);
  auto& os = file.stream();
  os << "aligned_index,is_post_contact";
  for (const auto& a : action_names) os << "," << a;
  os << ",mean\n";
  for (int k = 0; k < curves.length(); ++k) {
    os << k << "," << (k >= curves.l_pre ? 1 : 0);
    for (std::size_t a = 0; a < curves.per_action.size(); ++a) {
      os << "," << curves.per_action[a][k];
    }
    os << "," << curves.mean[k] << "\n";
  }
  file.commit();
}

namespace {

struct LoadedObject {
  std::string object;
  std::vector<std::string> actions;
  std::vector<FeatureSequence> sequences;
  std::vector<std::string> subject_of;
  std::vector<const ManifestRecord*> records;
};

LoadedObject load_object(const DatasetManifest& manifest,
                         const std::string& object) {
  LoadedObject out;
  out.object = object;
  out.actions = manifest.actions_for(object);
  for (const auto& r : manifest.records) {
    if (r.object != object) continue;
    out.sequences.push_back(load_record(manifest, r));
    out.subject_of.push_back(r.subject);
    out.records.push_back(&r);
  }
  return out;
}

std::vector<FeatureSequence> select(const std::vector<FeatureSequence>& all,
                                    const std::vector<int>& idx) {
  std::vector<FeatureSequence> out;
  out.reserve(idx.size());
  for (const int i : idx) out.push_back(all[i]);
  return out;
}

}  // namespace

EvalResult run_classification_eval(const DatasetManifest& manifest,
                                   const EvalConfig& cfg,
                                   const std::string& out_dir) {
  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);
  EvalResult result;
  double accuracy_sum = 0.0;

  for (const auto& object : manifest.objects()) {
    const LoadedObject obj = load_object(manifest, object);
    const int n_actions = static_cast<int>(obj.actions.size());
    const auto folds = loso_splits(obj.subject_of);

    // Train all folds (concurrently when allowed), then evaluate in fold
    // order so outputs are deterministic.
    std::vector<Model> fold_models(folds.size());
    auto train_fold = [&](std::size_t f) {
      auto [model, log] = train_classifier(select(obj.sequences, folds[f].train),
                                           obj.actions, cfg.train);
      (void)log;
      return model;
    };
    if (cfg.parallel_folds) {
      std::vector<std::future<Model>> futures;
      for (std::size_t f = 0; f < folds.size(); ++f) {
        futures.push_back(
            std::async(std::launch::async, train_fold, f));
      }
      for (std::size_t f = 0; f < folds.size(); ++f) {
        fold_models[f] = futures[f].get();
      }
    } else {
      for (std::size_t f = 0; f < folds.size(); ++f) {
        fold_models[f] = train_fold(f);
      }
    }

    ObjectEvalResult res;
    res.object = object;
    res.actions = obj.actions;
    res.offsets = make_offset_report(cfg.offsets, n_actions);
    std::vector<int> predictions, labels;
    std::vector<SeriesWithTouch> accuracy_series, uncertainty_series;

    for (std::size_t f = 0; f < folds.size(); ++f) {
      const auto test = select(obj.sequences, folds[f].test);
      for (const auto& seq : test) {
        predictions.push_back(classify_sequence(fold_models[f], seq).label);
        labels.push_back(seq.label);
        if (seq.touching_point > 0 &&
            seq.touching_point < seq.length()) {
          const auto trajectory = belief_trajectory(fold_models[f], seq);
          SeriesWithTouch acc{{}, seq.touching_point, seq.label};
          SeriesWithTouch unc{{}, seq.touching_point, seq.label};
          for (const auto& frame : trajectory) {
            acc.values.push_back(frame.label == seq.label ? 1.0 : 0.0);
            unc.values.push_back(frame.uncertainty);
          }
          accuracy_series.push_back(std::move(acc));
          uncertainty_series.push_back(std::move(unc));
        }
      }
      accumulate_offsets(fold_models[f], test, res.offsets);
    }

    res.confusion = confusion_matrix(predictions, labels, n_actions);
    res.per_action_accuracy.assign(n_actions, 0.0);
    std::vector<int> per_action_total(n_actions, 0);
    int correct = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
      ++per_action_total[labels[i]];
      if (predictions[i] == labels[i]) {
        ++correct;
        res.per_action_accuracy[labels[i]] += 1.0;
      }
    }
    for (int a = 0; a < n_actions; ++a) {
      if (per_action_total[a] > 0) {
        res.per_action_accuracy[a] /= per_action_total[a];
      }
    }
    res.accuracy = predictions.empty()
                       ? 0.0
                       : static_cast<double>(correct) / predictions.size();
    if (!accuracy_series.empty()) {
      res.accuracy_curves = align_at_touching_point(
          accuracy_series, cfg.l_pre, cfg.l_post, n_actions);
      res.uncertainty_curves = align_at_touching_point(
          uncertainty_series, cfg.l_pre, cfg.l_post, n_actions);
    }

    if (!out_dir.empty()) {
      const std::string prefix = out_dir + "/" + object;
      Matrix acc_table(n_actions + 1, 1);
      std::vector<std::string> rows = obj.actions;
      for (int a = 0; a < n_actions; ++a) {
        acc_table(a, 0) = res.per_action_accuracy[a];
      }
      rows.push_back("average");
      acc_table(n_actions, 0) = res.accuracy;
      write_accuracy_table(prefix + "_accuracy.csv", rows, {"accuracy"},
                           acc_table);
      write_confusion_csv(prefix + "_confusion.csv", obj.actions,
                          res.confusion);
      if (!accuracy_series.empty()) {
        write_curves_csv(prefix + "_accuracy_curves.csv", res.accuracy_curves,
                         obj.actions);
        write_curves_csv(prefix + "_uncertainty_curves.csv",
                         res.uncertainty_curves, obj.actions);
      }
      Matrix offsets_table(n_actions, cfg.offsets.size());
      std::vector<std::string> offset_cols;
      for (std::size_t oi = 0; oi < cfg.offsets.size(); ++oi) {
        offset_cols.push_back("offset_" + std::to_string(cfg.offsets[oi]));
        for (int a = 0; a < n_actions; ++a) {
          offsets_table(a, oi) = res.offsets.accuracy(a, oi);
        }
      }
      write_accuracy_table(prefix + "_offset_accuracy.csv", obj.actions,
                           offset_cols, offsets_table);
      io::AtomicFile skip(prefix + "_skip_report.txt");
      skip.stream() << "skipped_before_start=" << res.offsets.skipped_before_start
                    << "\nclamped_past_end=" << res.offsets.clamped_past_end
                    << "\n";
      skip.commit();
    }

    accuracy_sum += res.accuracy;
    result.objects.push_back(std::move(res));
  }
  result.average_accuracy =
      result.objects.empty() ? 0.0
                             : accuracy_sum / result.objects.size();
  if (!out_dir.empty()) {
    Matrix summary(result.objects.size() + 1, 1);
    std::vector<std::string> rows;
    for (std::size_t i = 0; i < result.objects.size(); ++i) {
      rows.push_back(result.objects[i].object);
      summary(static_cast<Eigen::Index>(i), 0) = result.objects[i].accuracy;
    }
    rows.push_back("average");
    summary(static_cast<Eigen::Index>(result.objects.size()), 0) =
        result.average_accuracy;
    write_accuracy_table(out_dir + "/summary_accuracy.csv", rows,
                         {"accuracy"}, summary);
  }
  return result;
}

ForceEvalResult run_force_eval(const DatasetManifest& manifest,
                               const EvalConfig& cfg,
                               const std::string& out_dir) {
  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);
  ForceEvalResult result;

  struct Accum {
    Vector abs_sum;
    long frames = 0;
  };
  std::map<std::string, Accum> per_action;
  double overall_abs = 0.0;
  long overall_count = 0;

  for (const auto& object : manifest.objects()) {
    LoadedObject obj = load_object(manifest, object);
    std::vector<ForceTrace> raw_forces;
    for (const auto* rec : obj.records) {
      if (rec->force_path.empty()) {
        throw std::invalid_argument("run_force_eval: record without forces: " +
                                    rec->feature_path);
      }
      raw_forces.push_back(read_recording(rec->force_path).to_forces());
    }
    if (result.channels.empty()) result.channels = raw_forces[0].channels;
    const int m = raw_forces[0].channel_count();

    const auto folds = loso_splits(obj.subject_of);
    for (const auto& fold : folds) {
      // Normalization bounds from the training split only.
      Vector lo = Vector::Constant(m, std::numeric_limits<double>::max());
      Vector hi = Vector::Constant(m, std::numeric_limits<double>::lowest());
      for (const int i : fold.train) {
        lo = lo.cwiseMin(raw_forces[i].values.colwise().minCoeff().transpose());
        hi = hi.cwiseMax(raw_forces[i].values.colwise().maxCoeff().transpose());
      }
      NormParams norm{lo, hi};

      std::vector<FeatureSequence> train_x = select(obj.sequences, fold.train);
      std::vector<ForceTrace> train_v;
      for (const int i : fold.train) {
        train_v.push_back(normalize(raw_forces[i], norm).first);
      }
      auto [model, log] = train_regressor(train_x, train_v, cfg.train);
      (void)log;
      model.force_norm = norm;

      for (const int i : fold.test) {
        const ForceTrace pred = estimate_forces(model, obj.sequences[i]);
        const ForceTrace truth = normalize(raw_forces[i], norm).first;
        const Vector mae = force_error(pred, truth);
        auto& acc = per_action[object + "/" + obj.records[i]->action];
        if (acc.frames == 0) acc.abs_sum = Vector::Zero(m);
        acc.abs_sum += mae * truth.frames();
        acc.frames += truth.frames();
        overall_abs += mae.sum() * truth.frames();
        overall_count += truth.frames() * m;
      }
    }
  }

  result.actions.clear();
  result.per_action_channel_mae =
      Matrix(per_action.size(), result.channels.size());
  int row = 0;
  for (const auto& [action, acc] : per_action) {
    result.actions.push_back(action);
    result.per_action_channel_mae.row(row) =
        (acc.abs_sum / acc.frames).transpose();
    ++row;
  }
  result.overall_mae =
      overall_count == 0 ? 0.0 : overall_abs / overall_count;

  if (!out_dir.empty()) {
    write_accuracy_table(out_dir + "/force_errors.csv", result.actions,
                         result.channels, result.per_action_channel_mae);
  }
  return result;
}

}  // namespace engine
