#pragma once

#include <optional>
#include <string>
#include <vector>

#include "engine/force_signal.hpp"
#include "engine/heads.hpp"
#include "engine/recurrent.hpp"

namespace engine {

/// Full sequence model: projection + gated cell + one or both heads, plus
/// the metadata needed to run it (label names, force channel names, and
/// the training-set force normalization).
struct Model {
  ProjectionParams projection;
  CellParams cell;
  std::optional<ClassifierHead> classifier;
  std::optional<RegressorHead> regressor;
  std::vector<std::string> label_names;
  std::vector<std::string> channel_names;
  std::optional<NormParams> force_norm;

  int input_dim() const { return static_cast<int>(projection.W_p.cols()); }
  int hidden_dim() const { return cell.hidden_dim; }
};

/// Model container ("RMDL"): magic, version, type tag, dims, metadata,
/// then every parameter block in declaration order as little-endian f64,
/// matrices row-major. Written atomically.
void save_model(const std::string& path, const Model& model);
Model load_model(const std::string& path);

// Container type tags; baseline models reuse the same envelope.
inline constexpr std::uint32_t kModelTagRecurrent = 0;
inline constexpr std::uint32_t kModelTagHmmBank = 1;
inline constexpr std::uint32_t kModelTagWindowClassifier = 2;

/// Reads just the type tag of a container file.
std::uint32_t peek_model_tag(const std::string& path);

}  // namespace engine
