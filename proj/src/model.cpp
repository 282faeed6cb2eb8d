#include "engine/model.hpp"

#include <fstream>

#include "engine/io.hpp"

namespace engine {

namespace {

void write_blocks(std::ostream& os, std::vector<Eigen::Map<Vector>> blocks) {
  for (const auto& b : blocks) {
    for (Eigen::Index i = 0; i < b.size(); ++i) io::write_f64(os, b[i]);
  }
}

void read_blocks(std::istream& is, std::vector<Eigen::Map<Vector>> blocks,
                 const std::string& ctx) {
  for (auto& b : blocks) {
    for (Eigen::Index i = 0; i < b.size(); ++i) {
      b[i] = io::read_f64(is, ctx);
    }
  }
}

}  // namespace

void save_model(const std::string& path, const Model& model) {
  io::AtomicFile file(path);
  auto& os = file.stream();
  io::write_magic(os, "RMDL");
  io::write_u32(os, 1);
  io::write_u32(os, kModelTagRecurrent);

  io::write_u32(os, static_cast<std::uint32_t>(model.projection.W_p.cols()));
  io::write_u32(os, static_cast<std::uint32_t>(model.projection.W_p.rows()));
  io::write_u32(os, static_cast<std::uint32_t>(model.cell.hidden_dim));
  io::write_u32(os, model.classifier ? model.classifier->label_count() : 0);
  io::write_u32(os, model.regressor ? model.regressor->channel_count() : 0);
  io::write_u32(os, model.force_norm ? 1 : 0);

  io::write_u32(os, static_cast<std::uint32_t>(model.label_names.size()));
  for (const auto& name : model.label_names) io::write_string(os, name);
  io::write_u32(os, static_cast<std::uint32_t>(model.channel_names.size()));
  for (const auto& name : model.channel_names) io::write_string(os, name);

  Model& m = const_cast<Model&>(model);  // blocks() needs mutable views
  write_blocks(os, m.projection.blocks());
  write_blocks(os, m.cell.blocks());
  if (m.classifier) write_blocks(os, m.classifier->blocks());
  if (m.regressor) write_blocks(os, m.regressor->blocks());
  if (model.force_norm) {
    io::write_vector_f64(os, model.force_norm->min);
    io::write_vector_f64(os, model.force_norm->max);
  }
  file.commit();
}

Model load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError(path + ": cannot open");
  io::expect_magic(is, "RMDL", path);
  const auto version = io::read_u32(is, path + ": version");
  if (version != 1) throw FormatError(path + ": unsupported version");
  const auto tag = io::read_u32(is, path + ": type tag");
  if (tag != kModelTagRecurrent) {
    throw FormatError(path + ": not a recurrent model container");
  }

  const auto in_dim = io::read_u32(is, path + ": input dim");
  const auto proj_dim = io::read_u32(is, path + ": projection dim");
  const auto hidden = io::read_u32(is, path + ": hidden dim");
  const auto labels = io::read_u32(is, path + ": label count");
  const auto channels = io::read_u32(is, path + ": channel count");
  const auto has_norm = io::read_u32(is, path + ": norm flag");

  Model model;
  model.projection = ProjectionParams::zeros(in_dim, proj_dim);
  model.cell = CellParams::zeros(proj_dim, hidden);
  if (labels > 0) model.classifier = ClassifierHead::zeros(hidden, labels);
  if (channels > 0) model.regressor = RegressorHead::zeros(hidden, channels);

  const auto n_labels = io::read_u32(is, path + ": label name count");
  for (std::uint32_t i = 0; i < n_labels; ++i) {
    model.label_names.push_back(io::read_string(is, path + ": label name"));
  }
  const auto n_chan = io::read_u32(is, path + ": channel name count");
  for (std::uint32_t i = 0; i < n_chan; ++i) {
    model.channel_names.push_back(io::read_string(is, path + ": channel name"));
  }

  read_blocks(is, model.projection.blocks(), path + ": projection");
  read_blocks(is, model.cell.blocks(), path + ": cell");
  if (model.classifier) {
    read_blocks(is, model.classifier->blocks(), path + ": classifier");
  }
  if (model.regressor) {
    read_blocks(is, model.regressor->blocks(), path + ": regressor");
  }
  if (has_norm) {
    NormParams norm;
    norm.min = io::read_vector_f64(is, channels, path + ": norm min");
    norm.max = io::read_vector_f64(is, channels, path + ": norm max");
    model.force_norm = std::move(norm);
  }
  return model;
}

std::uint32_t peek_model_tag(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError(path + ": cannot open");
  io::expect_magic(is, "RMDL", path);
  io::read_u32(is, path + ": version");
  return io::read_u32(is, path + ": type tag");
}

}  // namespace engine
