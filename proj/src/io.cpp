#include "engine/io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>

namespace engine::io {

namespace {

static_assert(std::endian::native == std::endian::little,
              "on-disk formats are little-endian; byte swapping not implemented");

template <typename T>
void write_raw(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& is, const std::string& ctx) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw FormatError("truncated read: " + ctx);
  return v;
}

}  // namespace

void write_u32(std::ostream& os, std::uint32_t v) { write_raw(os, v); }
void write_i32(std::ostream& os, std::int32_t v) { write_raw(os, v); }
void write_f32(std::ostream& os, float v) { write_raw(os, v); }
void write_f64(std::ostream& os, double v) { write_raw(os, v); }

void write_string(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void write_matrix_f64(std::ostream& os, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      write_f64(os, m(i, j));
    }
  }
}

void write_vector_f64(std::ostream& os, const Vector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) write_f64(os, v[i]);
}

std::uint32_t read_u32(std::istream& is, const std::string& ctx) {
  return read_raw<std::uint32_t>(is, ctx);
}
std::int32_t read_i32(std::istream& is, const std::string& ctx) {
  return read_raw<std::int32_t>(is, ctx);
}
float read_f32(std::istream& is, const std::string& ctx) {
  return read_raw<float>(is, ctx);
}
double read_f64(std::istream& is, const std::string& ctx) {
  return read_raw<double>(is, ctx);
}

std::string read_string(std::istream& is, const std::string& ctx) {
  const std::uint32_t len = read_u32(is, ctx + " length");
  if (len > (1u << 20)) throw FormatError("unreasonable string length: " + ctx);
  std::string s(len, '\0');
  is.read(s.data(), len);
  if (!is) throw FormatError("truncated read: " + ctx);
  return s;
}

Matrix read_matrix_f64(std::istream& is, int rows, int cols,
                       const std::string& ctx) {
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      m(i, j) = read_f64(is, ctx);
    }
  }
  return m;
}

Vector read_vector_f64(std::istream& is, int dim, const std::string& ctx) {
  Vector v(dim);
  for (int i = 0; i < dim; ++i) v[i] = read_f64(is, ctx);
  return v;
}

void expect_magic(std::istream& is, const std::string& magic,
                  const std::string& path) {
  std::string found(magic.size(), '\0');
  is.read(found.data(), static_cast<std::streamsize>(magic.size()));
  if (!is || found != magic) {
    throw FormatError(path + ": bad magic (expected \"" + magic + "\")");
  }
}

void write_magic(std::ostream& os, const std::string& magic) {
  os.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

AtomicFile::AtomicFile(std::string path)
    : path_(std::move(path)), tmp_path_(path_ + ".tmp") {
  stream_.open(tmp_path_, std::ios::binary | std::ios::trunc);
  if (!stream_) throw std::runtime_error("cannot open for writing: " + tmp_path_);
}

AtomicFile::~AtomicFile() {
  if (!committed_) {
    stream_.close();
    std::error_code ec;
    std::filesystem::remove(tmp_path_, ec);
  }
}

void AtomicFile::commit() {
  stream_.close();
  if (!stream_.good() && stream_.fail()) {
    throw std::runtime_error("write failed: " + tmp_path_);
  }
  std::filesystem::rename(tmp_path_, path_);
  committed_ = true;
}

}  // namespace engine::io
