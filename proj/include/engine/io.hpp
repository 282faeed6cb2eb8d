#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>

#include "engine/numerics.hpp"

namespace engine {

/// Malformed or truncated data file; the message names the file and field.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace io {

// All on-disk integers and reals are little-endian.

void write_u32(std::ostream& os, std::uint32_t v);
void write_i32(std::ostream& os, std::int32_t v);
void write_f32(std::ostream& os, float v);
void write_f64(std::ostream& os, double v);
void write_string(std::ostream& os, const std::string& s);
void write_matrix_f64(std::ostream& os, const Matrix& m);  // row-major
void write_vector_f64(std::ostream& os, const Vector& v);

std::uint32_t read_u32(std::istream& is, const std::string& ctx);
std::int32_t read_i32(std::istream& is, const std::string& ctx);
float read_f32(std::istream& is, const std::string& ctx);
double read_f64(std::istream& is, const std::string& ctx);
std::string read_string(std::istream& is, const std::string& ctx);
Matrix read_matrix_f64(std::istream& is, int rows, int cols,
                       const std::string& ctx);
Vector read_vector_f64(std::istream& is, int dim, const std::string& ctx);

void expect_magic(std::istream& is, const std::string& magic,
                  const std::string& path);
void write_magic(std::ostream& os, const std::string& magic);

/// Writes to `path + ".tmp"` and renames into place on commit, so a failed
/// run never leaves a partial file at the target path.
class AtomicFile {
 public:
  explicit AtomicFile(std::string path);
  ~AtomicFile();

  std::ofstream& stream() { return stream_; }
  void commit();

 private:
  std::string path_;
  std::string tmp_path_;
  std::ofstream stream_;
  bool committed_ = false;
};

}  // namespace io
}  // namespace engine
