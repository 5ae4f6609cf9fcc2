#pragma once

#include <Eigen/Dense>

#include <bit>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace lapal {

static_assert(std::endian::native == std::endian::little,
              "binary formats are little-endian; big-endian hosts need byte swapping");

// Append-only little-endian byte sink.
class BinaryWriter {
 public:
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void bytes(std::string_view s);
  void str(std::string_view s);  // u32 length prefix
  // Row-major order, independent of Eigen's storage order.
  void matrix(const Eigen::MatrixXd& m);
  void vector(const Eigen::VectorXd& v);

  const std::string& data() const { return buf_; }

 private:
  std::string buf_;
};

// Bounds-checked reader over a byte buffer; throws IoError on truncation.
class BinaryReader {
 public:
  explicit BinaryReader(std::string_view data) : data_(data) {}

  std::uint32_t u32();
  std::uint64_t u64();
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string bytes(std::size_t n);
  std::string str();
  void matrix_into(Eigen::MatrixXd& m);  // m must already have its shape
  void vector_into(Eigen::VectorXd& v);

  bool at_end() const { return pos_ == data_.size(); }
  std::size_t position() const { return pos_; }

 private:
  void need(std::size_t n) const;

  std::string_view data_;
  std::size_t pos_ = 0;
};

// FNV-1a, 64-bit.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL);
std::uint64_t digest_matrix(const Eigen::MatrixXd& m, std::uint64_t h);
std::uint64_t digest_vector(const Eigen::VectorXd& v, std::uint64_t h);

std::string read_file(const std::string& path);
// Writes to "<path>.tmp" and renames over the destination.
void write_file_atomic(const std::string& path, std::string_view contents);

std::string hex64(std::uint64_t v);

}  // namespace lapal
