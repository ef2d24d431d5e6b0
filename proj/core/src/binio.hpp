#pragma once

// Little-endian binary stream helpers shared by the model file writers.

#include <Eigen/Dense>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace mvd::binio {

static_assert(std::endian::native == std::endian::little,
              "model files are little-endian; big-endian hosts are unsupported");

inline void write_raw(std::ostream& out, const void* p, size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  if (!out) throw std::runtime_error("write failed");
}

inline void read_raw(std::istream& in, void* p, size_t n) {
  in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<size_t>(in.gcount()) != n) throw std::runtime_error("truncated model file");
}

inline void write_u32(std::ostream& out, std::uint32_t v) { write_raw(out, &v, 4); }
inline void write_i64(std::ostream& out, std::int64_t v) { write_raw(out, &v, 8); }
inline void write_u64(std::ostream& out, std::uint64_t v) { write_raw(out, &v, 8); }
inline void write_f64(std::ostream& out, double v) { write_raw(out, &v, 8); }

inline std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v;
  read_raw(in, &v, 4);
  return v;
}
inline std::int64_t read_i64(std::istream& in) {
  std::int64_t v;
  read_raw(in, &v, 8);
  return v;
}
inline std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v;
  read_raw(in, &v, 8);
  return v;
}
inline double read_f64(std::istream& in) {
  double v;
  read_raw(in, &v, 8);
  return v;
}

inline void write_string(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  write_raw(out, s.data(), s.size());
}

inline std::string read_string(std::istream& in) {
  std::uint32_t n = read_u32(in);
  std::string s(n, '\0');
  if (n) read_raw(in, s.data(), n);
  return s;
}

inline void write_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
  write_i64(out, m.rows());
  write_i64(out, m.cols());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) write_f64(out, m(r, c));
  }
}

inline Eigen::MatrixXd read_matrix(std::istream& in) {
  std::int64_t rows = read_i64(in);
  std::int64_t cols = read_i64(in);
  if (rows < 0 || cols < 0 || rows * cols > (1LL << 32)) {
    throw std::runtime_error("corrupt matrix header");
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = read_f64(in);
  }
  return m;
}

inline void expect_magic(std::istream& in, const char (&magic)[5]) {
  char buf[4];
  read_raw(in, buf, 4);
  if (std::memcmp(buf, magic, 4) != 0) throw std::runtime_error("bad model file magic");
}

}  // namespace mvd::binio
