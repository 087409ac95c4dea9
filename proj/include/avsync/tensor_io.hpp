#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "avsync/common.hpp"
#include "avsync/tensor.hpp"

// Binary tensor container: u32 rank, u64 extents, then raw little-endian
// 32-bit floats. Frame files, feature dumps and checkpoint entries all share
// this layout.
namespace avsync::io {

inline void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline void write_f32_array(std::ostream& os, const float* data, std::size_t n) {
  static_assert(sizeof(float) == 4);
  // x86 and every target this builds on is little-endian; raw write matches
  // the wire format.
  os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * 4));
}

inline std::uint32_t read_u32(std::istream& is, const std::string& path) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  check(is.good() || is.gcount() == 4, cat(path, ": truncated (expected 4 more bytes)"));
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

inline std::uint64_t read_u64(std::istream& is, const std::string& path) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  check(is.good() || is.gcount() == 8, cat(path, ": truncated (expected 8 more bytes)"));
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline void read_f32_array(std::istream& is, float* data, std::size_t n, const std::string& path) {
  is.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * 4));
  check(static_cast<std::size_t>(is.gcount()) == n * 4,
        cat(path, ": truncated (expected ", n * 4, " bytes of tensor data, got ", is.gcount(),
            ")"));
}

inline void write_tensor_file(const std::string& path, const Shape& shape,
                              const std::vector<float>& data) {
  check(shape_numel(shape) == data.size(), cat("tensor file ", path, ": shape/data mismatch"));
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  check(os.good(), cat("cannot open for write: ", path));
  write_u32(os, static_cast<std::uint32_t>(shape.size()));
  for (auto e : shape) write_u64(os, e);
  write_f32_array(os, data.data(), data.size());
  check(os.good(), cat("write failed: ", path));
}

inline Shape read_tensor_header(std::istream& is, const std::string& path) {
  const std::uint32_t rank = read_u32(is, path);
  check(rank <= 8, cat(path, ": implausible tensor rank ", rank));
  Shape shape(rank);
  for (auto& e : shape) e = static_cast<std::size_t>(read_u64(is, path));
  return shape;
}

inline std::pair<Shape, std::vector<float>> read_tensor_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  check(is.good(), cat("cannot open: ", path));
  Shape shape = read_tensor_header(is, path);
  std::vector<float> data(shape_numel(shape));
  read_f32_array(is, data.data(), data.size(), path);
  return {std::move(shape), std::move(data)};
}

// Reads a contiguous element range [offset, offset+count) without loading the
// whole file; the training loop uses this to pull single clips out of
// per-video frame files.
inline std::pair<Shape, std::vector<float>> read_tensor_slice(const std::string& path,
                                                              std::size_t offset,
                                                              std::size_t count) {
  std::ifstream is(path, std::ios::binary);
  check(is.good(), cat("cannot open: ", path));
  Shape shape = read_tensor_header(is, path);
  check(offset + count <= shape_numel(shape),
        cat(path, ": slice [", offset, ", ", offset + count, ") exceeds ", shape_numel(shape),
            " elements"));
  is.seekg(static_cast<std::streamoff>(4 + 8 * shape.size() + offset * 4), std::ios::beg);
  std::vector<float> data(count);
  read_f32_array(is, data.data(), count, path);
  return {std::move(shape), std::move(data)};
}

}  // namespace avsync::io
