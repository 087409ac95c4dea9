#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "avsync/tensor_io.hpp"

namespace avsync {

// Checkpoint container: magic "AVTS", format version u32, parameter count
// u64, then per entry: u32 name length, UTF-8 name, u32 rank, u64 extents,
// raw little-endian f32 data. Optimizer state and run metadata follow in the
// same layout under the section tags "OPTM" and "META".
constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Shape shape;
  std::vector<float> data;
};

struct Checkpoint {
  std::vector<NamedTensor> params;
  std::vector<NamedTensor> optim;
  std::vector<NamedTensor> meta;

  const NamedTensor* find(const std::vector<NamedTensor>& sec, const std::string& name) const {
    for (const auto& t : sec)
      if (t.name == name) return &t;
    return nullptr;
  }
  double meta_value(const std::string& name, double fallback) const {
    const auto* t = find(meta, name);
    return t && !t->data.empty() ? static_cast<double>(t->data[0]) : fallback;
  }
};

namespace detail {

inline void write_entries(std::ostream& os, const std::vector<NamedTensor>& entries) {
  io::write_u64(os, entries.size());
  for (const auto& t : entries) {
    io::write_u32(os, static_cast<std::uint32_t>(t.name.size()));
    os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    io::write_u32(os, static_cast<std::uint32_t>(t.shape.size()));
    for (auto e : t.shape) io::write_u64(os, e);
    io::write_f32_array(os, t.data.data(), t.data.size());
  }
}

inline std::vector<NamedTensor> read_entries(std::istream& is, const std::string& path) {
  const std::uint64_t count = io::read_u64(is, path);
  check(count < (1u << 20), cat(path, ": implausible entry count ", count));
  std::vector<NamedTensor> entries(count);
  for (auto& t : entries) {
    const std::uint32_t nlen = io::read_u32(is, path);
    check(nlen < 4096, cat(path, ": implausible name length ", nlen));
    t.name.resize(nlen);
    is.read(t.name.data(), nlen);
    check(static_cast<std::uint32_t>(is.gcount()) == nlen, cat(path, ": truncated name"));
    t.shape = io::read_tensor_header(is, path);
    t.data.resize(shape_numel(t.shape));
    io::read_f32_array(is, t.data.data(), t.data.size(), path);
  }
  return entries;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  check(os.good(), cat("cannot open for write: ", path));
  os.write("AVTS", 4);
  io::write_u32(os, kCheckpointVersion);
  detail::write_entries(os, ckpt.params);
  os.write("OPTM", 4);
  detail::write_entries(os, ckpt.optim);
  os.write("META", 4);
  detail::write_entries(os, ckpt.meta);
  check(os.good(), cat("write failed: ", path));
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  check(is.good(), cat("cannot open checkpoint: ", path));
  char magic[4];
  is.read(magic, 4);
  check(is.gcount() == 4 && std::string(magic, 4) == "AVTS",
        cat(path, ": not an AVTS checkpoint (bad magic)"));
  const std::uint32_t version = io::read_u32(is, path);
  check(version == kCheckpointVersion,
        cat(path, ": checkpoint format version ", version, " unsupported; this build reads version ",
            kCheckpointVersion));
  Checkpoint ckpt;
  ckpt.params = detail::read_entries(is, path);
  auto expect_tag = [&](const char* tag) {
    char got[4];
    is.read(got, 4);
    check(is.gcount() == 4 && std::string(got, 4) == tag,
          cat(path, ": missing section tag ", tag));
  };
  expect_tag("OPTM");
  ckpt.optim = detail::read_entries(is, path);
  expect_tag("META");
  ckpt.meta = detail::read_entries(is, path);
  return ckpt;
}

}  // namespace avsync
