#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "avsync/common.hpp"
#include "avsync/tensor_io.hpp"

namespace avsync {

struct Waveform {
  std::vector<float> samples;  // [-1, 1]
  std::size_t sample_rate = 16000;

  double duration() const {
    return static_cast<double>(samples.size()) / static_cast<double>(sample_rate);
  }
};

inline std::int16_t float_to_i16(float x) {
  const float c = std::clamp(x, -1.0f, 1.0f);
  return static_cast<std::int16_t>(std::lrintf(c * 32767.0f));
}

inline float i16_to_float(std::int16_t s) { return static_cast<float>(s) / 32767.0f; }

// Quantizes to the 16-bit PCM grid. The synthesizer applies this before
// returning waveforms so write-then-read round trips are bit exact.
inline void quantize_to_pcm16(std::vector<float>& samples) {
  for (auto& s : samples) s = i16_to_float(float_to_i16(s));
}

// Single-channel 16-bit little-endian PCM in a standard WAVE container.
inline void write_wav(const std::string& path, const Waveform& w) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  check(os.good(), cat("cannot open for write: ", path));
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
  const std::uint32_t rate = static_cast<std::uint32_t>(w.sample_rate);
  os.write("RIFF", 4);
  io::write_u32(os, 36 + data_bytes);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  io::write_u32(os, 16);                      // PCM fmt chunk size
  io::write_u32(os, 1u | (1u << 16));         // audio format 1 (PCM), 1 channel
  io::write_u32(os, rate);
  io::write_u32(os, rate * 2);                // byte rate
  io::write_u32(os, 2u | (16u << 16));        // block align 2, bits 16
  os.write("data", 4);
  io::write_u32(os, data_bytes);
  for (float s : w.samples) {
    const std::int16_t v = float_to_i16(s);
    const unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                                static_cast<unsigned char>((v >> 8) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 2);
  }
  check(os.good(), cat("write failed: ", path));
}

inline Waveform read_wav(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  check(is.good(), cat("cannot open: ", path));
  char tag[4];
  auto read_tag = [&](const char* expect) {
    is.read(tag, 4);
    check(is.gcount() == 4 && std::string(tag, 4) == expect,
          cat(path, ": malformed WAVE file (missing ", expect, ")"));
  };
  read_tag("RIFF");
  io::read_u32(is, path);
  read_tag("WAVE");
  read_tag("fmt ");
  const std::uint32_t fmt_size = io::read_u32(is, path);
  check(fmt_size >= 16, cat(path, ": malformed fmt chunk"));
  const std::uint32_t fmt_ch = io::read_u32(is, path);
  check((fmt_ch & 0xffff) == 1, cat(path, ": only PCM supported"));
  check((fmt_ch >> 16) == 1, cat(path, ": only mono supported"));
  const std::uint32_t rate = io::read_u32(is, path);
  io::read_u32(is, path);  // byte rate
  const std::uint32_t ba_bits = io::read_u32(is, path);
  check((ba_bits >> 16) == 16, cat(path, ": only 16-bit PCM supported"));
  is.ignore(fmt_size - 16);
  // skip any non-data chunks
  for (;;) {
    is.read(tag, 4);
    check(is.gcount() == 4, cat(path, ": no data chunk"));
    const std::uint32_t size = io::read_u32(is, path);
    if (std::string(tag, 4) == "data") {
      Waveform w;
      w.sample_rate = rate;
      w.samples.resize(size / 2);
      std::vector<unsigned char> raw(size);
      is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(size));
      check(static_cast<std::uint32_t>(is.gcount()) == size,
            cat(path, ": truncated data chunk (expected ", size, " bytes, got ", is.gcount(),
                ")"));
      for (std::size_t i = 0; i < w.samples.size(); ++i) {
        const std::int16_t v =
            static_cast<std::int16_t>(static_cast<std::uint16_t>(raw[2 * i]) |
                                      (static_cast<std::uint16_t>(raw[2 * i + 1]) << 8));
        w.samples[i] = i16_to_float(v);
      }
      return w;
    }
    is.ignore(size);
  }
}

}  // namespace avsync
