#pragma once

// Minimal RIFF/WAVE reader and writer: PCM 16-bit or IEEE float 32-bit,
// any channel count on input (averaged to mono), mono on output.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "pstts/error.hpp"
#include "pstts/json_io.hpp"

namespace pstts {

inline constexpr int kDefaultSampleRate = 22050;

struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = kDefaultSampleRate;
};

namespace detail {

inline std::uint32_t read_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t read_u16le(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline void put_u32le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u16le(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace detail

inline AudioBuffer decode_wav(std::span<const unsigned char> bytes, const std::string& origin) {
  using detail::read_u16le;
  using detail::read_u32le;
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    fail(ErrorCode::invalid_input, origin + ": not a RIFF/WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::span<const unsigned char> data;
  bool have_data = false;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    std::uint32_t size = read_u32le(chunk + 4);
    std::size_t body = pos + 8;
    std::size_t avail = std::min<std::size_t>(size, bytes.size() - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (avail < 16) fail(ErrorCode::invalid_input, origin + ": truncated fmt chunk");
      const unsigned char* f = bytes.data() + body;
      format = read_u16le(f);
      channels = read_u16le(f + 2);
      rate = read_u32le(f + 4);
      bits = read_u16le(f + 14);
      if (format == 0xFFFE && avail >= 26) format = read_u16le(f + 24);  // extensible subformat
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.subspan(body, avail);
      have_data = true;
    }
    pos = body + size + (size & 1u);
  }
  if (!have_fmt || !have_data) fail(ErrorCode::invalid_input, origin + ": missing fmt or data chunk");
  if (channels == 0 || rate == 0) fail(ErrorCode::invalid_input, origin + ": bad fmt chunk");

  bool pcm16 = format == 1 && bits == 16;
  bool f32 = format == 3 && bits == 32;
  if (!pcm16 && !f32)
    fail(ErrorCode::invalid_input, origin + ": unsupported encoding (format " +
                                       std::to_string(format) + ", " + std::to_string(bits) +
                                       " bits); need PCM16 or float32");

  std::size_t bytes_per_sample = bits / 8;
  std::size_t frame_bytes = bytes_per_sample * channels;
  std::size_t frames = data.size() / frame_bytes;

  AudioBuffer out;
  out.sample_rate = static_cast<int>(rate);
  out.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* p = data.data() + i * frame_bytes + c * bytes_per_sample;
      if (pcm16) {
        acc += static_cast<std::int16_t>(read_u16le(p)) / 32768.0;
      } else {
        std::uint32_t raw = read_u32le(p);
        float v;
        std::memcpy(&v, &raw, sizeof v);
        acc += v;
      }
    }
    out.samples[i] = acc / channels;
  }
  return out;
}

inline AudioBuffer read_wav(const std::filesystem::path& path) {
  std::string raw = read_text_file(path);
  return decode_wav({reinterpret_cast<const unsigned char*>(raw.data()), raw.size()},
                    path.string());
}

enum class WavEncoding { pcm16, float32 };

inline std::string encode_wav(const AudioBuffer& audio, WavEncoding encoding = WavEncoding::pcm16) {
  using detail::put_u16le;
  using detail::put_u32le;
  const bool pcm = encoding == WavEncoding::pcm16;
  const std::uint16_t bits = pcm ? 16 : 32;
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(audio.samples.size() * (bits / 8));
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put_u32le(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put_u32le(out, 16);
  put_u16le(out, pcm ? 1 : 3);
  put_u16le(out, 1);
  put_u32le(out, static_cast<std::uint32_t>(audio.sample_rate));
  put_u32le(out, static_cast<std::uint32_t>(audio.sample_rate) * (bits / 8));
  put_u16le(out, bits / 8);
  put_u16le(out, bits);
  out += "data";
  put_u32le(out, data_bytes);
  for (double s : audio.samples) {
    double c = std::clamp(s, -1.0, 1.0);
    if (pcm) {
      const auto q = static_cast<std::int16_t>(std::clamp(std::lround(c * 32768.0), -32768L, 32767L));
      put_u16le(out, static_cast<std::uint16_t>(q));
    } else {
      float f = static_cast<float>(c);
      std::uint32_t raw;
      std::memcpy(&raw, &f, sizeof raw);
      put_u32le(out, raw);
    }
  }
  return out;
}

inline void write_wav(const std::filesystem::path& path, const AudioBuffer& audio,
                      WavEncoding encoding = WavEncoding::pcm16) {
  write_text_file(path, encode_wav(audio, encoding));
}

/// Linear-interpolation resampler.
inline AudioBuffer resample_linear(const AudioBuffer& in, int target_rate) {
  require(in.sample_rate > 0 && target_rate > 0, "sample rates must be positive");
  if (in.sample_rate == target_rate || in.samples.empty()) {
    AudioBuffer copy = in;
    copy.sample_rate = target_rate;
    return copy;
  }
  const double step = static_cast<double>(in.sample_rate) / target_rate;
  const std::size_t n_in = in.samples.size();
  const auto n_out = static_cast<std::size_t>(
      std::floor(static_cast<double>(n_in - 1) * target_rate / in.sample_rate)) + 1;
  AudioBuffer out;
  out.sample_rate = target_rate;
  out.samples.resize(n_out);
  for (std::size_t i = 0; i < n_out; ++i) {
    double x = i * step;
    auto i0 = std::min(static_cast<std::size_t>(x), n_in - 1);
    std::size_t i1 = std::min(i0 + 1, n_in - 1);
    double frac = x - static_cast<double>(i0);
    out.samples[i] = in.samples[i0] * (1.0 - frac) + in.samples[i1] * frac;
  }
  return out;
}

}  // namespace pstts
