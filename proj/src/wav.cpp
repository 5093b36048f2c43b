#include "pgpt/wav.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>

namespace pgpt::wav {

namespace {

std::uint32_t read_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) | (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

std::uint16_t read_u16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

[[noreturn]] void unsupported(const std::string& why) { throw WavError(WavErrc::UnsupportedFormat, "unsupported WAV: " + why); }

}  // namespace

std::vector<std::int16_t> parse_pcm16_mono(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    unsupported("not a RIFF/WAVE file");
  }

  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t chunk_size = read_u32(bytes, pos + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(bytes.data() + pos, "fmt ", 4) == 0) {
      if (chunk_size < 16 || body + 16 > bytes.size()) unsupported("truncated fmt chunk");
      const auto format = read_u16(bytes, body);
      const auto channels = read_u16(bytes, body + 2);
      const auto rate = read_u32(bytes, body + 4);
      const auto bits = read_u16(bytes, body + 14);
      if (format != 1) unsupported("encoding is not integer PCM");
      if (channels != 1) unsupported(std::to_string(channels) + " channels");
      if (rate != kSampleRate) unsupported(std::to_string(rate) + " Hz");
      if (bits != 16) unsupported(std::to_string(bits) + "-bit samples");
      have_fmt = true;
    } else if (std::memcmp(bytes.data() + pos, "data", 4) == 0) {
      if (!have_fmt) unsupported("data chunk before fmt chunk");
      // Streams written without a final size often carry a bogus length.
      const std::size_t available = bytes.size() - body;
      const std::size_t len = std::min<std::size_t>(chunk_size, available) & ~std::size_t{1};
      std::vector<std::int16_t> samples(len / 2);
      for (std::size_t i = 0; i < samples.size(); ++i) {
        samples[i] = static_cast<std::int16_t>(read_u16(bytes, body + 2 * i));
      }
      return samples;
    }
    pos = body + chunk_size + (chunk_size & 1);
  }
  unsupported("no data chunk");
}

std::vector<std::int16_t> read_pcm16_mono(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) {
      throw WavError(WavErrc::FileNotFound, "no such file: " + path.string());
    }
    throw WavError(WavErrc::IoFailure, "cannot open " + path.string());
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_pcm16_mono(bytes);
}

std::vector<std::uint8_t> encode_pcm16(std::span<const std::int16_t> samples, std::uint32_t sample_rate,
                                       std::uint16_t channels) {
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_u32(out, 36 + data_bytes);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, channels);
  put_u32(out, sample_rate);
  put_u32(out, sample_rate * channels * 2);
  put_u16(out, static_cast<std::uint16_t>(channels * 2));
  put_u16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_u32(out, data_bytes);
  for (auto s : samples) put_u16(out, static_cast<std::uint16_t>(s));
  return out;
}

void write_pcm16(const std::filesystem::path& path, std::span<const std::int16_t> samples, std::uint32_t sample_rate,
                 std::uint16_t channels) {
  const auto bytes = encode_pcm16(samples, sample_rate, channels);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw WavError(WavErrc::IoFailure, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw WavError(WavErrc::IoFailure, "short write to " + path.string());
}

}  // namespace pgpt::wav
