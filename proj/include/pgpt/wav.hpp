#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pgpt/error.hpp"

namespace pgpt::wav {

inline constexpr std::uint32_t kSampleRate = 16000;

enum class WavErrc { FileNotFound, UnsupportedFormat, IoFailure };

class WavError : public CodedError<WavErrc> {
 public:
  using CodedError::CodedError;
};

// Reads a RIFF/WAVE file holding 16-bit little-endian PCM, mono, 16 kHz.
// Anything else is rejected with UnsupportedFormat.
std::vector<std::int16_t> read_pcm16_mono(const std::filesystem::path& path);

// Parses an in-memory WAV image with the same restrictions.
std::vector<std::int16_t> parse_pcm16_mono(std::span<const std::uint8_t> bytes);

// Serializes samples as a canonical 44-byte-header WAV image.
std::vector<std::uint8_t> encode_pcm16(std::span<const std::int16_t> samples, std::uint32_t sample_rate = kSampleRate,
                                       std::uint16_t channels = 1);

void write_pcm16(const std::filesystem::path& path, std::span<const std::int16_t> samples,
                 std::uint32_t sample_rate = kSampleRate, std::uint16_t channels = 1);

}  // namespace pgpt::wav
