#pragma once

#include <string>

#include "pcdc/dsp.hpp"

namespace pcdc {

/// Reads a 16-bit PCM mono WAV file. Any other format (channels, bit depth,
/// compression) is rejected with a descriptive FormatError.
Waveform read_wav(const std::string& path);

/// Writes 16-bit PCM mono. Samples are clamped to [-1, 1] and scaled by 32767.
void write_wav(const std::string& path, const Waveform& w);

}  // namespace pcdc
