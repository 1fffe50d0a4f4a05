#pragma once

#include <filesystem>

#include "ctfem/stft.hpp"

namespace ctfem {

enum class SampleFormat { pcm16, float32 };

/// Reads a mono RIFF/WAVE file (PCM16 or IEEE float32). PCM16 is scaled to
/// [-1, 1). Multichannel files raise FormatError naming the channel count.
Waveform read_wav(const std::filesystem::path& path);

void write_wav(const std::filesystem::path& path, const Waveform& wave,
               SampleFormat format = SampleFormat::float32);

}  // namespace ctfem
