#pragma once

#include <cstddef>
#include <vector>

#include "ctfem/grid.hpp"

namespace ctfem {

struct Waveform {
  std::vector<double> samples;
  int sample_rate = 16000;

  /// Throws InvalidInput if the rate is not positive or a sample is not finite.
  void validate() const;
};

enum class Padding {
  /// Mirror window_len/2 samples onto both ends so frame n is centred on
  /// sample n * hop.
  reflect,
  /// Frame the raw signal starting at sample 0.
  none,
};

/// One-sided STFT with the DC row dropped: row f holds DFT bin f + 1, so
/// the last row is the Nyquist bin and bands() == window_len / 2.
struct Spectrogram {
  ComplexGrid bins;
  std::size_t window_len = 0;
  std::size_t hop = 0;
  Padding padding = Padding::reflect;
  int sample_rate = 16000;
  /// Length of the analysed waveform; 0 when unknown.
  std::size_t source_length = 0;

  std::size_t bands() const noexcept { return bins.rows(); }
  std::size_t frames() const noexcept { return bins.cols(); }
};

/// Periodic Hann window of the given length.
std::vector<double> hann_window(std::size_t length);

Spectrogram analyze(const Waveform& wave, std::size_t window_len, std::size_t hop,
                    Padding padding = Padding::reflect);

/// Weighted overlap-add inverse of analyze, normalised by the summed squared
/// window. The dropped DC row is reinserted as zero.
Waveform synthesize(const Spectrogram& spec);

struct Segment {
  Spectrogram spec;
  std::size_t first_frame = 0;
  /// Frames carrying data; the rest of spec is zero padding.
  std::size_t valid_frames = 0;
};

/// Splits into non-overlapping segments of exactly frames_per_segment frames,
/// zero-padding the last one.
std::vector<Segment> segment(const Spectrogram& spec, long frames_per_segment);

/// Joins the valid frames of consecutive segments back into one spectrogram.
Spectrogram concatenate(const std::vector<Segment>& segments);

}  // namespace ctfem
