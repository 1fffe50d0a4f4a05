#include "ctfem/stft.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <unsupported/Eigen/FFT>

#include "ctfem/errors.hpp"

namespace ctfem {

namespace {

// Whole-sample symmetric reflection ("reflect" in numpy terms) that keeps
// folding for pads longer than the signal.
std::size_t mirror_index(long i, std::size_t length) {
  if (length == 1) return 0;
  const long period = 2 * (static_cast<long>(length) - 1);
  long k = i % period;
  if (k < 0) k += period;
  if (k >= static_cast<long>(length)) k = period - k;
  return static_cast<std::size_t>(k);
}

void check_geometry(std::size_t window_len, std::size_t hop) {
  if (window_len < 2 || window_len % 2 != 0) {
    throw InvalidInput("window length must be even and >= 2, got " +
                       std::to_string(window_len));
  }
  if (hop == 0 || hop > window_len) {
    throw InvalidInput("hop must be in [1, window_len], got " + std::to_string(hop));
  }
}

constexpr int kSynthesisMaxIterations = 500;
constexpr double kSynthesisTolerance = 1e-13;

}  // namespace

void Waveform::validate() const {
  if (sample_rate <= 0) {
    throw InvalidInput("sample rate must be positive, got " + std::to_string(sample_rate));
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!std::isfinite(samples[i])) {
      throw InvalidInput("non-finite sample at index " + std::to_string(i));
    }
  }
}

std::vector<double> hann_window(std::size_t length) {
  std::vector<double> w(length);
  for (std::size_t i = 0; i < length; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                static_cast<double>(length));
  }
  return w;
}

Spectrogram analyze(const Waveform& wave, std::size_t window_len, std::size_t hop,
                    Padding padding) {
  check_geometry(window_len, hop);
  if (wave.samples.empty()) throw InvalidInput("cannot analyze an empty waveform");
  wave.validate();

  const std::size_t length = wave.samples.size();
  const std::size_t half = window_len / 2;

  std::vector<double> padded;
  if (padding == Padding::reflect) {
    padded.resize(length + window_len);
    for (std::size_t i = 0; i < padded.size(); ++i) {
      padded[i] = wave.samples[mirror_index(static_cast<long>(i) - static_cast<long>(half),
                                            length)];
    }
  } else {
    padded = wave.samples;
    if (padded.size() < window_len) padded.resize(window_len, 0.0);
  }

  const std::size_t frames = 1 + (padded.size() - window_len) / hop;
  const auto window = hann_window(window_len);

  Spectrogram spec;
  spec.bins = ComplexGrid(half, frames);
  spec.window_len = window_len;
  spec.hop = hop;
  spec.padding = padding;
  spec.sample_rate = wave.sample_rate;
  spec.source_length = length;

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> frame(window_len);
  std::vector<Complex> freq(half + 1);
  for (std::size_t n = 0; n < frames; ++n) {
    const double* src = padded.data() + n * hop;
    for (std::size_t i = 0; i < window_len; ++i) frame[i] = src[i] * window[i];
    fft.fwd(freq.data(), frame.data(), static_cast<Eigen::Index>(window_len));
    for (std::size_t f = 0; f < half; ++f) spec.bins(f, n) = freq[f + 1];
  }
  return spec;
}

Waveform synthesize(const Spectrogram& spec) {
  check_geometry(spec.window_len, spec.hop);
  const std::size_t window_len = spec.window_len;
  const std::size_t half = window_len / 2;
  if (spec.bands() != half) {
    throw ShapeError("spectrogram has " + std::to_string(spec.bands()) +
                     " bands, expected window_len/2 = " + std::to_string(half));
  }
  const std::size_t frames = spec.frames();
  for (Complex v : spec.bins.values()) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
      throw InvalidInput("spectrogram contains non-finite entries");
    }
  }

  const std::size_t total = frames == 0 ? 0 : (frames - 1) * spec.hop + window_len;
  const std::size_t hop = spec.hop;
  const auto window = hann_window(window_len);
  const double inv_len = 1.0 / static_cast<double>(window_len);

  // Frames carry no DC, so every analysis frame only pins down the windowed
  // segment minus its mean. Plain overlap-add would lose those means; instead
  // solve min_x sum_n |z_n - P(w * x_n)|^2 (P removes the mean) by Jacobi-
  // preconditioned conjugate gradients, starting from overlap-add. On a
  // spectrogram produced by analyze the minimum is zero and x is exact.
  const auto apply_normal = [&](const std::vector<double>& x, std::vector<double>& out) {
    std::fill(out.begin(), out.end(), 0.0);
    std::vector<double> seg(window_len);
    for (std::size_t n = 0; n < frames; ++n) {
      const std::size_t offset = n * hop;
      double mean = 0.0;
      for (std::size_t i = 0; i < window_len; ++i) {
        seg[i] = window[i] * x[offset + i];
        mean += seg[i];
      }
      mean *= inv_len;
      for (std::size_t i = 0; i < window_len; ++i) out[offset + i] += window[i] * (seg[i] - mean);
    }
  };

  std::vector<double> rhs(total, 0.0);
  std::vector<double> diag(total, 0.0);
  {
    Eigen::FFT<double> fft;
    fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
    std::vector<Complex> freq(half + 1);
    std::vector<double> frame(window_len);
    for (std::size_t n = 0; n < frames; ++n) {
      freq[0] = 0.0;
      for (std::size_t f = 0; f < half; ++f) freq[f + 1] = spec.bins(f, n);
      fft.inv(frame.data(), freq.data(), static_cast<Eigen::Index>(window_len));
      double mean = 0.0;
      for (double v : frame) mean += v;
      mean *= inv_len;
      const std::size_t offset = n * hop;
      for (std::size_t i = 0; i < window_len; ++i) {
        rhs[offset + i] += window[i] * (frame[i] - mean);
        diag[offset + i] += window[i] * window[i] * (1.0 - inv_len);
      }
    }
  }

  // Samples no window reaches (Hann is zero at its first sample) stay zero.
  std::vector<double> out(total, 0.0);
  std::vector<double> precond(total, 0.0);
  for (std::size_t i = 0; i < total; ++i) {
    if (diag[i] > 1e-12) {
      precond[i] = 1.0 / diag[i];
      out[i] = rhs[i] * precond[i];
    }
  }
  const auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
  };
  const double rhs_norm = std::sqrt(dot(rhs, rhs));
  if (rhs_norm > 0.0) {
    std::vector<double> r(total), z(total), p(total), ap(total);
    apply_normal(out, ap);
    for (std::size_t i = 0; i < total; ++i) {
      r[i] = precond[i] > 0.0 ? rhs[i] - ap[i] : 0.0;
      z[i] = r[i] * precond[i];
    }
    p = z;
    double rz = dot(r, z);
    for (int it = 0; it < kSynthesisMaxIterations; ++it) {
      if (std::sqrt(dot(r, r)) <= kSynthesisTolerance * rhs_norm) break;
      apply_normal(p, ap);
      for (std::size_t i = 0; i < total; ++i) {
        if (precond[i] == 0.0) ap[i] = 0.0;
      }
      const double pap = dot(p, ap);
      if (!(pap > 0.0)) break;
      const double alpha = rz / pap;
      for (std::size_t i = 0; i < total; ++i) {
        out[i] += alpha * p[i];
        r[i] -= alpha * ap[i];
        z[i] = r[i] * precond[i];
      }
      const double rz_next = dot(r, z);
      const double beta = rz_next / rz;
      rz = rz_next;
      for (std::size_t i = 0; i < total; ++i) p[i] = z[i] + beta * p[i];
    }
  }

  Waveform wave;
  wave.sample_rate = spec.sample_rate;
  const std::size_t lead = spec.padding == Padding::reflect ? half : 0;
  std::size_t length = spec.source_length;
  if (length == 0) length = total - std::min(total, 2 * lead);
  wave.samples.assign(length, 0.0);
  for (std::size_t i = 0; i < length && lead + i < total; ++i) {
    wave.samples[i] = out[lead + i];
  }
  return wave;
}

std::vector<Segment> segment(const Spectrogram& spec, long frames_per_segment) {
  if (frames_per_segment <= 0) {
    throw InvalidInput("frames per segment must be positive, got " +
                       std::to_string(frames_per_segment));
  }
  const auto seg_len = static_cast<std::size_t>(frames_per_segment);
  const std::size_t frames = spec.frames();
  const std::size_t count = std::max<std::size_t>(1, (frames + seg_len - 1) / seg_len);

  std::vector<Segment> out;
  out.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    Segment seg;
    seg.first_frame = s * seg_len;
    seg.valid_frames = std::min(seg_len, frames - std::min(frames, seg.first_frame));
    seg.spec = spec;
    seg.spec.bins = ComplexGrid(spec.bands(), seg_len);
    seg.spec.source_length = 0;
    for (std::size_t f = 0; f < spec.bands(); ++f) {
      auto src = spec.bins.row(f).subspan(seg.first_frame, seg.valid_frames);
      std::copy(src.begin(), src.end(), seg.spec.bins.row(f).begin());
    }
    out.push_back(std::move(seg));
  }
  return out;
}

Spectrogram concatenate(const std::vector<Segment>& segments) {
  if (segments.empty()) throw InvalidInput("no segments to concatenate");
  std::size_t frames = 0;
  const std::size_t bands = segments.front().spec.bands();
  for (const auto& seg : segments) {
    if (seg.spec.bands() != bands) throw ShapeError("segments disagree on band count");
    frames += seg.valid_frames;
  }
  Spectrogram out = segments.front().spec;
  out.bins = ComplexGrid(bands, frames);
  std::size_t at = 0;
  for (const auto& seg : segments) {
    for (std::size_t f = 0; f < bands; ++f) {
      auto src = seg.spec.bins.row(f).first(seg.valid_frames);
      std::copy(src.begin(), src.end(), out.bins.row(f).begin() + static_cast<long>(at));
    }
    at += seg.valid_frames;
  }
  return out;
}

}  // namespace ctfem
