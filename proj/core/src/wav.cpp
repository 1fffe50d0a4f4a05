#include "ctfem/wav.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "ctfem/errors.hpp"

namespace ctfem {

namespace {

static_assert(std::endian::native == std::endian::little,
              "WAV I/O assumes a little-endian host");

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

template <typename T>
T read_le(const std::vector<char>& buf, std::size_t at) {
  T v;
  std::memcpy(&v, buf.data() + at, sizeof(T));
  return v;
}

template <typename T>
void put_le(std::vector<char>& buf, T v) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  buf.insert(buf.end(), bytes, bytes + sizeof(T));
}

void put_tag(std::vector<char>& buf, const char* tag) { buf.insert(buf.end(), tag, tag + 4); }

}  // namespace

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open WAV file: " + path.string());
  std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  const auto fail = [&](const std::string& why) {
    throw FormatError(path.string() + ": " + why);
  };
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0) {
    fail("not a RIFF/WAVE file");
  }

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const char* data = nullptr;
  std::size_t data_size = 0;

  std::size_t at = 12;
  while (at + 8 <= buf.size()) {
    const std::uint32_t chunk = read_le<std::uint32_t>(buf, at + 4);
    const std::size_t body = at + 8;
    if (body + chunk > buf.size()) fail("truncated chunk");
    if (std::memcmp(buf.data() + at, "fmt ", 4) == 0) {
      if (chunk < 16) fail("fmt chunk too short");
      format = read_le<std::uint16_t>(buf, body);
      channels = read_le<std::uint16_t>(buf, body + 2);
      rate = read_le<std::uint32_t>(buf, body + 4);
      bits = read_le<std::uint16_t>(buf, body + 14);
      if (format == kFormatExtensible) {
        if (chunk < 26) fail("extensible fmt chunk too short");
        format = read_le<std::uint16_t>(buf, body + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(buf.data() + at, "data", 4) == 0) {
      data = buf.data() + body;
      data_size = chunk;
    }
    at = body + chunk + (chunk & 1u);
  }
  if (!have_fmt) fail("missing fmt chunk");
  if (data == nullptr) fail("missing data chunk");
  if (channels != 1) {
    fail("expected mono audio, file has " + std::to_string(channels) + " channels");
  }

  Waveform wave;
  wave.sample_rate = static_cast<int>(rate);
  if (format == kFormatPcm && bits == 16) {
    const std::size_t count = data_size / 2;
    wave.samples.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      std::int16_t s;
      std::memcpy(&s, data + 2 * i, 2);
      wave.samples[i] = static_cast<double>(s) / 32768.0;
    }
  } else if (format == kFormatFloat && bits == 32) {
    const std::size_t count = data_size / 4;
    wave.samples.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      float s;
      std::memcpy(&s, data + 4 * i, 4);
      wave.samples[i] = static_cast<double>(s);
    }
  } else {
    fail("unsupported sample format (tag " + std::to_string(format) + ", " +
         std::to_string(bits) + " bits)");
  }
  if (rate == 0) fail("sample rate is zero");
  return wave;
}

void write_wav(const std::filesystem::path& path, const Waveform& wave, SampleFormat format) {
  wave.validate();
  const std::uint16_t bits = format == SampleFormat::pcm16 ? 16 : 32;
  const std::uint16_t tag = format == SampleFormat::pcm16 ? kFormatPcm : kFormatFloat;
  const std::uint16_t block = bits / 8;
  const auto data_size = static_cast<std::uint32_t>(wave.samples.size() * block);
  const auto rate = static_cast<std::uint32_t>(wave.sample_rate);

  std::vector<char> buf;
  buf.reserve(44 + data_size);
  put_tag(buf, "RIFF");
  put_le<std::uint32_t>(buf, 36 + data_size);
  put_tag(buf, "WAVE");
  put_tag(buf, "fmt ");
  put_le<std::uint32_t>(buf, 16);
  put_le<std::uint16_t>(buf, tag);
  put_le<std::uint16_t>(buf, 1);
  put_le<std::uint32_t>(buf, rate);
  put_le<std::uint32_t>(buf, rate * block);
  put_le<std::uint16_t>(buf, block);
  put_le<std::uint16_t>(buf, bits);
  put_tag(buf, "data");
  put_le<std::uint32_t>(buf, data_size);
  for (double s : wave.samples) {
    if (format == SampleFormat::pcm16) {
      const double scaled = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
      put_le<std::int16_t>(buf, static_cast<std::int16_t>(scaled));
    } else {
      put_le<float>(buf, static_cast<float>(s));
    }
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace ctfem
