#include "scoresync/audio.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "scoresync/error.h"

namespace scoresync {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;

std::uint16_t read_u16(std::span<const unsigned char> b, std::size_t off) {
  return static_cast<std::uint16_t>(b[off] | (b[off + 1] << 8));
}

std::uint32_t read_u32(std::span<const unsigned char> b, std::size_t off) {
  return static_cast<std::uint32_t>(b[off]) | (static_cast<std::uint32_t>(b[off + 1]) << 8) |
         (static_cast<std::uint32_t>(b[off + 2]) << 16) |
         (static_cast<std::uint32_t>(b[off + 3]) << 24);
}

bool tag_is(std::span<const unsigned char> b, std::size_t off, const char* tag) {
  return std::memcmp(b.data() + off, tag, 4) == 0;
}

void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xff));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

struct FormatChunk {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits = 0;
};

}  // namespace

AudioClip decode_wav(std::span<const unsigned char> bytes) {
  if (bytes.size() < 12 || !tag_is(bytes, 0, "RIFF") || !tag_is(bytes, 8, "WAVE")) {
    throw InputError("malformed RIFF header: missing RIFF/WAVE signature");
  }

  FormatChunk fmt;
  bool have_fmt = false;
  std::span<const unsigned char> data;
  bool have_data = false;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t size = read_u32(bytes, pos + 4);
    const std::size_t body = pos + 8;
    if (tag_is(bytes, pos, "fmt ")) {
      if (size < 16 || body + 16 > bytes.size()) {
        throw InputError("malformed RIFF header: fmt chunk shorter than 16 bytes");
      }
      fmt.format = read_u16(bytes, body);
      fmt.channels = read_u16(bytes, body + 2);
      fmt.sample_rate = read_u32(bytes, body + 4);
      fmt.bits = read_u16(bytes, body + 14);
      have_fmt = true;
    } else if (tag_is(bytes, pos, "data")) {
      if (!have_fmt) throw InputError("malformed RIFF header: data chunk precedes fmt chunk");
      if (body + size > bytes.size()) {
        throw InputError("truncated data chunk: header declares " + std::to_string(size) +
                         " bytes, file holds " + std::to_string(bytes.size() - body));
      }
      data = bytes.subspan(body, size);
      have_data = true;
      break;
    }
    // Chunks are padded to even length.
    pos = body + size + (size & 1u);
  }

  if (!have_fmt) throw InputError("malformed RIFF header: no fmt chunk");
  if (!have_data) throw InputError("malformed RIFF header: no data chunk");

  const bool pcm16 = fmt.format == kFormatPcm && fmt.bits == 16;
  const bool float32 = fmt.format == kFormatFloat && fmt.bits == 32;
  if (!pcm16 && !float32) {
    throw InputError("unsupported encoding in fmt chunk: format code " +
                     std::to_string(fmt.format) + ", " + std::to_string(fmt.bits) +
                     " bits (supported: code 1/16-bit, code 3/32-bit)");
  }
  if (fmt.channels < 1 || fmt.channels > 2) {
    throw InputError("unsupported encoding in fmt chunk: " + std::to_string(fmt.channels) +
                     " channels (supported: 1 or 2)");
  }
  if (fmt.sample_rate == 0) throw InputError("malformed RIFF header: sample rate is 0");

  const std::size_t bytes_per_sample = fmt.bits / 8;
  const std::size_t frame_bytes = bytes_per_sample * fmt.channels;
  if (data.size() % frame_bytes != 0) {
    throw InputError("truncated data chunk: " + std::to_string(data.size()) +
                     " bytes is not a whole number of " + std::to_string(frame_bytes) +
                     "-byte frames");
  }
  const std::size_t frames = data.size() / frame_bytes;
  if (frames == 0) throw InputError("truncated data chunk: no samples");

  AudioClip clip;
  clip.sample_rate = static_cast<int>(fmt.sample_rate);
  clip.samples.resize(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    double acc = 0.0;
    for (std::size_t ch = 0; ch < fmt.channels; ++ch) {
      const std::size_t off = f * frame_bytes + ch * bytes_per_sample;
      double v;
      if (pcm16) {
        v = static_cast<std::int16_t>(read_u16(data, off)) / 32768.0;
      } else {
        const std::uint32_t bits = read_u32(data, off);
        float x;
        std::memcpy(&x, &bits, sizeof x);
        v = x;
      }
      acc += v;
    }
    const double s = acc / fmt.channels;
    if (!std::isfinite(s)) {
      throw InputError("non-finite sample at frame " + std::to_string(f));
    }
    clip.samples[f] = s;
  }
  return clip;
}

AudioClip load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open WAV file: " + path.string());
  std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>()};
  return decode_wav(bytes);
}

void save_wav_pcm16(const AudioClip& clip, const std::filesystem::path& path) {
  SCORESYNC_REQUIRE(clip.sample_rate > 0, "sample rate must be positive");
  const auto n = static_cast<std::uint32_t>(clip.samples.size());
  std::vector<unsigned char> out;
  out.reserve(44 + 2 * n);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_u32(out, 36 + 2 * n);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_u32(out, 2 * n);
  for (double s : clip.samples) {
    const double scaled = std::round(std::clamp(s, -1.0, 1.0) * 32768.0);
    const auto v = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
    put_u16(out, static_cast<std::uint16_t>(v));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write WAV file: " + path.string());
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
}

}  // namespace scoresync
