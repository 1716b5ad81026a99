#include <catch_amalgamated.hpp>

#include <complex>
#include <cstring>
#include <fstream>

#include "scoresync/audio.h"
#include "scoresync/error.h"
#include "test_util.h"

using namespace scoresync;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

namespace {

std::vector<unsigned char> wav_bytes(int format, int channels, int rate, int bits,
                                     const std::vector<unsigned char>& data) {
  std::vector<unsigned char> out;
  auto u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
  };
  auto u16 = [&](std::uint16_t v) {
    out.push_back(static_cast<unsigned char>(v));
    out.push_back(static_cast<unsigned char>(v >> 8));
  };
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  u32(static_cast<std::uint32_t>(36 + data.size()));
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  u32(16);
  u16(static_cast<std::uint16_t>(format));
  u16(static_cast<std::uint16_t>(channels));
  u32(static_cast<std::uint32_t>(rate));
  u32(static_cast<std::uint32_t>(rate * channels * bits / 8));
  u16(static_cast<std::uint16_t>(channels * bits / 8));
  u16(static_cast<std::uint16_t>(bits));
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  u32(static_cast<std::uint32_t>(data.size()));
  out.insert(out.end(), data.begin(), data.end());
  return out;
}

std::vector<unsigned char> pcm16(const std::vector<std::int16_t>& v) {
  std::vector<unsigned char> out;
  for (auto s : v) {
    const auto u = static_cast<std::uint16_t>(s);
    out.push_back(static_cast<unsigned char>(u));
    out.push_back(static_cast<unsigned char>(u >> 8));
  }
  return out;
}

}  // namespace

TEST_CASE("one second of 16-bit silence round-trips", "[wav]") {
  AudioClip silence;
  silence.sample_rate = 22050;
  silence.samples.assign(22050, 0.0);
  const auto path = test::temp_path("silence.wav");
  save_wav_pcm16(silence, path);

  const AudioClip clip = load_wav(path);
  CHECK(clip.sample_rate == 22050);
  REQUIRE(clip.samples.size() == 22050);
  for (double s : clip.samples) REQUIRE(s == 0.0);
}

TEST_CASE("stereo is downmixed by channel mean", "[wav]") {
  std::vector<std::int16_t> interleaved;
  for (int i = 0; i < 100; ++i) {
    interleaved.push_back(16384);
    interleaved.push_back(-16384);
  }
  const AudioClip clip = decode_wav(wav_bytes(1, 2, 22050, 16, pcm16(interleaved)));
  REQUIRE(clip.samples.size() == 100);
  for (double s : clip.samples) REQUIRE(s == 0.0);
}

TEST_CASE("PCM16 conversion divides by 32768", "[wav]") {
  const AudioClip clip = decode_wav(wav_bytes(1, 1, 8000, 16, pcm16({32767, -32768, 0, 1})));
  CHECK(clip.samples[0] == 32767.0 / 32768.0);
  CHECK_THAT(clip.samples[0], WithinAbs(0.99997, 1e-5));
  CHECK(clip.samples[1] == -1.0);
  CHECK(clip.samples[2] == 0.0);
  CHECK(clip.samples[3] == 1.0 / 32768.0);
}

TEST_CASE("IEEE float32 samples are read verbatim", "[wav]") {
  std::vector<unsigned char> data;
  for (float f : {0.25f, -0.75f, 1.0f}) {
    unsigned char b[4];
    std::memcpy(b, &f, 4);
    data.insert(data.end(), b, b + 4);
  }
  const AudioClip clip = decode_wav(wav_bytes(3, 1, 44100, 32, data));
  REQUIRE(clip.samples.size() == 3);
  CHECK(clip.samples[0] == 0.25);
  CHECK(clip.samples[1] == -0.75);
  CHECK(clip.samples[2] == 1.0);
  CHECK(clip.sample_rate == 44100);
}

TEST_CASE("WAV decoding errors name the defect", "[wav]") {
  SECTION("malformed RIFF header") {
    std::vector<unsigned char> junk = {'R', 'I', 'F', 'X', 0, 0, 0, 0, 'W', 'A', 'V', 'E'};
    CHECK_THROWS_WITH(decode_wav(junk), ContainsSubstring("malformed RIFF header"));
  }
  SECTION("unsupported encoding reports the format code") {
    CHECK_THROWS_WITH(decode_wav(wav_bytes(2, 1, 8000, 4, {0, 0})), ContainsSubstring("format code 2"));
    CHECK_THROWS_WITH(decode_wav(wav_bytes(1, 1, 8000, 24, {0, 0, 0})), ContainsSubstring("24 bits"));
  }
  SECTION("truncated data chunk") {
    auto bytes = wav_bytes(1, 1, 8000, 16, pcm16({1, 2, 3, 4}));
    bytes.resize(bytes.size() - 3);
    CHECK_THROWS_WITH(decode_wav(bytes), ContainsSubstring("truncated data chunk"));
  }
  SECTION("missing file") {
    CHECK_THROWS_AS(load_wav("/nonexistent/definitely_missing.wav"), InputError);
  }
}

TEST_CASE("a synthesized sine survives the WAV round trip with its frequency", "[wav][property]") {
  // Reference DFT: the peak bin of the decoded signal must match the tone
  // within one bin.
  const int rate = 8000;
  const int n = 1024;
  for (double hz : {250.0, 440.0, 1234.5, 3000.0}) {
    const auto path = test::temp_path("tone.wav");
    save_wav_pcm16(test::sine(hz, rate, 0.25), path);
    const AudioClip clip = load_wav(path);
    REQUIRE(clip.samples.size() >= static_cast<std::size_t>(n));

    std::size_t peak = 0;
    double best = -1.0;
    for (int k = 1; k < n / 2; ++k) {
      std::complex<double> acc = 0.0;
      for (int t = 0; t < n; ++t) acc += clip.samples[t] * std::polar(1.0, -2.0 * std::numbers::pi * k * t / n);
      if (std::abs(acc) > best) {
        best = std::abs(acc);
        peak = static_cast<std::size_t>(k);
      }
    }
    const double bin_hz = static_cast<double>(rate) / n;
    CHECK(std::abs(static_cast<double>(peak) * bin_hz - hz) <= bin_hz);
  }
}
