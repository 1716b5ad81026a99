#pragma once

#include <filesystem>
#include <span>
#include <vector>

namespace scoresync {

/// Mono audio with samples in [-1, 1].
struct AudioClip {
  std::vector<double> samples;
  int sample_rate = 0;
};

/// Read a RIFF/WAVE file (PCM16 or IEEE float32, mono or stereo). Stereo is
/// downmixed by channel mean. PCM16 samples are divided by 32768.
AudioClip load_wav(const std::filesystem::path& path);

/// Decode an in-memory WAV image; same rules as load_wav.
AudioClip decode_wav(std::span<const unsigned char> bytes);

/// Write mono 16-bit PCM. Samples are clamped to [-1, 32767/32768].
void save_wav_pcm16(const AudioClip& clip, const std::filesystem::path& path);

}  // namespace scoresync
