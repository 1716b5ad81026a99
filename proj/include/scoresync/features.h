#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "scoresync/audio.h"
#include "scoresync/matrix.h"
#include "scoresync/midi.h"

namespace scoresync {

enum class FeatureOrigin { audio, midi, external };

std::string_view to_string(FeatureOrigin origin);
FeatureOrigin parse_origin(std::string_view text);

/// Frames x bins feature matrix. Frame i spans [i*hop, (i+1)*hop) seconds.
struct FeatureSequence {
  Matrix data;
  double hop_seconds = 0.0;
  FeatureOrigin origin = FeatureOrigin::external;

  std::size_t frames() const { return data.rows(); }
  std::size_t bins() const { return data.cols(); }

  /// Throws InputError unless frames >= 1, bins >= 1, hop > 0 and all values finite.
  void validate() const;
};

/// Pairwise Euclidean frame distances; rows index the performance.
using CrossSimilarityMatrix = Matrix;

enum class WindowKind { hann, hamming };

struct ChromaConfig {
  int frame_length = 2048;
  int hop_length = 512;
  WindowKind window = WindowKind::hann;
};

inline constexpr int kChromaBins = 12;
inline constexpr double kLowestFoldedHz = 32.7;  // C1

/// Pitch class (0 = C .. 11 = B) of a frequency on the A4 = 440 Hz grid.
int pitch_class_of(double hz);

/// 12-bin chromagram: power spectrum folded onto equal-tempered pitch
/// classes, each frame L2-normalized (all-zero frames stay zero).
FeatureSequence chromagram(const AudioClip& clip, const ChromaConfig& config = {});

/// Render notes straight to chroma: velocity/127 into the pitch-class bin of
/// every frame the note overlaps, then per-frame L2 normalization.
FeatureSequence midi_to_chroma(const MidiScore& score, double hop_seconds);

CrossSimilarityMatrix cross_similarity(const FeatureSequence& perf, const FeatureSequence& score);

/// Feature CSV: header `hop_seconds=<real>,bins=<int>,origin=<...>`, then one
/// row per frame. Leading lines starting with '#' are comments.
FeatureSequence load_features_csv(const std::filesystem::path& path);
FeatureSequence parse_features_csv(std::string_view text);
std::string format_features_csv(const FeatureSequence& seq, std::string_view comment = {});
void save_features_csv(const FeatureSequence& seq, const std::filesystem::path& path,
                       std::string_view comment = {});

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace scoresync
