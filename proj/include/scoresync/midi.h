#pragma once

#include <filesystem>
#include <span>
#include <vector>

namespace scoresync {

struct MidiNote {
  double onset_seconds = 0.0;
  double duration_seconds = 0.0;
  int pitch = 0;     // 0..127
  int velocity = 0;  // 1..127
};

struct TempoChange {
  long tick = 0;
  long microseconds_per_quarter = 500000;
};

/// Notes of a Standard MIDI File with onsets resolved through the tempo map.
struct MidiScore {
  std::vector<MidiNote> notes;  // sorted by onset, then pitch
  std::vector<TempoChange> tempo_map;
  int ticks_per_quarter = 480;

  double total_duration() const;
};

/// Parse an SMF (format 0 or 1). Tempo meta-events are merged across tracks,
/// running status is honoured, note-on with velocity 0 counts as note-off.
/// Channel 10 (percussion) and the sustain pedal are ignored.
MidiScore parse_midi(std::span<const unsigned char> bytes);
MidiScore load_midi(const std::filesystem::path& path);

}  // namespace scoresync
