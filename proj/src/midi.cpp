#include "scoresync/midi.h"

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <deque>
#include <fstream>
#include <iterator>
#include <string>

#include "scoresync/error.h"

namespace scoresync {

namespace {

constexpr int kPercussionChannel = 9;

struct RawNote {
  long on_tick;
  long off_tick;
  int pitch;
  int velocity;
};

class Reader {
 public:
  Reader(std::span<const unsigned char> bytes, std::size_t begin, std::size_t end)
      : bytes_(bytes), pos_(begin), end_(end) {}

  bool done() const { return pos_ >= end_; }
  std::size_t pos() const { return pos_; }

  std::uint8_t u8() {
    if (pos_ >= end_) throw InputError("truncated MIDI track at byte " + std::to_string(pos_));
    return bytes_[pos_++];
  }

  std::uint8_t peek() const {
    if (pos_ >= end_) throw InputError("truncated MIDI track at byte " + std::to_string(pos_));
    return bytes_[pos_];
  }

  long vlq() {
    long value = 0;
    for (int i = 0; i < 4; ++i) {
      const std::uint8_t b = u8();
      value = (value << 7) | (b & 0x7f);
      if ((b & 0x80) == 0) return value;
    }
    throw InputError("variable-length quantity longer than 4 bytes at byte " +
                     std::to_string(pos_));
  }

  void skip(long n) {
    if (n < 0 || pos_ + static_cast<std::size_t>(n) > end_) {
      throw InputError("MIDI event length runs past end of track");
    }
    pos_ += static_cast<std::size_t>(n);
  }

 private:
  std::span<const unsigned char> bytes_;
  std::size_t pos_;
  std::size_t end_;
};

std::uint32_t be32(std::span<const unsigned char> b, std::size_t off) {
  return (static_cast<std::uint32_t>(b[off]) << 24) | (static_cast<std::uint32_t>(b[off + 1]) << 16) |
         (static_cast<std::uint32_t>(b[off + 2]) << 8) | b[off + 3];
}

std::uint16_t be16(std::span<const unsigned char> b, std::size_t off) {
  return static_cast<std::uint16_t>((b[off] << 8) | b[off + 1]);
}

void parse_track(Reader& r, std::vector<RawNote>& notes, std::vector<TempoChange>& tempos) {
  // Open note-ons per (channel, pitch), matched first-in first-out.
  std::array<std::deque<std::pair<long, int>>, 16 * 128> open;
  long tick = 0;
  std::uint8_t status = 0;

  while (!r.done()) {
    tick += r.vlq();
    std::uint8_t b = r.peek();
    if (b & 0x80) {
      r.u8();
      status = b;
    } else if (status == 0 || status >= 0xf0) {
      throw InputError("running status without a preceding channel message");
    }

    if (status == 0xff) {
      const std::uint8_t type = r.u8();
      const long len = r.vlq();
      if (type == 0x51) {
        if (len != 3) throw InputError("tempo meta-event with length " + std::to_string(len));
        const long us = (static_cast<long>(r.u8()) << 16) | (static_cast<long>(r.u8()) << 8) | r.u8();
        if (us <= 0) throw InputError("tempo meta-event with zero tempo");
        tempos.push_back({tick, us});
      } else if (type == 0x2f) {
        r.skip(len);
        break;
      } else {
        r.skip(len);
      }
      status = 0;  // meta events cancel running status
      continue;
    }
    if (status == 0xf0 || status == 0xf7) {
      r.skip(r.vlq());
      status = 0;
      continue;
    }

    const int kind = status & 0xf0;
    const int channel = status & 0x0f;
    switch (kind) {
      case 0x80:
      case 0x90: {
        const int pitch = r.u8() & 0x7f;
        const int velocity = r.u8() & 0x7f;
        auto& slot = open[channel * 128 + pitch];
        if (kind == 0x90 && velocity > 0) {
          slot.emplace_back(tick, velocity);
        } else if (!slot.empty()) {
          const auto [on_tick, on_vel] = slot.front();
          slot.pop_front();
          if (channel != kPercussionChannel && tick > on_tick) {
            notes.push_back({on_tick, tick, pitch, on_vel});
          }
        }
        break;
      }
      case 0xa0:
      case 0xb0:
      case 0xe0:
        r.u8();
        r.u8();
        break;
      case 0xc0:
      case 0xd0:
        r.u8();
        break;
      default:
        throw InputError("unexpected MIDI status byte " + std::to_string(status));
    }
  }

  for (int key = 0; key < 16 * 128; ++key) {
    if (!open[key].empty() && key / 128 != kPercussionChannel) {
      throw InputError("note-on without matching note-off (channel " + std::to_string(key / 128 + 1) +
                       ", pitch " + std::to_string(key % 128) + ")");
    }
  }
}

// Seconds elapsed at `tick`, given a tempo map sorted by tick.
double tick_to_seconds(long tick, const std::vector<TempoChange>& tempos, int tpq) {
  double seconds = 0.0;
  long last_tick = 0;
  long us_per_quarter = 500000;
  for (const auto& t : tempos) {
    if (t.tick >= tick) break;
    seconds += static_cast<double>(t.tick - last_tick) * us_per_quarter / (1e6 * tpq);
    last_tick = t.tick;
    us_per_quarter = t.microseconds_per_quarter;
  }
  seconds += static_cast<double>(tick - last_tick) * us_per_quarter / (1e6 * tpq);
  return seconds;
}

}  // namespace

double MidiScore::total_duration() const {
  double end = 0.0;
  for (const auto& n : notes) end = std::max(end, n.onset_seconds + n.duration_seconds);
  return end;
}

MidiScore parse_midi(std::span<const unsigned char> bytes) {
  if (bytes.size() < 14 || std::memcmp(bytes.data(), "MThd", 4) != 0) {
    throw InputError("not a Standard MIDI File: missing MThd header");
  }
  const std::uint32_t header_len = be32(bytes, 4);
  if (header_len < 6 || 8 + header_len > bytes.size()) {
    throw InputError("malformed MThd header length");
  }
  const int format = be16(bytes, 8);
  const int ntracks = be16(bytes, 10);
  const int division = be16(bytes, 12);
  if (format != 0 && format != 1) {
    throw InputError("unsupported SMF format " + std::to_string(format) + " (supported: 0, 1)");
  }
  if (division & 0x8000) throw InputError("SMPTE time division is not supported");
  if (division == 0) throw InputError("ticks per quarter note is 0");

  MidiScore score;
  score.ticks_per_quarter = division;
  std::vector<RawNote> raw;

  std::size_t pos = 8 + header_len;
  for (int t = 0; t < ntracks; ++t) {
    if (pos + 8 > bytes.size()) throw InputError("truncated MIDI file: missing track " + std::to_string(t));
    const std::uint32_t len = be32(bytes, pos + 4);
    if (std::memcmp(bytes.data() + pos, "MTrk", 4) != 0) {
      // Unknown chunk types are skipped, as Standard MIDI Files require.
      pos += 8 + len;
      --t;
      continue;
    }
    if (pos + 8 + len > bytes.size()) throw InputError("truncated MIDI track " + std::to_string(t));
    Reader r(bytes, pos + 8, pos + 8 + len);
    parse_track(r, raw, score.tempo_map);
    pos += 8 + len;
  }

  std::stable_sort(score.tempo_map.begin(), score.tempo_map.end(),
                   [](const TempoChange& a, const TempoChange& b) { return a.tick < b.tick; });

  score.notes.reserve(raw.size());
  for (const auto& n : raw) {
    const double on = tick_to_seconds(n.on_tick, score.tempo_map, division);
    const double off = tick_to_seconds(n.off_tick, score.tempo_map, division);
    score.notes.push_back({on, off - on, n.pitch, n.velocity});
  }
  std::sort(score.notes.begin(), score.notes.end(), [](const MidiNote& a, const MidiNote& b) {
    if (a.onset_seconds != b.onset_seconds) return a.onset_seconds < b.onset_seconds;
    return a.pitch < b.pitch;
  });
  return score;
}

MidiScore load_midi(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open MIDI file: " + path.string());
  std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>()};
  return parse_midi(bytes);
}

}  // namespace scoresync
