#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace fakeseg {

/// Per-frame class. The numeric values fix the serialization order Real < Fake.
enum class FrameLabel : std::uint8_t { Real = 0, Fake = 1 };

inline char to_char(FrameLabel l) { return l == FrameLabel::Fake ? 'F' : 'R'; }

/// A fake interval: `length` frames starting at `start`.
struct Segment {
  std::size_t start = 0;
  std::size_t length = 0;

  std::size_t end() const { return start + length; }
  friend bool operator==(const Segment&, const Segment&) = default;
};

/// Per-frame Real/Fake labels of one video.
class SegmentationMap {
 public:
  SegmentationMap() = default;
  explicit SegmentationMap(std::vector<FrameLabel> labels) : labels_(std::move(labels)) {}
  SegmentationMap(std::size_t length, FrameLabel fill) : labels_(length, fill) {}

  /// Parses a string of 'R'/'F' characters.
  static SegmentationMap from_string(std::string_view text);
  /// Builds a map from 0/1 integers where 1 means Fake.
  static SegmentationMap from_bits(std::span<const int> bits);

  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }

  FrameLabel operator[](std::size_t i) const { return labels_[i]; }
  FrameLabel& operator[](std::size_t i) { return labels_[i]; }

  std::span<const FrameLabel> labels() const { return labels_; }
  auto begin() const { return labels_.begin(); }
  auto end() const { return labels_.end(); }

  std::size_t count_fake() const;
  /// Fraction of Fake frames; 0 for an empty map.
  double fake_ratio() const;
  /// Fraction of Real frames (the `f` of the random-guess baseline).
  double real_ratio() const;

  std::string to_string() const;

  friend bool operator==(const SegmentationMap&, const SegmentationMap&) = default;

 private:
  std::vector<FrameLabel> labels_;
};

/// Per-frame probability of Fake, each in [0, 1].
class ScoreMap {
 public:
  ScoreMap() = default;
  explicit ScoreMap(std::vector<double> scores);

  std::size_t size() const { return scores_.size(); }
  bool empty() const { return scores_.empty(); }
  double operator[](std::size_t i) const { return scores_[i]; }
  std::span<const double> scores() const { return scores_; }
  auto begin() const { return scores_.begin(); }
  auto end() const { return scores_.end(); }

  /// Frames with score >= threshold become Fake.
  SegmentationMap threshold(double threshold) const;

  friend bool operator==(const ScoreMap&, const ScoreMap&) = default;

 private:
  std::vector<double> scores_;
};

/// Maximal runs of Fake frames, sorted by start.
std::vector<Segment> segments_of(const SegmentationMap& map);

// Text serialization: one 'R'/'F' character per frame, newline-terminated per video.
void write_segmap_text(std::ostream& os, const SegmentationMap& map);
SegmentationMap read_segmap_text(std::istream& is);
std::vector<SegmentationMap> read_segmap_text_all(std::istream& is);

// JSON serialization: {"labels":[0,1,...]} with 1 = Fake.
std::string segmap_to_json(const SegmentationMap& map);
SegmentationMap segmap_from_json(std::string_view json);

void save_segmap(const std::string& path, const SegmentationMap& map);
SegmentationMap load_segmap(const std::string& path);

}  // namespace fakeseg
