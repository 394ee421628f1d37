#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fakeseg/segmap.hpp"

namespace fakeseg {

/// Candidate lengths (in frames) of an injected fake segment.
inline constexpr std::array<std::size_t, 3> kSegmentLengthMenu{125, 150, 175};

/// Shortest video that can host a one-segment plan.
inline constexpr std::size_t kMinOneSegmentLength = 250;
/// Shortest video that can host a two-segment plan.
inline constexpr std::size_t kMinTwoSegmentLength = 500;
/// Window (in frames) for the start of the first of two segments.
inline constexpr std::size_t kFirstSegmentStartWindow = 125;
/// Window (in frames, from mid-video) for the start of the second segment.
inline constexpr std::size_t kSecondSegmentStartWindow = 75;

struct VideoSpec {
  std::string id;
  std::size_t length_frames = 0;

  friend bool operator==(const VideoSpec&, const VideoSpec&) = default;
};

struct SegmentPlan {
  std::string video_id;
  std::vector<Segment> segments;

  friend bool operator==(const SegmentPlan&, const SegmentPlan&) = default;
};

enum class PlanMode { OneSegment, TwoSegments };

/// One fake segment: start uniform in [0, T/2), length uniform over the
/// menu. A start that would run past the end is redrawn; the length is kept.
SegmentPlan plan_one_segment(const VideoSpec& video, std::uint64_t seed);

/// Two fake segments: the first starts in [0, 125), the second in
/// [T/2, T/2 + 75); both lengths come from the menu. Start pairs that
/// overlap or overrun are redrawn jointly.
SegmentPlan plan_two_segments(const VideoSpec& video, std::uint64_t seed);

SegmentPlan plan_video(const VideoSpec& video, PlanMode mode, std::uint64_t seed);

/// Throws DomainError unless the segments are sorted, disjoint, non-empty
/// and inside [0, length).
void validate_plan(const SegmentPlan& plan, std::size_t length);

/// Frames inside a segment are Fake, all others Real.
SegmentationMap render_map(const SegmentPlan& plan, std::size_t length);

struct DatasetStats {
  std::optional<double> fake_ratio_one_seg;
  std::optional<double> fake_ratio_two_seg;
  double avg_length = 0.0;

  friend bool operator==(const DatasetStats&, const DatasetStats&) = default;
};

/// Mean fake-frame ratio over one- and two-segment plans separately, and
/// mean length over all listed videos. A category without plans is empty.
DatasetStats dataset_stats(const std::vector<SegmentPlan>& plans,
                           const std::vector<VideoSpec>& videos);

/// A video together with its plan; one line of a plan file.
struct PlannedVideo {
  VideoSpec video;
  SegmentPlan plan;
};

// Plan files are JSON lines: {"id": ..., "length": ..., "segments": [[start, len], ...]}.
std::string plan_to_json_line(const PlannedVideo& pv);
PlannedVideo plan_from_json_line(const std::string& line);
void write_plan_file(const std::string& path, const std::vector<PlannedVideo>& plans);
std::vector<PlannedVideo> read_plan_file(const std::string& path);

/// Reads a video list (JSON lines with "id" and "length"; "segments" ignored).
std::vector<VideoSpec> read_video_list(const std::string& path);

std::string stats_to_json(const DatasetStats& stats);
DatasetStats stats_from_json(const std::string& text);

}  // namespace fakeseg
