#include "fakeseg/injection.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "fakeseg/error.hpp"
#include "fakeseg/rng.hpp"

namespace fakeseg {

namespace {

std::size_t draw_length(Pcg32& rng) {
  return kSegmentLengthMenu[rng.below(static_cast<std::uint32_t>(kSegmentLengthMenu.size()))];
}

std::uint32_t to_u32(std::size_t v) { return static_cast<std::uint32_t>(v); }

}  // namespace

SegmentPlan plan_one_segment(const VideoSpec& video, std::uint64_t seed) {
  const std::size_t t = video.length_frames;
  if (t < kMinOneSegmentLength) {
    throw DomainError("plan_one_segment: video '" + video.id + "' has " + std::to_string(t) +
                      " frames, minimum is " + std::to_string(kMinOneSegmentLength));
  }
  Pcg32 rng(derive_seed(seed, video.id));
  const std::size_t half = t / 2;
  const std::size_t length = draw_length(rng);
  std::size_t start = rng.below(to_u32(half));
  while (start + length > t) start = rng.below(to_u32(half));
  return {video.id, {{start, length}}};
}

SegmentPlan plan_two_segments(const VideoSpec& video, std::uint64_t seed) {
  const std::size_t t = video.length_frames;
  if (t < kMinTwoSegmentLength) {
    throw DomainError("plan_two_segments: video '" + video.id + "' has " + std::to_string(t) +
                      " frames, minimum is " + std::to_string(kMinTwoSegmentLength));
  }
  Pcg32 rng(derive_seed(seed, video.id) ^ 0x2u);
  const std::size_t half = t / 2;
  const std::size_t len1 = draw_length(rng);
  const std::size_t len2 = draw_length(rng);
  for (;;) {
    const std::size_t s1 = rng.below(to_u32(kFirstSegmentStartWindow));
    const std::size_t s2 = half + rng.below(to_u32(kSecondSegmentStartWindow));
    if (s1 + len1 < s2 && s2 + len2 <= t) return {video.id, {{s1, len1}, {s2, len2}}};
  }
}

SegmentPlan plan_video(const VideoSpec& video, PlanMode mode, std::uint64_t seed) {
  return mode == PlanMode::OneSegment ? plan_one_segment(video, seed)
                                      : plan_two_segments(video, seed);
}

void validate_plan(const SegmentPlan& plan, std::size_t length) {
  std::size_t prev_end = 0;
  bool first = true;
  for (const auto& s : plan.segments) {
    if (s.length == 0) throw DomainError("plan '" + plan.video_id + "': empty segment");
    if (s.end() > length) {
      throw DomainError("plan '" + plan.video_id + "': segment [" + std::to_string(s.start) + ", " +
                        std::to_string(s.end()) + ") exceeds video length " +
                        std::to_string(length));
    }
    if (!first && s.start <= prev_end) {
      // touching segments would merge into one run, so require a gap
      throw DomainError("plan '" + plan.video_id + "': segments overlap, touch or are unsorted");
    }
    prev_end = s.end();
    first = false;
  }
}

SegmentationMap render_map(const SegmentPlan& plan, std::size_t length) {
  validate_plan(plan, length);
  SegmentationMap map(length, FrameLabel::Real);
  for (const auto& s : plan.segments) {
    for (std::size_t i = s.start; i < s.end(); ++i) map[i] = FrameLabel::Fake;
  }
  return map;
}

DatasetStats dataset_stats(const std::vector<SegmentPlan>& plans,
                           const std::vector<VideoSpec>& videos) {
  std::map<std::string, std::size_t> lengths;
  double total_length = 0.0;
  for (const auto& v : videos) {
    lengths[v.id] = v.length_frames;
    total_length += static_cast<double>(v.length_frames);
  }
  double sum1 = 0.0, sum2 = 0.0;
  std::size_t n1 = 0, n2 = 0;
  for (const auto& p : plans) {
    const auto it = lengths.find(p.video_id);
    if (it == lengths.end()) throw DomainError("dataset_stats: unknown video id '" + p.video_id + "'");
    const double ratio = render_map(p, it->second).fake_ratio();
    if (p.segments.size() == 1) {
      sum1 += ratio;
      ++n1;
    } else if (p.segments.size() == 2) {
      sum2 += ratio;
      ++n2;
    }
  }
  DatasetStats stats;
  if (n1 > 0) stats.fake_ratio_one_seg = sum1 / static_cast<double>(n1);
  if (n2 > 0) stats.fake_ratio_two_seg = sum2 / static_cast<double>(n2);
  if (!videos.empty()) stats.avg_length = total_length / static_cast<double>(videos.size());
  return stats;
}

std::string plan_to_json_line(const PlannedVideo& pv) {
  nlohmann::ordered_json j;
  j["id"] = pv.video.id;
  j["length"] = pv.video.length_frames;
  auto segs = nlohmann::ordered_json::array();
  for (const auto& s : pv.plan.segments) segs.push_back({s.start, s.length});
  j["segments"] = segs;
  return j.dump();
}

namespace {

VideoSpec parse_video(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("id") || !j.contains("length") || !j["id"].is_string() ||
      !j["length"].is_number_unsigned()) {
    throw FormatError("plan file: each line needs string \"id\" and non-negative \"length\"");
  }
  VideoSpec v{j["id"].get<std::string>(), j["length"].get<std::size_t>()};
  if (v.length_frames == 0) throw FormatError("plan file: video '" + v.id + "' has zero length");
  return v;
}

nlohmann::json parse_line(const std::string& line) {
  try {
    return nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("plan file: ") + e.what());
  }
}

template <typename F>
void for_each_line(const std::string& path, F&& fn) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open for reading: " + path);
  std::string line;
  while (std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    fn(line);
  }
}

}  // namespace

PlannedVideo plan_from_json_line(const std::string& line) {
  const auto j = parse_line(line);
  PlannedVideo pv;
  pv.video = parse_video(j);
  pv.plan.video_id = pv.video.id;
  if (!j.contains("segments") || !j["segments"].is_array()) {
    throw FormatError("plan file: video '" + pv.video.id + "' lacks a \"segments\" array");
  }
  for (const auto& s : j["segments"]) {
    if (!s.is_array() || s.size() != 2 || !s[0].is_number_unsigned() || !s[1].is_number_unsigned()) {
      throw FormatError("plan file: segments must be [start, length] pairs");
    }
    pv.plan.segments.push_back({s[0].get<std::size_t>(), s[1].get<std::size_t>()});
  }
  validate_plan(pv.plan, pv.video.length_frames);
  return pv;
}

void write_plan_file(const std::string& path, const std::vector<PlannedVideo>& plans) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open for writing: " + path);
  for (const auto& pv : plans) os << plan_to_json_line(pv) << '\n';
}

std::vector<PlannedVideo> read_plan_file(const std::string& path) {
  std::vector<PlannedVideo> out;
  for_each_line(path, [&](const std::string& line) { out.push_back(plan_from_json_line(line)); });
  return out;
}

std::vector<VideoSpec> read_video_list(const std::string& path) {
  std::vector<VideoSpec> out;
  for_each_line(path, [&](const std::string& line) { out.push_back(parse_video(parse_line(line))); });
  return out;
}

std::string stats_to_json(const DatasetStats& stats) {
  nlohmann::ordered_json j;
  j["fake_ratio_one_seg"] = stats.fake_ratio_one_seg ? nlohmann::ordered_json(*stats.fake_ratio_one_seg)
                                                     : nlohmann::ordered_json(nullptr);
  j["fake_ratio_two_seg"] = stats.fake_ratio_two_seg ? nlohmann::ordered_json(*stats.fake_ratio_two_seg)
                                                     : nlohmann::ordered_json(nullptr);
  j["avg_length"] = stats.avg_length;
  return j.dump(2);
}

DatasetStats stats_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("stats file: ") + e.what());
  }
  DatasetStats s;
  auto opt = [&](const char* key) -> std::optional<double> {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    return j[key].get<double>();
  };
  s.fake_ratio_one_seg = opt("fake_ratio_one_seg");
  s.fake_ratio_two_seg = opt("fake_ratio_two_seg");
  if (!j.contains("avg_length")) throw FormatError("stats file: missing avg_length");
  s.avg_length = j["avg_length"].get<double>();
  return s;
}

}  // namespace fakeseg
