#include "fakeseg/segmap.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "fakeseg/error.hpp"

namespace fakeseg {

SegmentationMap SegmentationMap::from_string(std::string_view text) {
  std::vector<FrameLabel> labels;
  labels.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case 'R': labels.push_back(FrameLabel::Real); break;
      case 'F': labels.push_back(FrameLabel::Fake); break;
      default:
        throw FormatError(std::string("segmentation map: unexpected character '") + c + "'");
    }
  }
  return SegmentationMap(std::move(labels));
}

SegmentationMap SegmentationMap::from_bits(std::span<const int> bits) {
  std::vector<FrameLabel> labels;
  labels.reserve(bits.size());
  for (int b : bits) {
    if (b != 0 && b != 1) throw FormatError("segmentation map: label must be 0 or 1");
    labels.push_back(b == 1 ? FrameLabel::Fake : FrameLabel::Real);
  }
  return SegmentationMap(std::move(labels));
}

std::size_t SegmentationMap::count_fake() const {
  return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), FrameLabel::Fake));
}

double SegmentationMap::fake_ratio() const {
  if (labels_.empty()) return 0.0;
  return static_cast<double>(count_fake()) / static_cast<double>(labels_.size());
}

double SegmentationMap::real_ratio() const {
  if (labels_.empty()) return 0.0;
  return 1.0 - fake_ratio();
}

std::string SegmentationMap::to_string() const {
  std::string s;
  s.reserve(labels_.size());
  for (auto l : labels_) s.push_back(to_char(l));
  return s;
}

ScoreMap::ScoreMap(std::vector<double> scores) : scores_(std::move(scores)) {
  for (double s : scores_) {
    if (!(s >= 0.0 && s <= 1.0)) throw DomainError("score map: scores must lie in [0, 1]");
  }
}

SegmentationMap ScoreMap::threshold(double threshold) const {
  std::vector<FrameLabel> labels(scores_.size());
  for (std::size_t i = 0; i < scores_.size(); ++i) {
    labels[i] = scores_[i] >= threshold ? FrameLabel::Fake : FrameLabel::Real;
  }
  return SegmentationMap(std::move(labels));
}

std::vector<Segment> segments_of(const SegmentationMap& map) {
  std::vector<Segment> out;
  const std::size_t n = map.size();
  std::size_t i = 0;
  while (i < n) {
    if (map[i] != FrameLabel::Fake) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && map[j] == FrameLabel::Fake) ++j;
    out.push_back({i, j - i});
    i = j;
  }
  return out;
}

void write_segmap_text(std::ostream& os, const SegmentationMap& map) {
  os << map.to_string() << '\n';
}

SegmentationMap read_segmap_text(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("segmentation map: no line to read");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return SegmentationMap::from_string(line);
}

std::vector<SegmentationMap> read_segmap_text_all(std::istream& is) {
  std::vector<SegmentationMap> out;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    out.push_back(SegmentationMap::from_string(line));
  }
  return out;
}

std::string segmap_to_json(const SegmentationMap& map) {
  nlohmann::json j;
  auto& arr = j["labels"] = nlohmann::json::array();
  for (auto l : map) arr.push_back(static_cast<int>(l));
  return j.dump();
}

SegmentationMap segmap_from_json(std::string_view json) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("segmentation map JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("labels") || !j["labels"].is_array()) {
    throw FormatError("segmentation map JSON: expected {\"labels\": [...]}");
  }
  std::vector<int> bits;
  for (const auto& v : j["labels"]) {
    if (!v.is_number_integer()) throw FormatError("segmentation map JSON: labels must be integers");
    bits.push_back(v.get<int>());
  }
  return SegmentationMap::from_bits(bits);
}

void save_segmap(const std::string& path, const SegmentationMap& map) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open for writing: " + path);
  write_segmap_text(os, map);
}

SegmentationMap load_segmap(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open for reading: " + path);
  return read_segmap_text(is);
}

}  // namespace fakeseg
