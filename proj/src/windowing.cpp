#include "fakeseg/windowing.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "fakeseg/binary_io.hpp"
#include "fakeseg/error.hpp"

namespace fakeseg {

namespace {

constexpr std::string_view kFeatureMagic = "TFKF";

void check_spec(std::size_t length, const WindowSpec& spec) {
  if (spec.size == 0) throw DomainError("window size must be positive");
  if (spec.overlap >= spec.size) {
    throw DomainError("window overlap " + std::to_string(spec.overlap) +
                      " must be smaller than window size " + std::to_string(spec.size));
  }
  if (spec.size > length) {
    throw DomainError("window size " + std::to_string(spec.size) + " exceeds sequence length " +
                      std::to_string(length));
  }
}

}  // namespace

std::vector<std::size_t> window_starts(std::size_t length, const WindowSpec& spec) {
  check_spec(length, spec);
  std::vector<std::size_t> starts;
  const std::size_t last = length - spec.size;
  for (std::size_t s = 0; s <= last; s += spec.stride()) starts.push_back(s);
  if (starts.back() != last) starts.push_back(last);
  return starts;
}

WindowBatch make_windows(const FeatureSequence& seq, const WindowSpec& spec) {
  const std::size_t t = seq.length();
  const std::size_t d = seq.dim();
  if (d == 0) throw DomainError("make_windows: feature dimension must be positive");
  if (seq.labels && seq.labels->size() != t) {
    throw ShapeError("make_windows: label map length " + std::to_string(seq.labels->size()) +
                     " differs from feature length " + std::to_string(t));
  }
  WindowBatch batch;
  batch.window = spec.size;
  batch.dim = d;
  batch.starts = window_starts(t, spec);
  batch.data.resize(batch.starts.size() * spec.size * d);
  for (std::size_t i = 0; i < batch.starts.size(); ++i) {
    const float* src = seq.features.data() + batch.starts[i] * d;
    std::copy(src, src + spec.size * d, batch.data.begin() + static_cast<std::ptrdiff_t>(i * spec.size * d));
    if (seq.labels) batch.labels.push_back((*seq.labels)[batch.starts[i] + spec.size / 2]);
  }
  return batch;
}

ScoreMap frames_from_windows(const std::vector<double>& window_scores,
                             const std::vector<std::size_t>& starts, std::size_t window,
                             std::size_t length, FrameAggregation aggregation) {
  if (window_scores.size() != starts.size()) {
    throw ShapeError("frames_from_windows: " + std::to_string(window_scores.size()) +
                     " scores for " + std::to_string(starts.size()) + " windows");
  }
  for (auto s : starts) {
    if (s + window > length) throw ShapeError("frames_from_windows: window exceeds video length");
  }
  std::vector<double> acc(length, 0.0);
  std::vector<std::size_t> cover(length, 0);
  // Center mode: distance from frame to the center of the chosen window.
  std::vector<double> best_dist(length, std::numeric_limits<double>::infinity());

  for (std::size_t w = 0; w < starts.size(); ++w) {
    const double score = window_scores[w];
    const double center = static_cast<double>(starts[w]) + static_cast<double>(window / 2);
    for (std::size_t t = starts[w]; t < starts[w] + window; ++t) {
      switch (aggregation) {
        case FrameAggregation::Mean: acc[t] += score; break;
        case FrameAggregation::Max: acc[t] = cover[t] == 0 ? score : std::max(acc[t], score); break;
        case FrameAggregation::Center: {
          const double dist = std::abs(static_cast<double>(t) - center);
          if (dist < best_dist[t]) {
            best_dist[t] = dist;
            acc[t] = score;
          }
          break;
        }
      }
      ++cover[t];
    }
  }
  for (std::size_t t = 0; t < length; ++t) {
    if (cover[t] == 0) throw Error("frames_from_windows: frame " + std::to_string(t) + " not covered");
    if (aggregation == FrameAggregation::Mean) acc[t] /= static_cast<double>(cover[t]);
    acc[t] = std::clamp(acc[t], 0.0, 1.0);
  }
  return ScoreMap(std::move(acc));
}

FrameAggregation parse_aggregation(const std::string& name) {
  if (name == "mean") return FrameAggregation::Mean;
  if (name == "max") return FrameAggregation::Max;
  if (name == "center") return FrameAggregation::Center;
  throw DomainError("unknown frame aggregation '" + name + "' (expected mean, max or center)");
}

std::string to_string(FrameAggregation aggregation) {
  switch (aggregation) {
    case FrameAggregation::Mean: return "mean";
    case FrameAggregation::Max: return "max";
    case FrameAggregation::Center: return "center";
  }
  return "mean";
}

void write_features(std::ostream& os, const FeatureMatrix& features) {
  binio::put_magic(os, kFeatureMagic);
  binio::put_u32(os, kFeatureFileVersion);
  binio::put_u32(os, static_cast<std::uint32_t>(features.rows()));
  binio::put_u32(os, static_cast<std::uint32_t>(features.cols()));
  const float* p = features.data();
  for (Eigen::Index i = 0; i < features.size(); ++i) binio::put_f32(os, p[i]);
  if (!os) throw Error("feature file: write failed");
}

FeatureMatrix read_features(std::istream& is) {
  binio::expect_magic(is, kFeatureMagic);
  const auto version = binio::get_u32(is);
  if (version != kFeatureFileVersion) {
    throw FormatError("feature file: unsupported version " + std::to_string(version));
  }
  const auto t = binio::get_u32(is);
  const auto d = binio::get_u32(is);
  if (t == 0 || d == 0) throw FormatError("feature file: empty feature matrix");
  FeatureMatrix m(t, d);
  float* p = m.data();
  for (Eigen::Index i = 0; i < m.size(); ++i) p[i] = binio::get_f32(is);
  if (is.peek() != std::char_traits<char>::eof()) throw FormatError("feature file: trailing bytes");
  return m;
}

void write_features(const std::string& path, const FeatureMatrix& features) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open for writing: " + path);
  write_features(os, features);
}

FeatureMatrix read_features(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open for reading: " + path);
  return read_features(is);
}

std::string label_path_for(const std::string& feature_path) {
  return std::filesystem::path(feature_path).replace_extension(".labels").string();
}

void save_sequence(const std::string& feature_path, const FeatureSequence& seq) {
  write_features(feature_path, seq.features);
  if (seq.labels) save_segmap(label_path_for(feature_path), *seq.labels);
}

FeatureSequence load_sequence(const std::string& feature_path, const std::string& video_id) {
  FeatureSequence seq;
  seq.video_id = video_id;
  seq.features = read_features(feature_path);
  const auto lp = label_path_for(feature_path);
  if (std::filesystem::exists(lp)) {
    seq.labels = load_segmap(lp);
    if (seq.labels->size() != seq.length()) {
      throw FormatError("label file " + lp + " has " + std::to_string(seq.labels->size()) +
                        " frames, features have " + std::to_string(seq.length()));
    }
  }
  return seq;
}

}  // namespace fakeseg
