#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "fakeseg/segmap.hpp"

namespace fakeseg {

/// T x d per-frame features, one row per frame.
using FeatureMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct FeatureSequence {
  std::string video_id;
  FeatureMatrix features;
  std::optional<SegmentationMap> labels;

  std::size_t length() const { return static_cast<std::size_t>(features.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(features.cols()); }
};

/// Geometry of a sliding window pass.
struct WindowSpec {
  std::size_t size = 5;
  std::size_t overlap = 4;

  std::size_t stride() const { return size - overlap; }
};

/// N windows of W consecutive frames from one video.
struct WindowBatch {
  std::size_t window = 0;
  std::size_t dim = 0;
  /// N * W * d floats, window-major then frame-major.
  std::vector<float> data;
  std::vector<std::size_t> starts;
  /// Label of each window's center frame; empty when the sequence is unlabeled.
  std::vector<FrameLabel> labels;

  std::size_t count() const { return starts.size(); }

  Eigen::Map<const FeatureMatrix> window_at(std::size_t i) const {
    return {data.data() + i * window * dim, static_cast<Eigen::Index>(window),
            static_cast<Eigen::Index>(dim)};
  }
};

/// Window start positions for a video of `length` frames.
///
/// Starts advance by the stride; if the last full window stops short of
/// the end, one more window is added flush with the end of the video.
std::vector<std::size_t> window_starts(std::size_t length, const WindowSpec& spec);

/// Splits a sequence into windows; each window is labeled by its center
/// frame (start + W/2) when the sequence carries labels.
WindowBatch make_windows(const FeatureSequence& seq, const WindowSpec& spec);

enum class FrameAggregation { Mean, Max, Center };

/// Projects per-window scores back onto frames.
///
/// Mean (the default) averages every window covering a frame, Max takes
/// the largest, Center uses the covering window whose center is nearest.
ScoreMap frames_from_windows(const std::vector<double>& window_scores,
                             const std::vector<std::size_t>& starts, std::size_t window,
                             std::size_t length,
                             FrameAggregation aggregation = FrameAggregation::Mean);

FrameAggregation parse_aggregation(const std::string& name);
std::string to_string(FrameAggregation aggregation);

// Binary feature files: "TFKF", u32 version = 1, u32 T, u32 d, then T*d
// little-endian float32 values in row-major order.
inline constexpr std::uint32_t kFeatureFileVersion = 1;

void write_features(const std::string& path, const FeatureMatrix& features);
FeatureMatrix read_features(const std::string& path);
void write_features(std::ostream& os, const FeatureMatrix& features);
FeatureMatrix read_features(std::istream& is);

/// Path of the label file stored next to a feature file ("x.tfkf" -> "x.labels").
std::string label_path_for(const std::string& feature_path);

/// Writes features and, when present, the sibling label file.
void save_sequence(const std::string& feature_path, const FeatureSequence& seq);
/// Reads features and the sibling label file if it exists.
FeatureSequence load_sequence(const std::string& feature_path, const std::string& video_id);

}  // namespace fakeseg
