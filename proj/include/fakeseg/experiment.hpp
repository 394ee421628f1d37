#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fakeseg/error.hpp"
#include "fakeseg/injection.hpp"
#include "fakeseg/smoothing.hpp"
#include "fakeseg/synth.hpp"
#include "fakeseg/trainer.hpp"
#include "fakeseg/windowing.hpp"

namespace fakeseg {

/// Invalid experiment configuration (CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Failure inside a pipeline stage (CLI exit code 3).
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error("stage '" + stage + "' failed: " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct DatasetSection {
  /// "synthetic" generates videos; "features" reads <feature_dir>/{train,val,test}/*.tfkf.
  std::string source = "synthetic";
  PlanMode plan_mode = PlanMode::OneSegment;
  std::uint64_t plan_seed = 1;
  std::size_t train_videos = 16;
  std::size_t val_videos = 4;
  std::size_t test_videos = 10;
  /// Extra all-Real test videos, so video-level AUC has both classes.
  std::size_t pristine_test_videos = 0;
  std::size_t min_length = 500;
  std::size_t max_length = 700;
  std::string feature_dir;
  SynthConfig synth;
};

struct WindowGrid {
  std::vector<std::size_t> windows;
  std::vector<std::size_t> overlaps;
};

struct EvalSection {
  std::size_t window = 5;
  std::size_t overlap = 4;
  double threshold = 0.5;
  std::size_t k = 7;
  FrameAggregation aggregation = FrameAggregation::Mean;
  /// Segment lengths (frames) for the length sweep; empty skips it.
  std::vector<std::size_t> segment_lengths;
  std::size_t sweep_videos = 20;
  /// Frame rate used only to label lengths in seconds.
  double fps = 25.0;
  std::optional<WindowGrid> window_grid;

  WindowSpec window_spec() const { return {window, overlap}; }
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::uint64_t seed = 1;
  std::size_t workers = 1;
  DatasetSection dataset;
  TstConfig model;  // window and input_dim are taken from eval.window and the data
  TrainConfig train;
  EvalSection eval;
};

/// Parses and validates a JSON experiment config; unknown keys are errors.
ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::string& path);
/// Canonical JSON of a config (every field explicit).
std::string experiment_config_to_json(const ExperimentConfig& cfg);

/// Frame- and video-level metrics of one test video.
struct VideoMetrics {
  std::string id;
  std::size_t frames = 0;
  double fake_ratio = 0.0;
  double iou_raw = 0.0;
  double iou_smoothed = 0.0;
  double accuracy_raw = 0.0;
  double accuracy_smoothed = 0.0;
  /// Fraction of frames predicted Fake before smoothing.
  double predicted_fake_ratio = 0.0;
  std::optional<double> auc;  // undefined for single-class videos
  double video_score = 0.0;
  FrameLabel video_truth = FrameLabel::Real;

  friend bool operator==(const VideoMetrics&, const VideoMetrics&) = default;
};

struct Aggregates {
  double iou_raw = 0.0;
  double iou_smoothed = 0.0;
  double accuracy_raw = 0.0;
  double accuracy_smoothed = 0.0;
  std::optional<double> auc;        // mean over videos with a defined AUC
  std::optional<double> video_auc;  // AUC of mean frame scores across videos
  double video_accuracy = 0.0;
  /// Expected IoU of a p = 0.5 guesser at the test set's mean Real ratio.
  double random_baseline_iou = 0.0;
  /// Expected IoU of a guesser emitting Real at the model's realized rate
  /// (per-video baselines averaged).
  double matched_baseline_iou = 0.0;

  friend bool operator==(const Aggregates&, const Aggregates&) = default;
};

struct LengthSweepRow {
  std::size_t length = 0;
  double seconds = 0.0;
  double iou = 0.0;
  double auc = 0.0;
};

struct WindowGridCell {
  std::size_t window = 0;
  std::size_t overlap = 0;
  bool valid = false;  // false when overlap >= window
  double iou = 0.0;
  double auc = 0.0;
  double iou_smoothed = 0.0;
};

struct EvalReport {
  std::string name;
  std::uint64_t seed = 0;
  std::vector<VideoMetrics> videos;
  Aggregates aggregate;
  std::vector<LengthSweepRow> length_sweep;
  std::vector<WindowGridCell> window_grid;
  double fps = 25.0;
};

/// Means over per-video rows (the single source for every aggregate).
Aggregates aggregate_rows(const std::vector<VideoMetrics>& rows, double threshold);

/// Scores one video: raw threshold, smoothing, IoU/accuracy/AUC, video score.
VideoMetrics score_video(const std::string& id, const SegmentationMap& truth, const ScoreMap& scores,
                         double threshold, const SmoothConfig& smoothing);

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);
std::string report_to_text(const EvalReport& report);
std::string report_to_csv(const EvalReport& report);
std::string length_sweep_to_csv(const std::vector<LengthSweepRow>& rows);
std::string window_grid_to_csv(const std::vector<WindowGridCell>& cells);

/// Train/val/test feature sequences of an experiment.
struct ExperimentData {
  std::vector<FeatureSequence> train, val, test;
  std::vector<PlannedVideo> train_plans, val_plans, test_plans;
};

/// Builds (synthetic) or loads (features) the three splits.
ExperimentData build_dataset(const ExperimentConfig& cfg);

/// Model config for a window size and feature dimension.
TstConfig model_config_for(const ExperimentConfig& cfg, std::size_t window, std::size_t dim);

/// Pools labeled windows of the given videos.
LabeledWindows pool_windows(const std::vector<FeatureSequence>& videos, const WindowSpec& spec);

/// Trains a model on the train/val splits with the given window geometry.
TrainResult train_on(const ExperimentConfig& cfg, const ExperimentData& data, const WindowSpec& spec);

/// Injects one segment of each length into fresh synthetic videos and
/// reports mean IoU/AUC without smoothing. Every length reuses the same
/// video ids, lengths, starts and noise, so rows differ only in length.
std::vector<LengthSweepRow> sweep_segment_lengths(const TstModel<float>& model,
                                                  const std::vector<std::size_t>& lengths,
                                                  const ExperimentConfig& cfg);

/// Trains one model per (window, overlap) pair and scores it on the test
/// split. Pairs with overlap >= window are returned with valid = false.
std::vector<WindowGridCell> sweep_window_grid(const ExperimentConfig& cfg, const ExperimentData& data,
                                              const std::vector<std::size_t>& windows,
                                              const std::vector<std::size_t>& overlaps);

/// Full pipeline. Writes every artifact under `run_dir`:
/// config.json, plans/, features/, model.tfkm, history.json, predictions/,
/// report.json, report.txt, report.csv (and sweep CSVs when configured).
EvalReport run_experiment(const ExperimentConfig& cfg, const std::string& run_dir);

/// Recomputes a report's per-video rows and aggregates from the persisted
/// labels and score files of a run directory.
EvalReport recompute_report(const std::string& run_dir);

// Score files: one Fake probability per line, printed with 17 significant digits.
void write_scores(const std::string& path, const ScoreMap& scores);
ScoreMap read_scores(const std::string& path);

/// Runs fn(i) for i in [0, n) on at most `workers` threads; results must be
/// written to per-index slots. The first exception is rethrown.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

}  // namespace fakeseg
