#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fakeseg/tst.hpp"
#include "fakeseg/windowing.hpp"

namespace fakeseg {

/// Labeled windows pooled over many videos; windows never span two videos.
struct LabeledWindows {
  std::size_t window = 0;
  std::size_t dim = 0;
  std::vector<float> data;
  std::vector<FrameLabel> labels;

  std::size_t size() const { return labels.size(); }
  /// Appends every window of a labeled batch.
  void append(const WindowBatch& batch);
  Matrix<float> window_at(std::size_t i) const;
  std::size_t count(FrameLabel label) const;
};

struct TrainConfig {
  std::size_t batch_size = 64;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t patience = 10;
  std::size_t max_epochs = 100;
  std::uint64_t seed = 0;
  /// Weight each class by N / (2 N_c) in the training loss.
  bool class_balance = false;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  bool stopped_early = false;

  std::string to_json() const;
  friend bool operator==(const TrainHistory&, const TrainHistory&) = default;
};

struct TrainResult {
  TstModel<float> model;  // parameters of the best validation epoch
  TrainHistory history;
};

/// Adam with bias-corrected first and second moments.
class Adam {
 public:
  Adam(const TstParams<float>& shape, double lr, double beta1, double beta2, double epsilon);
  void step(TstParams<float>& params, TstParams<float>& grads);
  std::size_t steps() const { return t_; }

 private:
  TstParams<float> m_;
  TstParams<float> v_;
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

/// Mean cross-entropy and accuracy of a model over a window set, no dropout.
struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
};
Evaluation evaluate(const TstModel<float>& model, const LabeledWindows& set);

/// Mini-batch training with early stopping on validation loss.
///
/// Stops once validation loss has not improved for `patience` consecutive
/// epochs and returns the best epoch's parameters. Deterministic in seed.
TrainResult train(const TstModel<float>& initial, const LabeledWindows& train_set,
                  const LabeledWindows& val_set, const TrainConfig& cfg);

/// Frame-level Fake scores for one video: windows, forward, frame projection.
ScoreMap predict_video(const TstModel<float>& model, const FeatureSequence& seq,
                       const WindowSpec& spec,
                       FrameAggregation aggregation = FrameAggregation::Mean);

}  // namespace fakeseg
