#pragma once

#include "fakeseg/segmap.hpp"

namespace fakeseg {

/// Parameters of the random-guess IoU baseline.
///
/// `real_ratio` is the fraction of Real frames in the ground truth and
/// `p_real` is the probability that a random guess emits Real. Note that
/// `real_ratio` is the complement of the fake ratio reported for datasets.
struct BaselineParams {
  double real_ratio = 0.5;
  double p_real = 0.5;
};

/// Number of frames on which the two maps agree.
std::size_t count_agreement(const SegmentationMap& gt, const SegmentationMap& pred);

/// Frame-set IoU: agreeing frames over (agreeing + 2 * disagreeing).
///
/// With C agreeing and W = T - C disagreeing frames, the intersection of
/// the (frame, label) sets has C elements and their union C + 2W.
double iou(const SegmentationMap& gt, const SegmentationMap& pred);

/// Fraction of frames on which the maps agree.
double frame_accuracy(const SegmentationMap& gt, const SegmentationMap& pred);

/// Expected IoU of a random guesser, computed as E[C] / E[Union].
///
/// For a single frame the expected agreement is
/// alpha = 1 + 2 f p - f - p, so the result is alpha / (2 - alpha).
/// This is a ratio of expectations; E[IoU] for a finite map differs
/// slightly from it.
double expected_iou_baseline(const BaselineParams& params);

/// ROC-AUC of Fake scores against the ground truth, ties counted as 1/2
/// through midranks. Throws DomainError if the truth has a single class.
double frame_auc(const SegmentationMap& gt, const ScoreMap& scores);

/// Same statistic over any label/score pairing, e.g. one entry per video.
double binary_auc(std::span<const FrameLabel> truth, std::span<const double> scores);

/// Mean per-frame Fake probability.
double video_score(const ScoreMap& scores);

/// Video-level decision: Fake iff video_score >= threshold.
FrameLabel video_label(const ScoreMap& scores, double threshold = 0.5);

/// Spearman rank correlation with midranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

/// Midranks (1-based) of the values, ties receive their mean rank.
std::vector<double> midranks(std::span<const double> values);

}  // namespace fakeseg
