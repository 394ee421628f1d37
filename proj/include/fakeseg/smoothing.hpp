#pragma once

#include <cstddef>

#include "fakeseg/segmap.hpp"

namespace fakeseg {

struct SmoothConfig {
  /// Neighbours considered on each side of a frame; 0 disables smoothing.
  std::size_t k = 7;
};

/// Majority-vote smoothing of frame labels.
///
/// For frame i, L and R are the (up to) k labels left and right of it in
/// the input map. At the left edge a frame takes the majority of R, at the
/// right edge the majority of L; elsewhere it is relabeled only when L and
/// R agree on a majority that differs from it. Votes are always read from
/// the input, never from already-rewritten frames, so the result does not
/// depend on scan order. A tied vote has no majority and changes nothing.
SegmentationMap smooth(const SegmentationMap& pred, const SmoothConfig& cfg);

/// Thresholds Fake scores (score >= threshold is Fake), then smooths.
SegmentationMap smooth_scores(const ScoreMap& scores, double threshold, const SmoothConfig& cfg);

}  // namespace fakeseg
