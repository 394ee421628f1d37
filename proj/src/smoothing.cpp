#include "fakeseg/smoothing.hpp"

#include <algorithm>
#include <optional>
#include <vector>

namespace fakeseg {

namespace {

/// Majority label of `fake` Fake votes out of `total`; none on a tie or no votes.
std::optional<FrameLabel> majority(std::size_t fake, std::size_t total) {
  const std::size_t real = total - fake;
  if (fake > real) return FrameLabel::Fake;
  if (real > fake) return FrameLabel::Real;
  return std::nullopt;
}

}  // namespace

SegmentationMap smooth(const SegmentationMap& pred, const SmoothConfig& cfg) {
  const std::size_t n = pred.size();
  SegmentationMap out = pred;
  if (cfg.k == 0 || n < 2) return out;

  // prefix[i] = number of Fake labels in pred[0, i)
  std::vector<std::size_t> prefix(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + (pred[i] == FrameLabel::Fake);

  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= cfg.k ? i - cfg.k : 0;
    const std::size_t hi = std::min(n, i + 1 + cfg.k);
    const std::size_t left_n = i - lo;
    const std::size_t right_n = hi - (i + 1);
    const auto left = majority(prefix[i] - prefix[lo], left_n);
    const auto right = majority(prefix[hi] - prefix[i + 1], right_n);
    const FrameLabel cur = pred[i];

    if (left_n == 0) {
      if (right && *right != cur) out[i] = *right;
    } else if (right_n == 0) {
      if (left && *left != cur) out[i] = *left;
    } else if (left && right && *left == *right && *left != cur) {
      out[i] = *left;
    }
  }
  return out;
}

SegmentationMap smooth_scores(const ScoreMap& scores, double threshold, const SmoothConfig& cfg) {
  return smooth(scores.threshold(threshold), cfg);
}

}  // namespace fakeseg
