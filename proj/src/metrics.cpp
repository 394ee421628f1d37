#include "fakeseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fakeseg/error.hpp"

namespace fakeseg {

namespace {

void require_same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw ShapeError(std::string(what) + ": length mismatch (" + std::to_string(a) + " vs " +
                     std::to_string(b) + ")");
  }
}

}  // namespace

std::size_t count_agreement(const SegmentationMap& gt, const SegmentationMap& pred) {
  require_same_length(gt.size(), pred.size(), "count_agreement");
  std::size_t c = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) c += gt[i] == pred[i];
  return c;
}

double iou(const SegmentationMap& gt, const SegmentationMap& pred) {
  require_same_length(gt.size(), pred.size(), "iou");
  if (gt.empty()) throw DomainError("iou: empty maps");
  const auto agree = static_cast<double>(count_agreement(gt, pred));
  const auto wrong = static_cast<double>(gt.size()) - agree;
  return agree / (agree + 2.0 * wrong);
}

double frame_accuracy(const SegmentationMap& gt, const SegmentationMap& pred) {
  require_same_length(gt.size(), pred.size(), "frame_accuracy");
  if (gt.empty()) throw DomainError("frame_accuracy: empty maps");
  return static_cast<double>(count_agreement(gt, pred)) / static_cast<double>(gt.size());
}

double expected_iou_baseline(const BaselineParams& params) {
  const double f = params.real_ratio;
  const double p = params.p_real;
  if (!(f >= 0.0 && f <= 1.0) || !(p >= 0.0 && p <= 1.0)) {
    throw DomainError("expected_iou_baseline: f and p must lie in [0, 1]");
  }
  const double alpha = 1.0 + 2.0 * f * p - f - p;
  return alpha / (2.0 - alpha);
}

std::vector<double> midranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    // ranks i+1 .. j share their mean
    const double r = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = r;
    i = j;
  }
  return ranks;
}

double binary_auc(std::span<const FrameLabel> truth, std::span<const double> scores) {
  require_same_length(truth.size(), scores.size(), "auc");
  std::size_t n_pos = 0;
  for (auto l : truth) n_pos += l == FrameLabel::Fake;
  const std::size_t n_neg = truth.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw DomainError("AUC undefined: ground truth has a single class");

  const auto ranks = midranks(scores);
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    if (truth[i] == FrameLabel::Fake) rank_sum += ranks[i];
  }
  const double np = static_cast<double>(n_pos);
  const double u = rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(n_neg));
}

double frame_auc(const SegmentationMap& gt, const ScoreMap& scores) {
  require_same_length(gt.size(), scores.size(), "frame_auc");
  return binary_auc(gt.labels(), scores.scores());
}

double video_score(const ScoreMap& scores) {
  if (scores.empty()) throw DomainError("video_score: empty score map");
  double s = 0.0;
  for (double v : scores) s += v;
  return s / static_cast<double>(scores.size());
}

FrameLabel video_label(const ScoreMap& scores, double threshold) {
  return video_score(scores) >= threshold ? FrameLabel::Fake : FrameLabel::Real;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  require_same_length(x.size(), y.size(), "spearman");
  if (x.size() < 2) throw DomainError("spearman: need at least two points");
  const auto rx = midranks(x);
  const auto ry = midranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace fakeseg
