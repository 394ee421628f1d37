#pragma once

#include <cstdint>

#include "fakeseg/injection.hpp"
#include "fakeseg/windowing.hpp"

namespace fakeseg {

/// Two-class Gaussian frame features with AR(1) temporal mixing.
struct SynthConfig {
  std::size_t dim = 16;
  /// Distance between the class means, in units of noise_std.
  double separation = 4.0;
  /// Weight of the previous frame's feature, in [0, 1).
  double temporal_rho = 0.3;
  double noise_std = 1.0;
  /// Fixes the class means; per-video noise is keyed by video id on top of it.
  std::uint64_t seed = 1;

  void validate() const;
};

/// Class means of a config: -/+ (separation * noise_std / 2) along a unit
/// direction drawn from the seed. Row 0 is Real, row 1 is Fake.
FeatureMatrix class_means(const SynthConfig& cfg);

/// Features of one video labeled by `plan`.
///
/// Frame t is (1 - rho) * (mean(label_t) + noise_std * z_t) + rho * x_{t-1},
/// with z_t standard normal and x_{-1} taken as the mean of frame 0's class.
FeatureSequence synth_video(const SegmentPlan& plan, std::size_t length, const SynthConfig& cfg);

}  // namespace fakeseg
