#include "fakeseg/synth.hpp"

#include <cmath>

#include "fakeseg/error.hpp"
#include "fakeseg/rng.hpp"

namespace fakeseg {

void SynthConfig::validate() const {
  if (dim == 0) throw DomainError("synth config: dim must be positive");
  if (!(separation >= 0.0)) throw DomainError("synth config: separation must be >= 0");
  if (!(temporal_rho >= 0.0 && temporal_rho < 1.0)) {
    throw DomainError("synth config: temporal_rho must lie in [0, 1)");
  }
  if (!(noise_std > 0.0)) throw DomainError("synth config: noise_std must be positive");
}

FeatureMatrix class_means(const SynthConfig& cfg) {
  cfg.validate();
  Pcg32 rng(mix64(cfg.seed), 0x3ea5u);
  Eigen::VectorXd dir(static_cast<Eigen::Index>(cfg.dim));
  for (Eigen::Index i = 0; i < dir.size(); ++i) dir(i) = rng.normal();
  dir.normalize();
  const double half = 0.5 * cfg.separation * cfg.noise_std;
  FeatureMatrix means(2, dir.size());
  for (Eigen::Index i = 0; i < dir.size(); ++i) {
    means(0, i) = static_cast<float>(-half * dir(i));
    means(1, i) = static_cast<float>(half * dir(i));
  }
  return means;
}

FeatureSequence synth_video(const SegmentPlan& plan, std::size_t length, const SynthConfig& cfg) {
  cfg.validate();
  FeatureSequence seq;
  seq.video_id = plan.video_id;
  seq.labels = render_map(plan, length);
  const FeatureMatrix means = class_means(cfg);
  const auto d = static_cast<Eigen::Index>(cfg.dim);

  Pcg32 rng(derive_seed(cfg.seed, plan.video_id), 0x5e9u);
  seq.features.resize(static_cast<Eigen::Index>(length), d);
  const double rho = cfg.temporal_rho;
  std::vector<double> prev(static_cast<std::size_t>(d));
  const auto first = static_cast<Eigen::Index>((*seq.labels)[0]);
  for (Eigen::Index j = 0; j < d; ++j) prev[static_cast<std::size_t>(j)] = means(first, j);

  for (std::size_t t = 0; t < length; ++t) {
    const auto c = static_cast<Eigen::Index>((*seq.labels)[t]);
    for (Eigen::Index j = 0; j < d; ++j) {
      const double sample = means(c, j) + cfg.noise_std * rng.normal();
      const double x = (1.0 - rho) * sample + rho * prev[static_cast<std::size_t>(j)];
      prev[static_cast<std::size_t>(j)] = x;
      seq.features(static_cast<Eigen::Index>(t), j) = static_cast<float>(x);
    }
  }
  return seq;
}

}  // namespace fakeseg
