#include "fakeseg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "fakeseg/error.hpp"
#include "fakeseg/rng.hpp"

namespace fakeseg {

void LabeledWindows::append(const WindowBatch& batch) {
  if (batch.labels.size() != batch.count()) throw ShapeError("LabeledWindows: batch is unlabeled");
  if (size() == 0 && data.empty()) {
    window = batch.window;
    dim = batch.dim;
  } else if (batch.window != window || batch.dim != dim) {
    throw ShapeError("LabeledWindows: window geometry differs between videos");
  }
  data.insert(data.end(), batch.data.begin(), batch.data.end());
  labels.insert(labels.end(), batch.labels.begin(), batch.labels.end());
}

Matrix<float> LabeledWindows::window_at(std::size_t i) const {
  return Eigen::Map<const Matrix<float>>(data.data() + i * window * dim,
                                         static_cast<Eigen::Index>(window),
                                         static_cast<Eigen::Index>(dim));
}

std::size_t LabeledWindows::count(FrameLabel label) const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label));
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw DomainError("train config: batch_size must be positive");
  if (!(learning_rate >= 0.0)) throw DomainError("train config: learning_rate must be >= 0");
  if (patience == 0) throw DomainError("train config: patience must be >= 1");
  if (max_epochs == 0) throw DomainError("train config: max_epochs must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw DomainError("train config: Adam betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw DomainError("train config: epsilon must be positive");
}

std::string TrainHistory::to_json() const {
  nlohmann::ordered_json j;
  j["best_epoch"] = best_epoch;
  j["stopped_early"] = stopped_early;
  auto arr = nlohmann::ordered_json::array();
  for (const auto& e : epochs) {
    nlohmann::ordered_json r;
    r["epoch"] = e.epoch;
    r["train_loss"] = e.train_loss;
    r["train_accuracy"] = e.train_accuracy;
    r["val_loss"] = e.val_loss;
    r["val_accuracy"] = e.val_accuracy;
    arr.push_back(r);
  }
  j["epochs"] = arr;
  return j.dump(2);
}

Adam::Adam(const TstParams<float>& shape, double lr, double beta1, double beta2, double epsilon)
    : m_(shape), v_(shape), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(epsilon) {
  for (auto& t : tensors_of(m_)) std::fill(t.data, t.data + t.size(), 0.0f);
  for (auto& t : tensors_of(v_)) std::fill(t.data, t.data + t.size(), 0.0f);
}

void Adam::step(TstParams<float>& params, TstParams<float>& grads) {
  ++t_;
  auto p = tensors_of(params);
  auto g = tensors_of(grads);
  auto m = tensors_of(m_);
  auto v = tensors_of(v_);
  if (p.size() != g.size() || p.size() != m.size()) throw ShapeError("Adam: parameter layout changed");
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const double step = lr_ * std::sqrt(bc2) / bc1;
  const auto b1 = static_cast<float>(beta1_);
  const auto b2 = static_cast<float>(beta2_);
  const auto eps_hat = static_cast<float>(eps_ * std::sqrt(bc2));
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (Eigen::Index j = 0; j < p[i].size(); ++j) {
      const float gj = g[i].data[j];
      float& mj = m[i].data[j];
      float& vj = v[i].data[j];
      mj = b1 * mj + (1.0f - b1) * gj;
      vj = b2 * vj + (1.0f - b2) * gj * gj;
      p[i].data[j] -= static_cast<float>(step) * mj / (std::sqrt(vj) + eps_hat);
    }
  }
}

namespace {

constexpr std::size_t kEvalChunk = 256;

std::vector<Matrix<float>> gather(const LabeledWindows& set, const std::size_t* idx, std::size_t n) {
  std::vector<Matrix<float>> batch;
  batch.reserve(n);
  for (std::size_t i = 0; i < n; ++i) batch.push_back(set.window_at(idx[i]));
  return batch;
}

void check_set(const LabeledWindows& set, const TstConfig& cfg, const char* which) {
  if (set.size() == 0) throw DomainError(std::string("train: empty ") + which + " set");
  if (set.window != cfg.window || set.dim != cfg.input_dim) {
    throw ShapeError(std::string("train: ") + which + " windows are " + std::to_string(set.window) +
                     "x" + std::to_string(set.dim) + ", model expects " + std::to_string(cfg.window) +
                     "x" + std::to_string(cfg.input_dim));
  }
}

}  // namespace

Evaluation evaluate(const TstModel<float>& model, const LabeledWindows& set) {
  check_set(set, model.config(), "evaluation");
  std::vector<std::size_t> idx(set.size());
  std::iota(idx.begin(), idx.end(), 0);
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t s = 0; s < set.size(); s += kEvalChunk) {
    const std::size_t n = std::min(kEvalChunk, set.size() - s);
    TstForwardCache<float> cache;
    const auto probs = tst_forward(model, gather(set, idx.data() + s, n), &cache);
    std::vector<FrameLabel> targets(set.labels.begin() + static_cast<std::ptrdiff_t>(s),
                                    set.labels.begin() + static_cast<std::ptrdiff_t>(s + n));
    loss += static_cast<double>(tst_loss(cache, targets)) * static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto predicted = probs(static_cast<Eigen::Index>(i), 1) >= probs(static_cast<Eigen::Index>(i), 0)
                                 ? FrameLabel::Fake
                                 : FrameLabel::Real;
      correct += predicted == targets[i];
    }
  }
  const auto total = static_cast<double>(set.size());
  return {loss / total, static_cast<double>(correct) / total};
}

TrainResult train(const TstModel<float>& initial, const LabeledWindows& train_set,
                  const LabeledWindows& val_set, const TrainConfig& cfg) {
  cfg.validate();
  const auto& mcfg = initial.config();
  check_set(train_set, mcfg, "training");
  check_set(val_set, mcfg, "validation");
  const std::size_t n_fake = train_set.count(FrameLabel::Fake);
  const std::size_t n_real = train_set.size() - n_fake;
  if (n_fake == 0 || n_real == 0) {
    throw DomainError("train: training set contains a single class");
  }
  std::vector<float> class_weight{1.0f, 1.0f};
  if (cfg.class_balance) {
    const auto n = static_cast<double>(train_set.size());
    class_weight[0] = static_cast<float>(n / (2.0 * static_cast<double>(n_real)));
    class_weight[1] = static_cast<float>(n / (2.0 * static_cast<double>(n_fake)));
  }

  TstModel<float> model = initial;
  Adam adam(model.params(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon);
  Pcg32 shuffle_rng(cfg.seed, 0x5f1u);

  TrainResult result{model, {}};
  double best = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.below(static_cast<std::uint32_t>(i))]);
    }
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t s = 0; s < order.size(); s += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - s);
      const auto batch = gather(train_set, order.data() + s, n);
      std::vector<FrameLabel> targets(n);
      std::vector<float> weights(n);
      for (std::size_t i = 0; i < n; ++i) {
        targets[i] = train_set.labels[order[s + i]];
        weights[i] = class_weight[static_cast<std::size_t>(targets[i])];
      }
      const std::uint64_t dropout_seed = mix64(cfg.seed ^ mix64(adam.steps() + 1));
      TstForwardCache<float> cache;
      const auto probs = tst_forward(model, batch, &cache, &dropout_seed);
      auto grads = tst_backward(model, cache, targets, cfg.class_balance ? &weights : nullptr);
      adam.step(model.params(), grads);

      loss_sum += static_cast<double>(tst_loss(cache, targets)) * static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) {
        const bool fake = probs(static_cast<Eigen::Index>(i), 1) >= probs(static_cast<Eigen::Index>(i), 0);
        correct += (fake ? FrameLabel::Fake : FrameLabel::Real) == targets[i];
      }
    }
    const auto val = evaluate(model, val_set);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
    rec.val_loss = val.loss;
    rec.val_accuracy = val.accuracy;
    result.history.epochs.push_back(rec);

    if (val.loss < best) {
      best = val.loss;
      since_best = 0;
      result.model = model;
      result.history.best_epoch = epoch;
    } else if (++since_best >= cfg.patience) {
      result.history.stopped_early = true;
      break;
    }
  }
  return result;
}

ScoreMap predict_video(const TstModel<float>& model, const FeatureSequence& seq,
                       const WindowSpec& spec, FrameAggregation aggregation) {
  if (spec.size != model.config().window) {
    throw ShapeError("predict_video: window size " + std::to_string(spec.size) +
                     " differs from the model's " + std::to_string(model.config().window));
  }
  FeatureSequence unlabeled{seq.video_id, seq.features, std::nullopt};
  const auto batch = make_windows(unlabeled, spec);
  std::vector<double> scores(batch.count());
  for (std::size_t s = 0; s < batch.count(); s += kEvalChunk) {
    const std::size_t n = std::min(kEvalChunk, batch.count() - s);
    std::vector<Matrix<float>> windows;
    windows.reserve(n);
    for (std::size_t i = 0; i < n; ++i) windows.emplace_back(batch.window_at(s + i));
    const auto probs = tst_forward(model, windows);
    for (std::size_t i = 0; i < n; ++i) scores[s + i] = static_cast<double>(probs(static_cast<Eigen::Index>(i), 1));
  }
  return frames_from_windows(scores, batch.starts, spec.size, seq.length(), aggregation);
}

}  // namespace fakeseg
