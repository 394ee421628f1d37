#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "fakeseg/segmap.hpp"
#include "fakeseg/ssf.hpp"

namespace fakeseg {

/// Shape and options of the timeseries transformer.
///
/// Defaults are desk scale. full_scale() gives 8 blocks of 8 heads with
/// 512-wide heads over 768-d frame features and W = 5.
struct TstConfig {
  std::size_t input_dim = 16;
  std::size_t window = 5;
  std::size_t num_blocks = 2;
  std::size_t num_heads = 4;
  std::size_t head_dim = 32;
  std::size_t ff_dim = 64;
  std::vector<std::size_t> mlp_hidden{32};
  double dropout = 0.1;
  bool use_positional = false;
  bool use_ssf_head = false;
  bool use_ssf_input = false;

  static TstConfig full_scale();

  /// Throws DomainError on a non-positive dimension or a bad dropout rate.
  void validate() const;

  friend bool operator==(const TstConfig&, const TstConfig&) = default;
};

std::string config_to_json(const TstConfig& cfg);
TstConfig config_from_json(const std::string& text);

template <typename Scalar>
struct TstBlockParams {
  RowVector<Scalar> ln1_gain, ln1_bias;
  Matrix<Scalar> wq, wk, wv;  // d x (heads * head_dim)
  RowVector<Scalar> bq, bk, bv;
  Matrix<Scalar> wo;  // (heads * head_dim) x d
  RowVector<Scalar> bo;
  RowVector<Scalar> ln2_gain, ln2_bias;
  Matrix<Scalar> w1;  // d x ff
  RowVector<Scalar> b1;
  Matrix<Scalar> w2;  // ff x d
  RowVector<Scalar> b2;
};

template <typename Scalar>
struct TstDenseParams {
  Matrix<Scalar> w;
  RowVector<Scalar> b;
};

/// Every trainable tensor of the model; gradients use the same layout.
template <typename Scalar>
struct TstParams {
  Matrix<Scalar> positional;     // W x d, empty unless use_positional
  SsfParams<Scalar> input_ssf;   // empty unless use_ssf_input
  std::vector<TstBlockParams<Scalar>> blocks;
  std::vector<TstDenseParams<Scalar>> head;   // hidden layers then the 2-way output
  std::vector<SsfParams<Scalar>> head_ssf;    // one per head layer when use_ssf_head
};

/// Flat view of one parameter tensor.
template <typename Scalar>
struct TensorRef {
  std::string name;
  Scalar* data;
  Eigen::Index rows;
  Eigen::Index cols;

  Eigen::Index size() const { return rows * cols; }
};

/// Named views of all tensors, in a fixed order (the checkpoint order).
template <typename Scalar>
std::vector<TensorRef<Scalar>> tensors_of(TstParams<Scalar>& params);

/// Parameters shaped for `cfg`, zero-filled.
template <typename Scalar>
TstParams<Scalar> zero_params(const TstConfig& cfg);

template <typename Scalar>
class TstModel {
 public:
  using Window = Matrix<Scalar>;

  TstModel() = default;
  /// Glorot-uniform weights, zero biases, unit norm gains, identity SSF.
  TstModel(TstConfig cfg, std::uint64_t seed);
  TstModel(TstConfig cfg, TstParams<Scalar> params);

  const TstConfig& config() const { return cfg_; }
  const TstParams<Scalar>& params() const { return params_; }
  TstParams<Scalar>& params() { return params_; }

  template <typename Other>
  TstModel<Other> cast() const;

  std::size_t parameter_count() const;

 private:
  TstConfig cfg_;
  TstParams<Scalar> params_;
};

/// Activations of one forward pass, kept for the backward pass.
template <typename Scalar>
struct TstForwardCache;

/// Class probabilities (column 0 = Real, 1 = Fake) for a batch of W x d windows.
///
/// With `dropout_seed` set, dropout is active and the masks are recorded in
/// the cache; otherwise the pass is deterministic.
template <typename Scalar>
Matrix<Scalar> tst_forward(const TstModel<Scalar>& model, const std::vector<Matrix<Scalar>>& batch,
                           TstForwardCache<Scalar>* cache = nullptr,
                           const std::uint64_t* dropout_seed = nullptr);

/// Pre-softmax logits of the same pass, without caching.
template <typename Scalar>
Matrix<Scalar> tst_logits(const TstModel<Scalar>& model, const std::vector<Matrix<Scalar>>& batch);

/// Mean (optionally class-weighted) cross-entropy of the cached pass.
template <typename Scalar>
Scalar tst_loss(const TstForwardCache<Scalar>& cache, const std::vector<FrameLabel>& targets,
                const std::vector<Scalar>* sample_weights = nullptr);

/// Gradient of tst_loss with respect to every parameter.
template <typename Scalar>
TstParams<Scalar> tst_backward(const TstModel<Scalar>& model, const TstForwardCache<Scalar>& cache,
                               const std::vector<FrameLabel>& targets,
                               const std::vector<Scalar>* sample_weights = nullptr);

// Checkpoints: "TFKM", u32 version, length-prefixed JSON config, u32 tensor
// count, then per tensor: length-prefixed name, u32 rank (= 2), u32 rows,
// u32 cols, rows * cols little-endian float32.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(std::ostream& os, const TstModel<float>& model);
TstModel<float> load_checkpoint(std::istream& is);
void save_checkpoint(const std::string& path, const TstModel<float>& model);
TstModel<float> load_checkpoint(const std::string& path);

}  // namespace fakeseg

#include "fakeseg/tst_cache.hpp"
