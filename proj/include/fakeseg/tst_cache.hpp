#pragma once

// Forward-pass records of the timeseries transformer. Included from tst.hpp.

#include <vector>

namespace fakeseg {

template <typename Scalar>
using ColVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct LayerNormTrace {
  Matrix<Scalar> xhat;
  ColVector<Scalar> inv_std;
  Matrix<Scalar> out;
};

template <typename Scalar>
struct TstBlockTrace {
  Matrix<Scalar> input;
  LayerNormTrace<Scalar> ln1;
  Matrix<Scalar> q, k, v;
  std::vector<Matrix<Scalar>> attention;  // per head, W x W, rows sum to 1
  Matrix<Scalar> heads;                   // concatenated head outputs
  Matrix<Scalar> attn_mask;               // empty when dropout is off
  Matrix<Scalar> mid;                     // input + attention branch
  LayerNormTrace<Scalar> ln2;
  Matrix<Scalar> ff_pre;
  Matrix<Scalar> ff_act;
  Matrix<Scalar> ff_mask;
};

template <typename Scalar>
struct TstSampleTrace {
  Matrix<Scalar> input;  // raw window
  Matrix<Scalar> embedded;
  std::vector<TstBlockTrace<Scalar>> blocks;
  Matrix<Scalar> hidden;  // output of the last block
  std::vector<RowVector<Scalar>> head_in;
  std::vector<RowVector<Scalar>> head_linear;  // before SSF
  std::vector<RowVector<Scalar>> head_out;     // after SSF
  std::vector<RowVector<Scalar>> head_mask;    // dropout after ReLU, hidden layers only
  RowVector<Scalar> logits;
  RowVector<Scalar> probs;
};

template <typename Scalar>
struct TstForwardCache {
  std::vector<TstSampleTrace<Scalar>> samples;
  Matrix<Scalar> probs;
};

template <typename Scalar>
template <typename Other>
TstModel<Other> TstModel<Scalar>::cast() const {
  auto src = params_;
  auto dst = zero_params<Other>(cfg_);
  auto from = tensors_of(src);
  auto to = tensors_of(dst);
  for (std::size_t i = 0; i < from.size(); ++i) {
    for (Eigen::Index j = 0; j < from[i].size(); ++j) to[i].data[j] = static_cast<Other>(from[i].data[j]);
  }
  return TstModel<Other>(cfg_, std::move(dst));
}

}  // namespace fakeseg
