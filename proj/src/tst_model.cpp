#include "fakeseg/tst.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <optional>

#include <json.hpp>

#include "fakeseg/binary_io.hpp"
#include "fakeseg/error.hpp"
#include "fakeseg/rng.hpp"

namespace fakeseg {

TstConfig TstConfig::full_scale() {
  TstConfig c;
  c.input_dim = 768;
  c.window = 5;
  c.num_blocks = 8;
  c.num_heads = 8;
  c.head_dim = 512;
  c.ff_dim = 768;
  c.mlp_hidden = {128};
  c.dropout = 0.1;
  return c;
}

void TstConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw DomainError(std::string("model config: ") + name + " must be positive");
  };
  positive(input_dim, "input_dim");
  positive(window, "window");
  positive(num_blocks, "num_blocks");
  positive(num_heads, "num_heads");
  positive(head_dim, "head_dim");
  positive(ff_dim, "ff_dim");
  for (auto h : mlp_hidden) positive(h, "mlp_hidden entries");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw DomainError("model config: dropout must lie in [0, 1)");
}

std::string config_to_json(const TstConfig& c) {
  nlohmann::ordered_json j;
  j["input_dim"] = c.input_dim;
  j["window"] = c.window;
  j["num_blocks"] = c.num_blocks;
  j["num_heads"] = c.num_heads;
  j["head_dim"] = c.head_dim;
  j["ff_dim"] = c.ff_dim;
  j["mlp_hidden"] = c.mlp_hidden;
  j["dropout"] = c.dropout;
  j["use_positional"] = c.use_positional;
  j["use_ssf_head"] = c.use_ssf_head;
  j["use_ssf_input"] = c.use_ssf_input;
  return j.dump();
}

TstConfig config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("model config: ") + e.what());
  }
  TstConfig c;
  try {
    c.input_dim = j.at("input_dim").get<std::size_t>();
    c.window = j.at("window").get<std::size_t>();
    c.num_blocks = j.at("num_blocks").get<std::size_t>();
    c.num_heads = j.at("num_heads").get<std::size_t>();
    c.head_dim = j.at("head_dim").get<std::size_t>();
    c.ff_dim = j.at("ff_dim").get<std::size_t>();
    c.mlp_hidden = j.at("mlp_hidden").get<std::vector<std::size_t>>();
    c.dropout = j.at("dropout").get<double>();
    c.use_positional = j.at("use_positional").get<bool>();
    c.use_ssf_head = j.at("use_ssf_head").get<bool>();
    c.use_ssf_input = j.at("use_ssf_input").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Parameter layout

template <typename Scalar>
std::vector<TensorRef<Scalar>> tensors_of(TstParams<Scalar>& p) {
  std::vector<TensorRef<Scalar>> out;
  auto add = [&](std::string name, auto& t) {
    if (t.size() == 0) return;
    out.push_back({std::move(name), t.data(), t.rows(), t.cols()});
  };
  add("positional", p.positional);
  add("input_ssf.gamma", p.input_ssf.gamma);
  add("input_ssf.beta", p.input_ssf.beta);
  for (std::size_t i = 0; i < p.blocks.size(); ++i) {
    auto& b = p.blocks[i];
    const std::string pre = "block" + std::to_string(i) + ".";
    add(pre + "ln1.gain", b.ln1_gain);
    add(pre + "ln1.bias", b.ln1_bias);
    add(pre + "attn.wq", b.wq);
    add(pre + "attn.bq", b.bq);
    add(pre + "attn.wk", b.wk);
    add(pre + "attn.bk", b.bk);
    add(pre + "attn.wv", b.wv);
    add(pre + "attn.bv", b.bv);
    add(pre + "attn.wo", b.wo);
    add(pre + "attn.bo", b.bo);
    add(pre + "ln2.gain", b.ln2_gain);
    add(pre + "ln2.bias", b.ln2_bias);
    add(pre + "ff.w1", b.w1);
    add(pre + "ff.b1", b.b1);
    add(pre + "ff.w2", b.w2);
    add(pre + "ff.b2", b.b2);
  }
  for (std::size_t i = 0; i < p.head.size(); ++i) {
    const std::string pre = "head" + std::to_string(i) + ".";
    add(pre + "w", p.head[i].w);
    add(pre + "b", p.head[i].b);
    if (i < p.head_ssf.size()) {
      add(pre + "ssf.gamma", p.head_ssf[i].gamma);
      add(pre + "ssf.beta", p.head_ssf[i].beta);
    }
  }
  return out;
}

template <typename Scalar>
TstParams<Scalar> zero_params(const TstConfig& cfg) {
  cfg.validate();
  using M = Matrix<Scalar>;
  using V = RowVector<Scalar>;
  const auto d = static_cast<Eigen::Index>(cfg.input_dim);
  const auto inner = static_cast<Eigen::Index>(cfg.num_heads * cfg.head_dim);
  const auto ff = static_cast<Eigen::Index>(cfg.ff_dim);
  TstParams<Scalar> p;
  if (cfg.use_positional) p.positional = M::Zero(static_cast<Eigen::Index>(cfg.window), d);
  if (cfg.use_ssf_input) p.input_ssf = {V::Zero(d), V::Zero(d)};
  p.blocks.resize(cfg.num_blocks);
  for (auto& b : p.blocks) {
    b.ln1_gain = V::Zero(d);
    b.ln1_bias = V::Zero(d);
    b.wq = M::Zero(d, inner);
    b.wk = M::Zero(d, inner);
    b.wv = M::Zero(d, inner);
    b.bq = V::Zero(inner);
    b.bk = V::Zero(inner);
    b.bv = V::Zero(inner);
    b.wo = M::Zero(inner, d);
    b.bo = V::Zero(d);
    b.ln2_gain = V::Zero(d);
    b.ln2_bias = V::Zero(d);
    b.w1 = M::Zero(d, ff);
    b.b1 = V::Zero(ff);
    b.w2 = M::Zero(ff, d);
    b.b2 = V::Zero(d);
  }
  Eigen::Index fan_in = d;
  std::vector<std::size_t> widths = cfg.mlp_hidden;
  widths.push_back(2);
  for (auto w : widths) {
    const auto out = static_cast<Eigen::Index>(w);
    p.head.push_back({M::Zero(fan_in, out), V::Zero(out)});
    if (cfg.use_ssf_head) p.head_ssf.push_back({V::Zero(out), V::Zero(out)});
    fan_in = out;
  }
  return p;
}

template <typename Scalar>
TstModel<Scalar>::TstModel(TstConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)), params_(zero_params<Scalar>(cfg_)) {
  Pcg32 rng(seed, 0x7a11u);
  auto glorot = [&](Matrix<Scalar>& w) {
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      w.data()[i] = static_cast<Scalar>((2.0 * rng.uniform() - 1.0) * limit);
    }
  };
  for (Eigen::Index i = 0; i < params_.positional.size(); ++i) {
    params_.positional.data()[i] = static_cast<Scalar>(0.02 * rng.normal());
  }
  if (cfg_.use_ssf_input) params_.input_ssf = SsfParams<Scalar>::identity(params_.input_ssf.dim());
  for (auto& b : params_.blocks) {
    b.ln1_gain.setOnes();
    b.ln2_gain.setOnes();
    glorot(b.wq);
    glorot(b.wk);
    glorot(b.wv);
    glorot(b.wo);
    glorot(b.w1);
    glorot(b.w2);
  }
  for (auto& layer : params_.head) glorot(layer.w);
  for (auto& s : params_.head_ssf) s = SsfParams<Scalar>::identity(s.dim());
}

template <typename Scalar>
TstModel<Scalar>::TstModel(TstConfig cfg, TstParams<Scalar> params)
    : cfg_(std::move(cfg)), params_(std::move(params)) {
  auto expected = zero_params<Scalar>(cfg_);
  auto want = tensors_of(expected);
  auto got = tensors_of(params_);
  if (want.size() != got.size()) throw ShapeError("model parameters do not match the config");
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (want[i].name != got[i].name || want[i].rows != got[i].rows || want[i].cols != got[i].cols) {
      throw ShapeError("model parameter " + got[i].name + " does not match the config");
    }
  }
}

template <typename Scalar>
std::size_t TstModel<Scalar>::parameter_count() const {
  auto copy = params_;
  std::size_t n = 0;
  for (const auto& t : tensors_of(copy)) n += static_cast<std::size_t>(t.size());
  return n;
}

// ---------------------------------------------------------------------------
// Forward

namespace {

constexpr double kLayerNormEps = 1e-5;

template <typename Scalar>
LayerNormTrace<Scalar> layer_norm(const Matrix<Scalar>& x, const RowVector<Scalar>& gain,
                                  const RowVector<Scalar>& bias) {
  LayerNormTrace<Scalar> t;
  const auto n = static_cast<Scalar>(x.cols());
  const ColVector<Scalar> mean = x.rowwise().sum() / n;
  t.xhat = x.colwise() - mean;
  const ColVector<Scalar> var = t.xhat.array().square().rowwise().sum() / n;
  t.inv_std = (var.array() + static_cast<Scalar>(kLayerNormEps)).rsqrt();
  t.xhat = t.xhat.array().colwise() * t.inv_std.array();
  t.out = t.xhat.array().rowwise() * gain.array();
  t.out.array().rowwise() += bias.array();
  return t;
}

template <typename Scalar>
Matrix<Scalar> layer_norm_backward(const LayerNormTrace<Scalar>& t, const RowVector<Scalar>& gain,
                                   const Matrix<Scalar>& dy, RowVector<Scalar>& dgain,
                                   RowVector<Scalar>& dbias) {
  dgain += (dy.array() * t.xhat.array()).colwise().sum().matrix();
  dbias += dy.colwise().sum();
  const Matrix<Scalar> dxhat = dy.array().rowwise() * gain.array();
  const auto n = static_cast<Scalar>(dy.cols());
  const ColVector<Scalar> sum_d = dxhat.rowwise().sum();
  const ColVector<Scalar> sum_dx = (dxhat.array() * t.xhat.array()).rowwise().sum();
  Matrix<Scalar> dx = (dxhat.array() * n).colwise() - sum_d.array();
  dx.array() -= t.xhat.array().colwise() * sum_dx.array();
  dx.array().colwise() *= t.inv_std.array() / n;
  return dx;
}

template <typename Scalar>
void softmax_rows(Matrix<Scalar>& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    m.row(r).array() -= m.row(r).maxCoeff();
    m.row(r) = m.row(r).array().exp();
    m.row(r) /= m.row(r).sum();
  }
}

template <typename Scalar>
void add_row(Matrix<Scalar>& m, const RowVector<Scalar>& row) {
  m.rowwise() += row;
}

/// Inverted dropout mask; entries are 0 or 1 / (1 - rate).
template <typename Scalar>
Matrix<Scalar> dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Pcg32& rng) {
  Matrix<Scalar> m(rows, cols);
  const auto keep = static_cast<Scalar>(1.0 / (1.0 - rate));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform() < rate ? Scalar(0) : keep;
  return m;
}

template <typename Scalar>
class Forward {
 public:
  Forward(const TstModel<Scalar>& model, Pcg32* rng) : m_(model), cfg_(model.config()), rng_(rng) {}

  TstSampleTrace<Scalar> run(const Matrix<Scalar>& x) const {
    const auto& p = m_.params();
    if (x.rows() != static_cast<Eigen::Index>(cfg_.window) ||
        x.cols() != static_cast<Eigen::Index>(cfg_.input_dim)) {
      throw ShapeError("tst_forward: window is " + std::to_string(x.rows()) + "x" +
                       std::to_string(x.cols()) + ", model expects " + std::to_string(cfg_.window) +
                       "x" + std::to_string(cfg_.input_dim));
    }
    if (!x.allFinite()) throw DomainError("tst_forward: non-finite input");

    TstSampleTrace<Scalar> s;
    s.input = x;
    s.embedded = cfg_.use_ssf_input ? ssf_forward(x, p.input_ssf) : x;
    if (cfg_.use_positional) s.embedded += p.positional;

    Matrix<Scalar> h = s.embedded;
    s.blocks.resize(p.blocks.size());
    for (std::size_t bi = 0; bi < p.blocks.size(); ++bi) h = block(p.blocks[bi], h, s.blocks[bi]);
    s.hidden = h;

    RowVector<Scalar> z = h.colwise().mean();
    const std::size_t layers = p.head.size();
    for (std::size_t li = 0; li < layers; ++li) {
      s.head_in.push_back(z);
      RowVector<Scalar> a = z * p.head[li].w + p.head[li].b;
      s.head_linear.push_back(a);
      if (cfg_.use_ssf_head) a = ssf_forward(a, p.head_ssf[li]);
      s.head_out.push_back(a);
      if (li + 1 < layers) {
        z = a.cwiseMax(Scalar(0));
        if (dropout_on()) {
          RowVector<Scalar> mask = dropout_mask<Scalar>(1, z.cols(), cfg_.dropout, *rng_);
          z = z.cwiseProduct(mask);
          s.head_mask.push_back(mask);
        } else {
          s.head_mask.emplace_back();
        }
      } else {
        s.logits = a;
      }
    }
    s.probs = s.logits;
    Matrix<Scalar> tmp = s.probs;
    softmax_rows(tmp);
    s.probs = tmp;
    return s;
  }

 private:
  bool dropout_on() const { return rng_ != nullptr && cfg_.dropout > 0.0; }

  Matrix<Scalar> block(const TstBlockParams<Scalar>& b, const Matrix<Scalar>& h,
                       TstBlockTrace<Scalar>& t) const {
    const auto heads = static_cast<Eigen::Index>(cfg_.num_heads);
    const auto hd = static_cast<Eigen::Index>(cfg_.head_dim);
    const auto scale = static_cast<Scalar>(1.0 / std::sqrt(static_cast<double>(cfg_.head_dim)));

    t.input = h;
    t.ln1 = layer_norm(h, b.ln1_gain, b.ln1_bias);
    t.q = t.ln1.out * b.wq;
    add_row(t.q, b.bq);
    t.k = t.ln1.out * b.wk;
    add_row(t.k, b.bk);
    t.v = t.ln1.out * b.wv;
    add_row(t.v, b.bv);

    t.heads.resize(h.rows(), heads * hd);
    t.attention.resize(static_cast<std::size_t>(heads));
    for (Eigen::Index hi = 0; hi < heads; ++hi) {
      Matrix<Scalar> a = (t.q.middleCols(hi * hd, hd) * t.k.middleCols(hi * hd, hd).transpose()) * scale;
      softmax_rows(a);
      t.heads.middleCols(hi * hd, hd) = a * t.v.middleCols(hi * hd, hd);
      t.attention[static_cast<std::size_t>(hi)] = std::move(a);
    }
    Matrix<Scalar> attn = t.heads * b.wo;
    add_row(attn, b.bo);
    if (dropout_on()) {
      t.attn_mask = dropout_mask<Scalar>(attn.rows(), attn.cols(), cfg_.dropout, *rng_);
      attn = attn.cwiseProduct(t.attn_mask);
    }
    t.mid = h + attn;

    t.ln2 = layer_norm(t.mid, b.ln2_gain, b.ln2_bias);
    t.ff_pre = t.ln2.out * b.w1;
    add_row(t.ff_pre, b.b1);
    t.ff_act = t.ff_pre.cwiseMax(Scalar(0));
    Matrix<Scalar> ff = t.ff_act * b.w2;
    add_row(ff, b.b2);
    if (dropout_on()) {
      t.ff_mask = dropout_mask<Scalar>(ff.rows(), ff.cols(), cfg_.dropout, *rng_);
      ff = ff.cwiseProduct(t.ff_mask);
    }
    return t.mid + ff;
  }

  const TstModel<Scalar>& m_;
  const TstConfig& cfg_;
  Pcg32* rng_;
};

// ---------------------------------------------------------------------------
// Backward

template <typename Scalar>
Matrix<Scalar> block_backward(const TstConfig& cfg, const TstBlockParams<Scalar>& b,
                              const TstBlockTrace<Scalar>& t, const Matrix<Scalar>& dout,
                              TstBlockParams<Scalar>& g) {
  const auto heads = static_cast<Eigen::Index>(cfg.num_heads);
  const auto hd = static_cast<Eigen::Index>(cfg.head_dim);
  const auto scale = static_cast<Scalar>(1.0 / std::sqrt(static_cast<double>(cfg.head_dim)));

  // feed-forward branch
  Matrix<Scalar> dff = dout;
  if (t.ff_mask.size() != 0) dff = dff.cwiseProduct(t.ff_mask);
  g.w2 += t.ff_act.transpose() * dff;
  g.b2 += dff.colwise().sum();
  Matrix<Scalar> dact = dff * b.w2.transpose();
  dact = (t.ff_pre.array() > Scalar(0)).select(dact, Scalar(0));
  g.w1 += t.ln2.out.transpose() * dact;
  g.b1 += dact.colwise().sum();
  const Matrix<Scalar> dln2 = dact * b.w1.transpose();
  Matrix<Scalar> dmid = dout + layer_norm_backward(t.ln2, b.ln2_gain, dln2, g.ln2_gain, g.ln2_bias);

  // attention branch
  Matrix<Scalar> dattn = dmid;
  if (t.attn_mask.size() != 0) dattn = dattn.cwiseProduct(t.attn_mask);
  g.wo += t.heads.transpose() * dattn;
  g.bo += dattn.colwise().sum();
  const Matrix<Scalar> dheads = dattn * b.wo.transpose();

  Matrix<Scalar> dq(t.q.rows(), t.q.cols()), dk(t.k.rows(), t.k.cols()), dv(t.v.rows(), t.v.cols());
  for (Eigen::Index hi = 0; hi < heads; ++hi) {
    const auto& a = t.attention[static_cast<std::size_t>(hi)];
    const auto dho = dheads.middleCols(hi * hd, hd);
    dv.middleCols(hi * hd, hd) = a.transpose() * dho;
    const Matrix<Scalar> da = dho * t.v.middleCols(hi * hd, hd).transpose();
    const ColVector<Scalar> row_dot = (da.array() * a.array()).rowwise().sum();
    Matrix<Scalar> ds = a.array() * (da.array().colwise() - row_dot.array());
    ds *= scale;
    dq.middleCols(hi * hd, hd) = ds * t.k.middleCols(hi * hd, hd);
    dk.middleCols(hi * hd, hd) = ds.transpose() * t.q.middleCols(hi * hd, hd);
  }
  const auto& xn = t.ln1.out;
  g.wq += xn.transpose() * dq;
  g.wk += xn.transpose() * dk;
  g.wv += xn.transpose() * dv;
  g.bq += dq.colwise().sum();
  g.bk += dk.colwise().sum();
  g.bv += dv.colwise().sum();
  const Matrix<Scalar> dxn = dq * b.wq.transpose() + dk * b.wk.transpose() + dv * b.wv.transpose();
  return dmid + layer_norm_backward(t.ln1, b.ln1_gain, dxn, g.ln1_gain, g.ln1_bias);
}

template <typename Scalar>
void sample_backward(const TstModel<Scalar>& model, const TstSampleTrace<Scalar>& s,
                     const RowVector<Scalar>& dlogits, TstParams<Scalar>& g) {
  const auto& cfg = model.config();
  const auto& p = model.params();
  RowVector<Scalar> dz = dlogits;
  for (std::size_t li = p.head.size(); li-- > 0;) {
    RowVector<Scalar> da = dz;
    if (cfg.use_ssf_head) {
      auto sg = ssf_backward(s.head_linear[li], p.head_ssf[li], da);
      g.head_ssf[li].gamma += sg.gamma;
      g.head_ssf[li].beta += sg.beta;
      da = sg.x;
    }
    g.head[li].w += s.head_in[li].transpose() * da;
    g.head[li].b += da;
    dz = da * p.head[li].w.transpose();
    if (li > 0) {
      // through dropout and ReLU of the previous hidden layer
      if (s.head_mask[li - 1].size() != 0) dz = dz.cwiseProduct(s.head_mask[li - 1]);
      dz = (s.head_out[li - 1].array() > Scalar(0)).select(dz, Scalar(0));
    }
  }
  const auto w = s.hidden.rows();
  Matrix<Scalar> dh = dz.replicate(w, 1) / static_cast<Scalar>(w);
  for (std::size_t bi = p.blocks.size(); bi-- > 0;) {
    dh = block_backward(cfg, p.blocks[bi], s.blocks[bi], dh, g.blocks[bi]);
  }
  if (cfg.use_positional) g.positional += dh;
  if (cfg.use_ssf_input) {
    auto sg = ssf_backward(s.input, p.input_ssf, dh);
    g.input_ssf.gamma += sg.gamma;
    g.input_ssf.beta += sg.beta;
  }
}

template <typename Scalar>
void check_targets(const TstForwardCache<Scalar>& cache, const std::vector<FrameLabel>& targets,
                   const std::vector<Scalar>* weights) {
  if (targets.size() != cache.samples.size()) {
    throw ShapeError("tst: " + std::to_string(targets.size()) + " targets for " +
                     std::to_string(cache.samples.size()) + " samples");
  }
  if (weights && weights->size() != targets.size()) throw ShapeError("tst: sample weight count mismatch");
  if (targets.empty()) throw ShapeError("tst: empty batch");
}

}  // namespace

template <typename Scalar>
Matrix<Scalar> tst_forward(const TstModel<Scalar>& model, const std::vector<Matrix<Scalar>>& batch,
                           TstForwardCache<Scalar>* cache, const std::uint64_t* dropout_seed) {
  std::optional<Pcg32> rng;
  if (dropout_seed) rng.emplace(*dropout_seed, 0xd50u);
  Forward<Scalar> fwd(model, rng ? &*rng : nullptr);
  Matrix<Scalar> probs(static_cast<Eigen::Index>(batch.size()), 2);
  if (cache) cache->samples.clear();
  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto s = fwd.run(batch[i]);
    probs.row(static_cast<Eigen::Index>(i)) = s.probs;
    if (cache) cache->samples.push_back(std::move(s));
  }
  if (cache) cache->probs = probs;
  return probs;
}

template <typename Scalar>
Matrix<Scalar> tst_logits(const TstModel<Scalar>& model, const std::vector<Matrix<Scalar>>& batch) {
  Forward<Scalar> fwd(model, nullptr);
  Matrix<Scalar> logits(static_cast<Eigen::Index>(batch.size()), 2);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    logits.row(static_cast<Eigen::Index>(i)) = fwd.run(batch[i]).logits;
  }
  return logits;
}

template <typename Scalar>
Scalar tst_loss(const TstForwardCache<Scalar>& cache, const std::vector<FrameLabel>& targets,
                const std::vector<Scalar>* weights) {
  check_targets(cache, targets, weights);
  Scalar total = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const auto c = static_cast<Eigen::Index>(targets[i]);
    // log-softmax from logits keeps the loss finite for saturated outputs
    const auto& z = cache.samples[i].logits;
    const Scalar mx = z.maxCoeff();
    const Scalar lse = mx + std::log((z.array() - mx).exp().sum());
    const Scalar w = weights ? (*weights)[i] : Scalar(1);
    total += w * (lse - z(c));
  }
  return total / static_cast<Scalar>(targets.size());
}

template <typename Scalar>
TstParams<Scalar> tst_backward(const TstModel<Scalar>& model, const TstForwardCache<Scalar>& cache,
                               const std::vector<FrameLabel>& targets,
                               const std::vector<Scalar>* weights) {
  check_targets(cache, targets, weights);
  auto grads = zero_params<Scalar>(model.config());
  const auto n = static_cast<Scalar>(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    RowVector<Scalar> d = cache.samples[i].probs;
    d(static_cast<Eigen::Index>(targets[i])) -= Scalar(1);
    const Scalar w = weights ? (*weights)[i] : Scalar(1);
    d *= w / n;
    sample_backward(model, cache.samples[i], d, grads);
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {
constexpr std::string_view kCheckpointMagic = "TFKM";
}

void save_checkpoint(std::ostream& os, const TstModel<float>& model) {
  binio::put_magic(os, kCheckpointMagic);
  binio::put_u32(os, kCheckpointVersion);
  binio::put_string(os, config_to_json(model.config()));
  auto params = model.params();
  const auto tensors = tensors_of(params);
  binio::put_u32(os, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    binio::put_string(os, t.name);
    binio::put_u32(os, 2);
    binio::put_u32(os, static_cast<std::uint32_t>(t.rows));
    binio::put_u32(os, static_cast<std::uint32_t>(t.cols));
    for (Eigen::Index i = 0; i < t.size(); ++i) binio::put_f32(os, t.data[i]);
  }
  if (!os) throw Error("checkpoint: write failed");
}

TstModel<float> load_checkpoint(std::istream& is) {
  binio::expect_magic(is, kCheckpointMagic);
  const auto version = binio::get_u32(is);
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  }
  const TstConfig cfg = config_from_json(binio::get_string(is));
  auto params = zero_params<float>(cfg);
  auto tensors = tensors_of(params);
  const auto count = binio::get_u32(is);
  if (count != tensors.size()) {
    throw FormatError("checkpoint: expected " + std::to_string(tensors.size()) + " tensors, found " +
                      std::to_string(count));
  }
  for (auto& t : tensors) {
    const auto name = binio::get_string(is, 1024);
    if (name != t.name) throw FormatError("checkpoint: expected tensor " + t.name + ", found " + name);
    if (binio::get_u32(is) != 2) throw FormatError("checkpoint: tensor " + name + " must have rank 2");
    const auto rows = binio::get_u32(is);
    const auto cols = binio::get_u32(is);
    if (rows != t.rows || cols != t.cols) throw FormatError("checkpoint: tensor " + name + " has wrong shape");
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data[i] = binio::get_f32(is);
  }
  if (is.peek() != std::char_traits<char>::eof()) throw FormatError("checkpoint: trailing bytes");
  return TstModel<float>(cfg, std::move(params));
}

void save_checkpoint(const std::string& path, const TstModel<float>& model) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open for writing: " + path);
  save_checkpoint(os, model);
}

TstModel<float> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open for reading: " + path);
  return load_checkpoint(is);
}

// ---------------------------------------------------------------------------

#define FAKESEG_INSTANTIATE_TST(S)                                                                 \
  template std::vector<TensorRef<S>> tensors_of(TstParams<S>&);                                    \
  template TstParams<S> zero_params<S>(const TstConfig&);                                          \
  template class TstModel<S>;                                                                      \
  template Matrix<S> tst_forward(const TstModel<S>&, const std::vector<Matrix<S>>&,                \
                                 TstForwardCache<S>*, const std::uint64_t*);                       \
  template Matrix<S> tst_logits(const TstModel<S>&, const std::vector<Matrix<S>>&);                \
  template S tst_loss(const TstForwardCache<S>&, const std::vector<FrameLabel>&,                   \
                      const std::vector<S>*);                                                      \
  template TstParams<S> tst_backward(const TstModel<S>&, const TstForwardCache<S>&,                \
                                     const std::vector<FrameLabel>&, const std::vector<S>*);

FAKESEG_INSTANTIATE_TST(float)
FAKESEG_INSTANTIATE_TST(double)

#undef FAKESEG_INSTANTIATE_TST

}  // namespace fakeseg
