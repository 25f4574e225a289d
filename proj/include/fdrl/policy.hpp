#pragma once

// A small causal transformer that emits per-frame logits over the token
// vocabulary. Frame t sees the previous token (or a begin-of-stream row), the
// user-activity bit u_t and its absolute position; attention is causal.
//
// Parameters live in one flat vector described by a ParamLayout so that the
// optimizer, gradient checks and checkpoint I/O all share one indexing scheme.
// Weight matrices are stored row-major as [out, in].

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fdrl/core.hpp"
#include "fdrl/error.hpp"
#include "fdrl/projection.hpp"

namespace fdrl {

struct PolicyConfig {
  int vocab_size = 8;
  int embed_dim = 64;
  int num_layers = 2;
  int num_heads = 4;
  int mlp_ratio = 4;
  int max_horizon = 256;
  std::uint64_t seed = 0;
  std::vector<TokenId> pad_ids = {0};

  void validate() const;
  VocabPartition partition() const { return make_partition(vocab_size, pad_ids); }
  friend bool operator==(const PolicyConfig&, const PolicyConfig&) = default;
};

struct ParamInfo {
  std::string name;
  std::vector<int> dims;  // one or two entries
  Eigen::Index offset = 0;
  Eigen::Index rows() const { return dims[0]; }
  Eigen::Index cols() const { return dims.size() > 1 ? dims[1] : 1; }
  Eigen::Index size() const { return rows() * cols(); }
  bool is_weight() const;  // drawn from N(0, 0.02) at init
  bool is_gain() const;    // layer-norm gain, initialised to 1
};

class ParamLayout {
 public:
  explicit ParamLayout(const PolicyConfig& cfg);

  const std::vector<ParamInfo>& params() const { return params_; }
  const ParamInfo& operator[](std::size_t i) const { return params_[i]; }
  std::size_t count() const { return params_.size(); }
  Eigen::Index total_size() const { return total_; }
  /// Index of the parameter tensor containing flat entry `i`.
  std::size_t owner(Eigen::Index i) const;

  // Tensor indices.
  static constexpr std::size_t kTokEmb = 0, kUserEmb = 1, kPosEmb = 2;
  static constexpr std::size_t kPerLayer = 12;
  enum LayerParam : std::size_t {
    kLn1Gain, kLn1Bias, kQkvW, kQkvB, kOutW, kOutB, kLn2Gain, kLn2Bias, kFcW, kFcB, kProjW, kProjB
  };
  std::size_t layer(int l, LayerParam p) const { return 3 + kPerLayer * static_cast<std::size_t>(l) + p; }
  std::size_t final_gain() const { return 3 + kPerLayer * layers_; }
  std::size_t final_bias() const { return final_gain() + 1; }
  std::size_t head_weight() const { return final_gain() + 2; }
  std::size_t head_bias() const { return final_gain() + 3; }

 private:
  std::vector<ParamInfo> params_;
  Eigen::Index total_ = 0;
  std::size_t layers_ = 0;
};

/// Serialisable parameter snapshot. Values are 32-bit, ordered by ParamLayout.
struct PolicyCheckpoint {
  static constexpr std::uint32_t kVersion = 1;
  PolicyConfig config;
  std::vector<float> parameters;

  friend bool operator==(const PolicyCheckpoint&, const PolicyCheckpoint&) = default;
};

/// Seeded initialisation: weights and embeddings ~ N(0, 0.02), biases 0,
/// layer-norm gains 1.
PolicyCheckpoint init_policy(const PolicyConfig& cfg);

std::string serialize_checkpoint(const PolicyCheckpoint& ckpt);
PolicyCheckpoint deserialize_checkpoint(const std::string& bytes);
void save_checkpoint(const PolicyCheckpoint& ckpt, const std::string& path);
PolicyCheckpoint load_checkpoint(const std::string& path);

/// Per-episode conditioning: the user-activity bit for every frame of the
/// horizon plus an optional forced-speech prefix.
struct EpisodeInput {
  StateSequence user_bits;
  std::optional<int> content_seed;
  int forced_active_frames = 0;

  int horizon() const { return static_cast<int>(user_bits.size()); }
};

struct Rollout {
  TokenSequence tokens;
  StateSequence states;
  std::vector<double> state_logprobs_old;
  std::vector<double> token_logprobs_old;
  int context_frames = 0;  // forced prefix, excluded from the objectives

  int size() const { return static_cast<int>(tokens.size()); }
  int trainable_frames() const { return size() - context_frames; }
};

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
class Policy {
 public:
  using Vec = Vector<Scalar>;
  using ConstMap = Eigen::Map<const RowMatrix<Scalar>>;
  using ConstVecMap = Eigen::Map<const Vec>;

  explicit Policy(const PolicyCheckpoint& ckpt)
      : config_(ckpt.config), layout_(ckpt.config), partition_(ckpt.config.partition()) {
    config_.validate();
    if (static_cast<Eigen::Index>(ckpt.parameters.size()) != layout_.total_size()) {
      throw ShapeError("checkpoint holds " + std::to_string(ckpt.parameters.size()) +
                       " parameters, layout expects " + std::to_string(layout_.total_size()));
    }
    params_ = Eigen::Map<const Eigen::VectorXf>(ckpt.parameters.data(), layout_.total_size())
                  .template cast<Scalar>();
  }

  const PolicyConfig& config() const { return config_; }
  const ParamLayout& layout() const { return layout_; }
  const VocabPartition& partition() const { return partition_; }
  Vec& parameters() { return params_; }
  const Vec& parameters() const { return params_; }

  ConstMap mat(std::size_t i) const {
    const auto& p = layout_[i];
    return ConstMap(params_.data() + p.offset, p.rows(), p.cols());
  }
  ConstVecMap vec(std::size_t i) const {
    const auto& p = layout_[i];
    return ConstVecMap(params_.data() + p.offset, p.size());
  }

  /// Rounds to 32-bit.
  PolicyCheckpoint checkpoint() const {
    PolicyCheckpoint c{config_, {}};
    c.parameters.resize(static_cast<std::size_t>(params_.size()));
    Eigen::Map<Eigen::VectorXf>(c.parameters.data(), params_.size()) = params_.template cast<float>();
    return c;
  }

 private:
  PolicyConfig config_;
  ParamLayout layout_;
  VocabPartition partition_;
  Vec params_;
};

inline constexpr double kLayerNormEps = 1e-5;

template <typename Scalar>
Scalar gelu(Scalar x) {
  constexpr Scalar k = Scalar(0.7978845608028654);  // sqrt(2/pi)
  return Scalar(0.5) * x * (Scalar(1) + std::tanh(k * (x + Scalar(0.044715) * x * x * x)));
}

template <typename Scalar>
Scalar gelu_grad(Scalar x) {
  constexpr Scalar k = Scalar(0.7978845608028654);
  const Scalar u = k * (x + Scalar(0.044715) * x * x * x);
  const Scalar th = std::tanh(u);
  const Scalar du = k * (Scalar(1) + Scalar(3 * 0.044715) * x * x);
  return Scalar(0.5) * (Scalar(1) + th) + Scalar(0.5) * x * (Scalar(1) - th * th) * du;
}

/// Incremental forward pass that keeps every activation needed for the
/// backward pass. Running step() frame by frame is the only forward path, so
/// sampling-time logits and recomputed logits are bit-identical.
template <typename Scalar>
class Decoder {
 public:
  using Vec = Vector<Scalar>;
  using Mat = Matrix<Scalar>;

  Decoder(const Policy<Scalar>& policy, int capacity) : policy_(&policy), capacity_(capacity) {
    const auto& c = policy.config();
    if (capacity > c.max_horizon) {
      throw RangeError("horizon " + std::to_string(capacity) + " exceeds max_horizon " +
                       std::to_string(c.max_horizon));
    }
    const Eigen::Index D = c.embed_dim, F = c.embed_dim * c.mlp_ratio, T = capacity;
    layers_.resize(static_cast<std::size_t>(c.num_layers));
    for (auto& L : layers_) {
      L.x_in.resize(D, T);
      L.xhat1.resize(D, T);
      L.rstd1.resize(T);
      L.h1.resize(D, T);
      L.qkv.resize(3 * D, T);
      L.att.assign(static_cast<std::size_t>(c.num_heads), Mat::Zero(T, T));
      L.o.resize(D, T);
      L.x_mid.resize(D, T);
      L.xhat2.resize(D, T);
      L.rstd2.resize(T);
      L.h2.resize(D, T);
      L.f.resize(F, T);
      L.g.resize(F, T);
    }
    x_out_.resize(D, T);
    xhatf_.resize(D, T);
    rstdf_.resize(T);
    xf_.resize(D, T);
    logits_.resize(c.vocab_size, T);
    prev_.reserve(static_cast<std::size_t>(T));
    user_.reserve(static_cast<std::size_t>(T));
  }

  int frames() const { return static_cast<int>(prev_.size()); }
  const Policy<Scalar>& policy() const { return *policy_; }

  /// Logits of every computed frame, one column per frame.
  auto logits() const { return logits_.leftCols(frames()); }

  /// Computes logits for the next frame. prev = -1 selects begin-of-stream.
  auto step(TokenId prev, State user_bit) {
    const auto& P = *policy_;
    const auto& lay = P.layout();
    const auto& c = P.config();
    const int t = frames();
    if (t >= capacity_) throw RangeError("decoder capacity " + std::to_string(capacity_) + " exhausted");
    const Eigen::Index D = c.embed_dim, H = c.num_heads, hd = D / H;
    const TokenId row = prev < 0 ? c.vocab_size : prev;
    if (row > c.vocab_size) throw RangeError("token " + std::to_string(prev) + " outside vocabulary");
    prev_.push_back(row);
    user_.push_back(user_bit);

    Vec x = P.mat(ParamLayout::kTokEmb).row(row).transpose() +
            P.mat(ParamLayout::kUserEmb).row(user_bit ? 1 : 0).transpose() +
            P.mat(ParamLayout::kPosEmb).row(t).transpose();
    const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(hd));

    for (int l = 0; l < c.num_layers; ++l) {
      auto& L = layers_[static_cast<std::size_t>(l)];
      L.x_in.col(t) = x;
      layer_norm(x, P.vec(lay.layer(l, ParamLayout::kLn1Gain)), P.vec(lay.layer(l, ParamLayout::kLn1Bias)),
                 L.xhat1.col(t), L.rstd1(t), L.h1.col(t));
      L.qkv.col(t).noalias() = P.mat(lay.layer(l, ParamLayout::kQkvW)) * L.h1.col(t);
      L.qkv.col(t) += P.vec(lay.layer(l, ParamLayout::kQkvB));
      for (Eigen::Index h = 0; h < H; ++h) {
        const auto q = L.qkv.col(t).segment(h * hd, hd);
        const auto keys = L.qkv.block(D + h * hd, 0, hd, t + 1);
        const auto vals = L.qkv.block(2 * D + h * hd, 0, hd, t + 1);
        Vec s = (keys.transpose() * q) * scale;
        s = (s.array() - s.maxCoeff()).exp();
        s /= s.sum();
        L.att[static_cast<std::size_t>(h)].row(t).head(t + 1) = s.transpose();
        L.o.col(t).segment(h * hd, hd).noalias() = vals * s;
      }
      x.noalias() += P.mat(lay.layer(l, ParamLayout::kOutW)) * L.o.col(t);
      x += P.vec(lay.layer(l, ParamLayout::kOutB));
      L.x_mid.col(t) = x;
      layer_norm(x, P.vec(lay.layer(l, ParamLayout::kLn2Gain)), P.vec(lay.layer(l, ParamLayout::kLn2Bias)),
                 L.xhat2.col(t), L.rstd2(t), L.h2.col(t));
      L.f.col(t).noalias() = P.mat(lay.layer(l, ParamLayout::kFcW)) * L.h2.col(t);
      L.f.col(t) += P.vec(lay.layer(l, ParamLayout::kFcB));
      L.g.col(t) = L.f.col(t).unaryExpr([](Scalar v) { return gelu(v); });
      x.noalias() += P.mat(lay.layer(l, ParamLayout::kProjW)) * L.g.col(t);
      x += P.vec(lay.layer(l, ParamLayout::kProjB));
    }
    x_out_.col(t) = x;
    layer_norm(x, P.vec(lay.final_gain()), P.vec(lay.final_bias()), xhatf_.col(t), rstdf_(t), xf_.col(t));
    logits_.col(t).noalias() = P.mat(lay.head_weight()) * xf_.col(t);
    logits_.col(t) += P.vec(lay.head_bias());
    return logits_.col(t);
  }

  /// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(logits) for
  /// every computed frame (vocab_size x frames).
  template <typename Derived>
  void backward(const Eigen::MatrixBase<Derived>& dlogits, Vec& grad) const {
    const auto& P = *policy_;
    const auto& lay = P.layout();
    const auto& c = P.config();
    const Eigen::Index T = frames(), D = c.embed_dim, H = c.num_heads, hd = D / H;
    if (dlogits.rows() != c.vocab_size || dlogits.cols() != T) throw ShapeError("dlogits shape mismatch");
    if (grad.size() != lay.total_size()) throw ShapeError("gradient vector size mismatch");
    const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(hd));

    auto gmat = [&](std::size_t i) {
      const auto& p = lay[i];
      return Eigen::Map<RowMatrix<Scalar>>(grad.data() + p.offset, p.rows(), p.cols());
    };
    auto gvec = [&](std::size_t i) {
      const auto& p = lay[i];
      return Eigen::Map<Vec>(grad.data() + p.offset, p.size());
    };

    gmat(lay.head_weight()).noalias() += dlogits * xf_.leftCols(T).transpose();
    gvec(lay.head_bias()) += dlogits.rowwise().sum();
    Mat dxf = P.mat(lay.head_weight()).transpose() * dlogits;
    Mat dx(D, T);
    layer_norm_backward(dxf, xhatf_.leftCols(T), rstdf_.head(T), P.vec(lay.final_gain()),
                        gvec(lay.final_gain()), gvec(lay.final_bias()), dx);

    Mat dh(D, T), tmp(D, T);
    for (int l = c.num_layers - 1; l >= 0; --l) {
      const auto& L = layers_[static_cast<std::size_t>(l)];
      // Feed-forward branch.
      Mat dg = P.mat(lay.layer(l, ParamLayout::kProjW)).transpose() * dx;
      gmat(lay.layer(l, ParamLayout::kProjW)).noalias() += dx * L.g.leftCols(T).transpose();
      gvec(lay.layer(l, ParamLayout::kProjB)) += dx.rowwise().sum();
      Mat df = dg.array() * L.f.leftCols(T).unaryExpr([](Scalar v) { return gelu_grad(v); }).array();
      gmat(lay.layer(l, ParamLayout::kFcW)).noalias() += df * L.h2.leftCols(T).transpose();
      gvec(lay.layer(l, ParamLayout::kFcB)) += df.rowwise().sum();
      dh.noalias() = P.mat(lay.layer(l, ParamLayout::kFcW)).transpose() * df;
      layer_norm_backward(dh, L.xhat2.leftCols(T), L.rstd2.head(T), P.vec(lay.layer(l, ParamLayout::kLn2Gain)),
                          gvec(lay.layer(l, ParamLayout::kLn2Gain)), gvec(lay.layer(l, ParamLayout::kLn2Bias)),
                          tmp);
      dx += tmp;

      // Attention branch.
      Mat dout = P.mat(lay.layer(l, ParamLayout::kOutW)).transpose() * dx;
      gmat(lay.layer(l, ParamLayout::kOutW)).noalias() += dx * L.o.leftCols(T).transpose();
      gvec(lay.layer(l, ParamLayout::kOutB)) += dx.rowwise().sum();
      Mat dqkv = Mat::Zero(3 * D, T);
      for (Eigen::Index h = 0; h < H; ++h) {
        const Mat A = L.att[static_cast<std::size_t>(h)].topLeftCorner(T, T);
        const auto Q = L.qkv.block(h * hd, 0, hd, T);
        const auto K = L.qkv.block(D + h * hd, 0, hd, T);
        const auto V = L.qkv.block(2 * D + h * hd, 0, hd, T);
        const auto dO = dout.block(h * hd, 0, hd, T);
        // O = V A^T, A row-stochastic and lower-triangular.
        dqkv.block(2 * D + h * hd, 0, hd, T).noalias() = dO * A;
        Mat dA = dO.transpose() * V;
        dA = dA.template triangularView<Eigen::Lower>();
        const Vec rowdot = (A.array() * dA.array()).rowwise().sum();
        Mat dS = A.array() * (dA.colwise() - rowdot).array();
        dS *= scale;
        dqkv.block(h * hd, 0, hd, T).noalias() = K * dS.transpose();
        dqkv.block(D + h * hd, 0, hd, T).noalias() = Q * dS;
      }
      gmat(lay.layer(l, ParamLayout::kQkvW)).noalias() += dqkv * L.h1.leftCols(T).transpose();
      gvec(lay.layer(l, ParamLayout::kQkvB)) += dqkv.rowwise().sum();
      dh.noalias() = P.mat(lay.layer(l, ParamLayout::kQkvW)).transpose() * dqkv;
      layer_norm_backward(dh, L.xhat1.leftCols(T), L.rstd1.head(T), P.vec(lay.layer(l, ParamLayout::kLn1Gain)),
                          gvec(lay.layer(l, ParamLayout::kLn1Gain)), gvec(lay.layer(l, ParamLayout::kLn1Bias)),
                          tmp);
      dx += tmp;
    }

    auto gtok = gmat(ParamLayout::kTokEmb);
    auto guser = gmat(ParamLayout::kUserEmb);
    auto gpos = gmat(ParamLayout::kPosEmb);
    for (Eigen::Index t = 0; t < T; ++t) {
      const auto col = dx.col(t).transpose();
      gtok.row(prev_[static_cast<std::size_t>(t)]) += col;
      guser.row(user_[static_cast<std::size_t>(t)] ? 1 : 0) += col;
      gpos.row(t) += col;
    }
  }

 private:
  struct LayerCache {
    Mat x_in, xhat1, h1, qkv, o, x_mid, xhat2, h2, f, g;
    Vec rstd1, rstd2;
    std::vector<Mat> att;
  };

  template <typename In, typename Gain, typename Bias, typename XhatOut, typename Out>
  static void layer_norm(const In& x, const Gain& gain, const Bias& bias, XhatOut&& xhat, Scalar& rstd,
                         Out&& out) {
    const Scalar mean = x.mean();
    const Scalar var = (x.array() - mean).square().mean();
    rstd = Scalar(1) / std::sqrt(var + Scalar(kLayerNormEps));
    xhat = ((x.array() - mean) * rstd).matrix();
    out = (gain.array() * xhat.array() + bias.array()).matrix();
  }

  template <typename GradOut, typename Xhat, typename Rstd, typename Gain, typename GGain, typename GBias>
  static void layer_norm_backward(const GradOut& dy, const Xhat& xhat, const Rstd& rstd, const Gain& gain,
                                  GGain&& dgain, GBias&& dbias, Mat& dx) {
    dgain += (dy.array() * xhat.array()).rowwise().sum().matrix();
    dbias += dy.rowwise().sum();
    const Mat dxhat = dy.array().colwise() * gain.array();
    dx.resize(dy.rows(), dy.cols());
    for (Eigen::Index t = 0; t < dy.cols(); ++t) {
      const Scalar m1 = dxhat.col(t).mean();
      const Scalar m2 = (dxhat.col(t).array() * xhat.col(t).array()).mean();
      dx.col(t) = rstd(t) * (dxhat.col(t).array() - m1 - xhat.col(t).array() * m2);
    }
  }

  const Policy<Scalar>* policy_;
  int capacity_;
  std::vector<LayerCache> layers_;
  Mat x_out_, xhatf_, xf_, logits_;
  Vec rstdf_;
  std::vector<TokenId> prev_;
  StateSequence user_;
};

/// Runs the decoder over the episode with teacher-forced tokens. Frame t
/// consumes tokens[t-1]; the result covers frames [0, tokens.size()).
template <typename Scalar>
Decoder<Scalar> forward(const Policy<Scalar>& policy, const EpisodeInput& episode,
                        const TokenSequence& tokens) {
  const int T = static_cast<int>(tokens.size());
  if (T > episode.horizon()) {
    throw RangeError("token sequence of length " + std::to_string(T) + " exceeds episode horizon " +
                     std::to_string(episode.horizon()));
  }
  Decoder<Scalar> dec(policy, T);
  for (int t = 0; t < T; ++t) {
    dec.step(t == 0 ? -1 : tokens[static_cast<std::size_t>(t - 1)], episode.user_bits[static_cast<std::size_t>(t)]);
  }
  return dec;
}

/// Evaluates a scalar functional of all frame logits and its exact gradient
/// with respect to every parameter. `loss_fn(logits, dlogits)` returns the
/// loss and fills dlogits.
template <typename Scalar, typename LossFn>
Scalar loss_and_grad(const Policy<Scalar>& policy, const EpisodeInput& episode, const TokenSequence& tokens,
                     LossFn&& loss_fn, Vector<Scalar>& grad) {
  const auto dec = forward(policy, episode, tokens);
  Matrix<Scalar> dlogits = Matrix<Scalar>::Zero(policy.config().vocab_size, dec.frames());
  const Scalar value = loss_fn(dec.logits(), dlogits);
  if (!std::isfinite(static_cast<double>(value))) throw NumericError("non-finite loss value");
  for (Eigen::Index t = 0; t < dlogits.cols(); ++t) {
    if (!dlogits.col(t).allFinite()) {
      throw NumericError("non-finite loss gradient at frame " + std::to_string(t));
    }
  }
  grad = Vector<Scalar>::Zero(policy.layout().total_size());
  dec.backward(dlogits, grad);
  return value;
}

/// Simple deterministic generator for sampling; uniform draws use the top 53
/// bits so results do not depend on the standard library's distributions.
class SplitRng {
 public:
  explicit SplitRng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  std::uint64_t next() { return engine_(); }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

/// Mixes seed components into one stream seed (splitmix64 finaliser).
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

inline constexpr double kGreedyTemperature = 1e-6;

/// Token emitted on forced-speech context frames.
inline TokenId context_token(const VocabPartition& partition, const EpisodeInput& episode, int t) {
  const auto& ids = partition.non_pad_ids();
  const auto n = static_cast<std::uint64_t>(ids.size());
  const auto k = static_cast<std::uint64_t>(episode.content_seed.value_or(0)) + static_cast<std::uint64_t>(t);
  return ids[static_cast<std::size_t>(k % n)];
}

/// Autoregressive sampling over the full horizon. Log-probabilities are
/// recorded under the untempered policy so that they are the "old" policy
/// values of the objectives. If `cache` is given it receives the decoder.
template <typename Scalar>
Rollout sample_rollout(const Policy<Scalar>& policy, const EpisodeInput& episode, double temperature,
                       std::uint64_t rng_seed, std::optional<Decoder<Scalar>>* cache = nullptr) {
  if (!(temperature > 0.0)) throw ConfigError("sampling temperature must be positive");
  const auto& partition = policy.partition();
  const int T = episode.horizon();
  Decoder<Scalar> dec(policy, T);
  SplitRng rng(rng_seed);
  Rollout r;
  r.context_frames = std::min(episode.forced_active_frames, T);
  r.tokens.reserve(static_cast<std::size_t>(T));
  Vector<double> probs(policy.config().vocab_size);
  for (int t = 0; t < T; ++t) {
    const auto z = dec.step(t == 0 ? -1 : r.tokens.back(), episode.user_bits[static_cast<std::size_t>(t)]);
    const Vector<double> zd = z.template cast<double>();
    if (!zd.allFinite()) throw NumericError("non-finite logits while sampling at frame " + std::to_string(t));
    TokenId y = 0;
    if (t < r.context_frames) {
      y = context_token(partition, episode, t);
    } else if (temperature < kGreedyTemperature) {
      Eigen::Index arg = 0;
      zd.maxCoeff(&arg);
      y = static_cast<TokenId>(arg);
    } else {
      const Vector<double> scaled = zd / temperature;
      probs = (scaled.array() - scaled.maxCoeff()).exp();
      const double u = rng.uniform() * probs.sum();
      double acc = 0.0;
      y = static_cast<TokenId>(probs.size() - 1);
      for (Eigen::Index v = 0; v < probs.size(); ++v) {
        acc += probs(v);
        if (u < acc) {
          y = static_cast<TokenId>(v);
          break;
        }
      }
    }
    const State s = partition.is_pad(y) ? kSilence : kSpeech;
    r.tokens.push_back(y);
    r.states.push_back(s);
    r.state_logprobs_old.push_back(static_cast<double>(state_log_prob(z, partition, s)));
    r.token_logprobs_old.push_back(static_cast<double>(log_softmax(z)(y)));
  }
  if (cache) cache->emplace(std::move(dec));
  return r;
}

}  // namespace fdrl
