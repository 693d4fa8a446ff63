#ifndef SPEECHEE_NN_LAYERS_HPP_
#define SPEECHEE_NN_LAYERS_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "speechee/nn/tensor.hpp"

namespace speechee::nn {

// Named parameter registry. Ordered by name so iteration, serialization and
// optimizer state are deterministic.
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed = 0) : seed_(seed) {}

  // Glorot-uniform matrix parameter.
  Var create(const std::string& name, Eigen::Index rows, Eigen::Index cols);
  // Zero-initialized (biases, gains start at explicit value).
  Var create_zeros(const std::string& name, Eigen::Index rows, Eigen::Index cols);
  Var create_ones(const std::string& name, Eigen::Index rows, Eigen::Index cols);
  // Normal(0, sd) initialization (embeddings).
  Var create_normal(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                    double sd);

  Var get(const std::string& name) const;
  bool has(const std::string& name) const { return params_.count(name) > 0; }
  const std::map<std::string, Var>& all() const { return params_; }
  std::vector<std::string> names() const;
  std::size_t total_size() const;
  void zero_grads();

 private:
  Var insert(const std::string& name, Matrix m);
  std::map<std::string, Var> params_;
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

struct Linear {
  Var w, b;
  Linear() = default;
  Linear(ParamStore& ps, const std::string& prefix, Eigen::Index din, Eigen::Index dout);
  Var operator()(const Var& x) const { return add_rowvec(matmul(x, w), b); }
};

struct LayerNormParams {
  Var gain, bias;
  LayerNormParams() = default;
  LayerNormParams(ParamStore& ps, const std::string& prefix, Eigen::Index d);
  Var operator()(const Var& x) const { return layer_norm(x, gain, bias); }
};

// Multi-head attention. Query rows attend over key/value rows; an optional
// additive mask (q_rows x kv_rows, 0 or -1e30) enforces causality.
struct MultiHeadAttention {
  Linear wq, wk, wv, wo;
  int heads = 1;
  MultiHeadAttention() = default;
  MultiHeadAttention(ParamStore& ps, const std::string& prefix, Eigen::Index d, int heads);
  Var operator()(const Var& q_in, const Var& kv_in, const Matrix* mask) const;
};

struct FeedForward {
  Linear up, down;
  FeedForward() = default;
  FeedForward(ParamStore& ps, const std::string& prefix, Eigen::Index d,
              Eigen::Index hidden);
  Var operator()(const Var& x) const { return down(gelu(up(x))); }
};

// Pre-norm transformer encoder layer.
struct EncoderLayer {
  LayerNormParams ln1, ln2;
  MultiHeadAttention attn;
  FeedForward ffn;
  EncoderLayer() = default;
  EncoderLayer(ParamStore& ps, const std::string& prefix, Eigen::Index d, int heads,
               Eigen::Index ffn_hidden);
  Var operator()(const Var& x) const;
};

// Pre-norm decoder layer: causal self-attention, cross-attention, feedforward.
struct DecoderLayer {
  LayerNormParams ln1, ln2, ln3;
  MultiHeadAttention self_attn, cross_attn;
  FeedForward ffn;
  DecoderLayer() = default;
  DecoderLayer(ParamStore& ps, const std::string& prefix, Eigen::Index d, int heads,
               Eigen::Index ffn_hidden);
  Var operator()(const Var& x, const Var& memory, const Matrix& causal_mask) const;
};

// Single-layer LSTM; last_state() returns the final hidden state (1 x hidden).
struct Lstm {
  Var w;  // (din + hidden) x 4*hidden, gate order [i f g o]
  Var b;
  Eigen::Index hidden = 0;
  Lstm() = default;
  Lstm(ParamStore& ps, const std::string& prefix, Eigen::Index din, Eigen::Index hidden);
  Var last_state(const Var& seq) const;  // seq: T x din
};

Matrix sinusoidal_positions(Eigen::Index len, Eigen::Index d);
Matrix causal_mask(Eigen::Index len);

// Decoupled weight decay Adam. Moment buffers keyed by parameter name.
class AdamW {
 public:
  AdamW(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8,
        double weight_decay = 0.01);
  void step(ParamStore& ps);
  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }

 private:
  double lr_, beta1_, beta2_, eps_, weight_decay_;
  long t_ = 0;
  std::map<std::string, Matrix> m_, v_;
};

// Binary round-trip of all parameters, bit-exact.
void save_params(const ParamStore& ps, const std::string& path);
void load_params(ParamStore& ps, const std::string& path);

}  // namespace speechee::nn

#endif  // SPEECHEE_NN_LAYERS_HPP_
