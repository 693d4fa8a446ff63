#include "speechee/nn/layers.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "speechee/error.hpp"
#include "speechee/rng.hpp"

namespace speechee::nn {

Var ParamStore::insert(const std::string& name, Matrix m) {
  if (params_.count(name)) throw Error("param '" + name + "' already exists");
  Var v = Var::param(std::move(m));
  params_.emplace(name, v);
  return v;
}

Var ParamStore::create(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  auto rng = make_rng(seed_ ^ splitmix64(counter_++), name);
  double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  return insert(name, std::move(m));
}

Var ParamStore::create_zeros(const std::string& name, Eigen::Index rows,
                             Eigen::Index cols) {
  return insert(name, Matrix::Zero(rows, cols));
}

Var ParamStore::create_ones(const std::string& name, Eigen::Index rows,
                            Eigen::Index cols) {
  return insert(name, Matrix::Ones(rows, cols));
}

Var ParamStore::create_normal(const std::string& name, Eigen::Index rows,
                              Eigen::Index cols, double sd) {
  auto rng = make_rng(seed_ ^ splitmix64(counter_++), name);
  std::normal_distribution<double> dist(0.0, sd);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  return insert(name, std::move(m));
}

Var ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error("unknown param '" + name + "'");
  return it->second;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& [name, _] : params_) out.push_back(name);
  return out;
}

std::size_t ParamStore::total_size() const {
  std::size_t n = 0;
  for (const auto& [_, v] : params_) n += static_cast<std::size_t>(v.value().size());
  return n;
}

void ParamStore::zero_grads() {
  for (auto& [_, v] : params_) const_cast<Var&>(v).zero_grad();
}

Linear::Linear(ParamStore& ps, const std::string& prefix, Eigen::Index din,
               Eigen::Index dout)
    : w(ps.create(prefix + ".w", din, dout)), b(ps.create_zeros(prefix + ".b", 1, dout)) {}

LayerNormParams::LayerNormParams(ParamStore& ps, const std::string& prefix,
                                 Eigen::Index d)
    : gain(ps.create_ones(prefix + ".gain", 1, d)),
      bias(ps.create_zeros(prefix + ".bias", 1, d)) {}

MultiHeadAttention::MultiHeadAttention(ParamStore& ps, const std::string& prefix,
                                       Eigen::Index d, int heads)
    : wq(ps, prefix + ".q", d, d),
      wk(ps, prefix + ".k", d, d),
      wv(ps, prefix + ".v", d, d),
      wo(ps, prefix + ".o", d, d),
      heads(heads) {
  if (d % heads != 0) throw Error("attention: model dim not divisible by heads");
}

Var MultiHeadAttention::operator()(const Var& q_in, const Var& kv_in,
                                   const Matrix* mask) const {
  const Eigen::Index d = wq.w.cols();
  const Eigen::Index dh = d / heads;
  Var q = wq(q_in), k = wk(kv_in), v = wv(kv_in);
  std::vector<Var> ctx;
  ctx.reserve(static_cast<std::size_t>(heads));
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
  for (int h = 0; h < heads; ++h) {
    Var qh = slice_cols(q, h * dh, dh);
    Var kh = slice_cols(k, h * dh, dh);
    Var vh = slice_cols(v, h * dh, dh);
    Var scores = scale(matmul(qh, transpose(kh)), inv_sqrt_dh);
    if (mask != nullptr) scores = add_const(scores, *mask);
    Var attn = softmax_rows(scores);
    ctx.push_back(matmul(attn, vh));
  }
  return wo(concat_cols(ctx));
}

FeedForward::FeedForward(ParamStore& ps, const std::string& prefix, Eigen::Index d,
                         Eigen::Index hidden)
    : up(ps, prefix + ".up", d, hidden), down(ps, prefix + ".down", hidden, d) {}

EncoderLayer::EncoderLayer(ParamStore& ps, const std::string& prefix, Eigen::Index d,
                           int heads, Eigen::Index ffn_hidden)
    : ln1(ps, prefix + ".ln1", d),
      ln2(ps, prefix + ".ln2", d),
      attn(ps, prefix + ".attn", d, heads),
      ffn(ps, prefix + ".ffn", d, ffn_hidden) {}

Var EncoderLayer::operator()(const Var& x) const {
  Var h = ln1(x);
  Var y = add(x, attn(h, h, nullptr));
  return add(y, ffn(ln2(y)));
}

DecoderLayer::DecoderLayer(ParamStore& ps, const std::string& prefix, Eigen::Index d,
                           int heads, Eigen::Index ffn_hidden)
    : ln1(ps, prefix + ".ln1", d),
      ln2(ps, prefix + ".ln2", d),
      ln3(ps, prefix + ".ln3", d),
      self_attn(ps, prefix + ".self", d, heads),
      cross_attn(ps, prefix + ".cross", d, heads),
      ffn(ps, prefix + ".ffn", d, ffn_hidden) {}

Var DecoderLayer::operator()(const Var& x, const Var& memory,
                             const Matrix& causal) const {
  Var h = ln1(x);
  Var y = add(x, self_attn(h, h, &causal));
  y = add(y, cross_attn(ln2(y), memory, nullptr));
  return add(y, ffn(ln3(y)));
}

Lstm::Lstm(ParamStore& ps, const std::string& prefix, Eigen::Index din,
           Eigen::Index hidden)
    : w(ps.create(prefix + ".w", din + hidden, 4 * hidden)),
      b(ps.create_zeros(prefix + ".b", 1, 4 * hidden)),
      hidden(hidden) {}

Var Lstm::last_state(const Var& seq) const {
  Var h = Var::constant(Matrix::Zero(1, hidden));
  Var c = Var::constant(Matrix::Zero(1, hidden));
  for (Eigen::Index t = 0; t < seq.rows(); ++t) {
    Var xt = slice_rows(seq, t, 1);
    Var zt = concat_cols({xt, h});
    Var gates = add_rowvec(matmul(zt, w), b);
    Var i = sigmoid(slice_cols(gates, 0, hidden));
    Var f = sigmoid(slice_cols(gates, hidden, hidden));
    Var g = tanh_op(slice_cols(gates, 2 * hidden, hidden));
    Var o = sigmoid(slice_cols(gates, 3 * hidden, hidden));
    c = add(cmul(f, c), cmul(i, g));
    h = cmul(o, tanh_op(c));
  }
  return h;
}

Matrix sinusoidal_positions(Eigen::Index len, Eigen::Index d) {
  Matrix pe(len, d);
  for (Eigen::Index pos = 0; pos < len; ++pos) {
    for (Eigen::Index i = 0; i < d; i += 2) {
      double rate = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(d));
      pe(pos, i) = std::sin(static_cast<double>(pos) * rate);
      if (i + 1 < d) pe(pos, i + 1) = std::cos(static_cast<double>(pos) * rate);
    }
  }
  return pe;
}

Matrix causal_mask(Eigen::Index len) {
  Matrix m = Matrix::Zero(len, len);
  for (Eigen::Index i = 0; i < len; ++i)
    for (Eigen::Index j = i + 1; j < len; ++j) m(i, j) = -1e30;
  return m;
}

AdamW::AdamW(double lr, double beta1, double beta2, double eps, double weight_decay)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay) {}

void AdamW::step(ParamStore& ps) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, t_);
  const double bc2 = 1.0 - std::pow(beta2_, t_);
  for (const auto& [name, var] : ps.all()) {
    Var v = var;
    if (v.grad().size() == 0) continue;
    Matrix& m = m_[name];
    Matrix& s = v_[name];
    if (m.size() == 0) {
      m = Matrix::Zero(v.rows(), v.cols());
      s = Matrix::Zero(v.rows(), v.cols());
    }
    const Matrix& g = v.grad();
    m = beta1_ * m + (1.0 - beta1_) * g;
    s = beta2_ * s + (1.0 - beta2_) * g.cwiseProduct(g);
    Matrix mhat = m / bc1;
    Matrix shat = s / bc2;
    Matrix update =
        mhat.array() / (shat.array().sqrt() + eps_) + weight_decay_ * v.value().array();
    v.mutable_value() -= lr_ * update;
  }
}

void save_params(const ParamStore& ps, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  const char magic[8] = {'S', 'E', 'E', 'P', 'A', 'R', '0', '1'};
  out.write(magic, 8);
  std::uint64_t count = ps.all().size();
  out.write(reinterpret_cast<const char*>(&count), sizeof(count));
  for (const auto& [name, var] : ps.all()) {
    std::uint64_t len = name.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(name.data(), static_cast<std::streamsize>(len));
    std::int64_t rows = var.value().rows(), cols = var.value().cols();
    out.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
    out.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) {
        double x = var.value()(i, j);
        out.write(reinterpret_cast<const char*>(&x), sizeof(x));
      }
    }
  }
}

void load_params(ParamStore& ps, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, "SEEPAR01", 8) != 0)
    throw Error("'" + path + "' is not a parameter file");
  std::uint64_t count = 0;
  in.read(reinterpret_cast<char*>(&count), sizeof(count));
  for (std::uint64_t k = 0; k < count; ++k) {
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    std::string name(len, '\0');
    in.read(name.data(), static_cast<std::streamsize>(len));
    std::int64_t rows = 0, cols = 0;
    in.read(reinterpret_cast<char*>(&rows), sizeof(rows));
    in.read(reinterpret_cast<char*>(&cols), sizeof(cols));
    if (!in) throw Error("'" + path + "': truncated parameter file");
    if (!ps.has(name)) throw Error("'" + path + "': unexpected param '" + name + "'");
    Var v = ps.get(name);
    if (v.rows() != rows || v.cols() != cols)
      throw Error("'" + path + "': shape mismatch for '" + name + "'");
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) {
        double x;
        in.read(reinterpret_cast<char*>(&x), sizeof(x));
        v.mutable_value()(i, j) = x;
      }
    }
    if (!in) throw Error("'" + path + "': truncated parameter file");
  }
}

}  // namespace speechee::nn
