#ifndef SPEECHEE_NN_TENSOR_HPP_
#define SPEECHEE_NN_TENSOR_HPP_

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <vector>

namespace speechee::nn {

using Matrix = Eigen::MatrixXd;

// Reverse-mode autodiff over double matrices. Every op allocates a graph
// node; backward() runs the recorded closures in reverse topological order.
// Values are double throughout: the gradient checks demand float64 and the
// models are small enough that there is no reason for a second precision.
struct Node {
  Matrix value;
  Matrix grad;  // empty until first accumulation
  bool needs_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Propagates this node's grad into parents' grads.
  std::function<void(Node&)> backprop;

  void accumulate(const Matrix& g) {
    if (grad.size() == 0) {
      grad = g;
    } else {
      grad += g;
    }
  }
};

using NodeP = std::shared_ptr<Node>;

// When false, ops compute values only (no parents, no closures). Used for
// inference; toggling is cheap and scoped via GradGuard.
bool grad_enabled();
void set_grad_enabled(bool on);

struct GradGuard {
  explicit GradGuard(bool on) : prev_(grad_enabled()) { set_grad_enabled(on); }
  ~GradGuard() { set_grad_enabled(prev_); }

 private:
  bool prev_;
};

class Var {
 public:
  Var() = default;
  explicit Var(NodeP n) : node_(std::move(n)) {}

  static Var constant(Matrix v);
  static Var param(Matrix v);  // leaf that accumulates gradient

  bool defined() const { return node_ != nullptr; }
  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  const Matrix& grad() const { return node_->grad; }
  bool needs_grad() const { return node_ && node_->needs_grad; }
  void zero_grad() { node_->grad.resize(0, 0); }
  NodeP node() const { return node_; }

  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }

 private:
  NodeP node_;
};

// Runs backpropagation from a scalar (1x1) root.
void backward(const Var& root);

// ---- primitive ops ----
Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);              // same shape
Var add_rowvec(const Var& a, const Var& bias);    // bias is 1 x cols
Var sub(const Var& a, const Var& b);
Var cmul(const Var& a, const Var& b);             // elementwise
Var scale(const Var& a, double s);
Var add_const(const Var& a, const Matrix& m);     // constant offset (masks, positions)
Var transpose(const Var& a);
Var gelu(const Var& a);                           // exact erf form
Var sigmoid(const Var& a);
Var tanh_op(const Var& a);
Var exp_op(const Var& a);
Var log_op(const Var& a);                         // natural log, caller keeps a > 0
Var softmax_rows(const Var& a);
Var slice_cols(const Var& a, Eigen::Index c0, Eigen::Index n);
Var slice_rows(const Var& a, Eigen::Index r0, Eigen::Index n);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var mean_rows(const Var& a);                      // T x d -> 1 x d
Var sum_all(const Var& a);                        // -> 1 x 1 scalar
Var row_sums(const Var& a);                       // T x d -> T x 1
Var cmul_const(const Var& a, const Matrix& m);
Var unit_rows(const Var& a);                      // L2-normalize each row; rows must be nonzero

// Strided 1-D convolution along time. x is T x din (rows = frames),
// w is (k*din) x dout, b is 1 x dout. Same-padding (k-1)/2 on both ends,
// output length ceil(T / stride).
Var conv1d(const Var& x, const Var& w, const Var& b, int k, int stride);

// Rows of table selected by ids; backward scatter-adds into the table.
Var gather_rows(const Var& table, const std::vector<int>& ids);

// Mean over rows of -log softmax(logits)[i, target_i]; stable logsumexp.
Var cross_entropy_rows(const Var& logits, const std::vector<int>& targets);

// Sum over rows of -log max(p[i, idx_i], clamp). p holds probabilities.
Var nll_rows(const Var& p, const std::vector<int>& targets, double clamp = 1e-12);

// Per-row layer normalization with learned gain/bias (1 x d each).
Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5);

int conv1d_out_len(int in_len, int stride);

}  // namespace speechee::nn

#endif  // SPEECHEE_NN_TENSOR_HPP_
