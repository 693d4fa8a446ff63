#include "speechee/nn/tensor.hpp"

#include <cmath>
#include <unordered_set>

#include "speechee/error.hpp"

namespace speechee::nn {

namespace {

thread_local bool g_grad_enabled = true;

NodeP value_node(Matrix v) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  return n;
}

bool track2(const Var& a, const Var& b) {
  return g_grad_enabled && (a.needs_grad() || b.needs_grad());
}

bool track1(const Var& a) { return g_grad_enabled && a.needs_grad(); }

NodeP graph_node(Matrix v, std::vector<NodeP> parents,
                 std::function<void(Node&)> backprop) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  n->needs_grad = true;
  n->parents = std::move(parents);
  n->backprop = std::move(backprop);
  return n;
}

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

}  // namespace

bool grad_enabled() { return g_grad_enabled; }
void set_grad_enabled(bool on) { g_grad_enabled = on; }

Var Var::constant(Matrix v) { return Var(value_node(std::move(v))); }

Var Var::param(Matrix v) {
  auto n = value_node(std::move(v));
  n->needs_grad = true;
  return Var(n);
}

void backward(const Var& root) {
  if (root.rows() != 1 || root.cols() != 1)
    throw Error("backward: root must be a 1x1 scalar");
  // Post-order DFS to get a topological order.
  std::vector<Node*> order;
  std::vector<std::pair<Node*, std::size_t>> stack;
  std::unordered_set<Node*> visited;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->needs_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root.node()->grad = Matrix::Ones(1, 1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backprop && n->grad.size() != 0) n->backprop(*n);
  }
}

Var matmul(const Var& a, const Var& b) {
  Matrix v = a.value() * b.value();
  if (!track2(a, b)) return Var(value_node(std::move(v)));
  NodeP pa = a.node(), pb = b.node();
  return Var(graph_node(std::move(v), {pa, pb}, [pa, pb](Node& self) {
    if (pa->needs_grad) pa->accumulate(self.grad * pb->value.transpose());
    if (pb->needs_grad) pb->accumulate(pa->value.transpose() * self.grad);
  }));
}

Var add(const Var& a, const Var& b) {
  Matrix v = a.value() + b.value();
  if (!track2(a, b)) return Var(value_node(std::move(v)));
  NodeP pa = a.node(), pb = b.node();
  return Var(graph_node(std::move(v), {pa, pb}, [pa, pb](Node& self) {
    if (pa->needs_grad) pa->accumulate(self.grad);
    if (pb->needs_grad) pb->accumulate(self.grad);
  }));
}

Var add_rowvec(const Var& a, const Var& bias) {
  Matrix v = a.value().rowwise() + bias.value().row(0);
  if (!track2(a, bias)) return Var(value_node(std::move(v)));
  NodeP pa = a.node(), pb = bias.node();
  return Var(graph_node(std::move(v), {pa, pb}, [pa, pb](Node& self) {
    if (pa->needs_grad) pa->accumulate(self.grad);
    if (pb->needs_grad) pb->accumulate(self.grad.colwise().sum());
  }));
}

Var sub(const Var& a, const Var& b) {
  Matrix v = a.value() - b.value();
  if (!track2(a, b)) return Var(value_node(std::move(v)));
  NodeP pa = a.node(), pb = b.node();
  return Var(graph_node(std::move(v), {pa, pb}, [pa, pb](Node& self) {
    if (pa->needs_grad) pa->accumulate(self.grad);
    if (pb->needs_grad) pb->accumulate(-self.grad);
  }));
}

Var cmul(const Var& a, const Var& b) {
  Matrix v = a.value().cwiseProduct(b.value());
  if (!track2(a, b)) return Var(value_node(std::move(v)));
  NodeP pa = a.node(), pb = b.node();
  return Var(graph_node(std::move(v), {pa, pb}, [pa, pb](Node& self) {
    if (pa->needs_grad) pa->accumulate(self.grad.cwiseProduct(pb->value));
    if (pb->needs_grad) pb->accumulate(self.grad.cwiseProduct(pa->value));
  }));
}

Var scale(const Var& a, double s) {
  Matrix v = a.value() * s;
  if (!track1(a)) return Var(value_node(std::move(v)));
  NodeP pa = a.node();
  return Var(graph_node(std::move(v), {pa}, [pa, s](Node& self) {
    pa->accumulate(self.grad * s);
  }));
}

Var add_const(const Var& a, const Matrix& m) {
  Matrix v = a.value() + m;
  if (!track1(a)) return Var(value_node(std::move(v)));
  NodeP pa = a.node();
  return Var(graph_node(std::move(v), {pa}, [pa](Node& self) {
    pa->accumulate(self.grad);
  }));
}

Var cmul_const(const Var& a, const Matrix& m) {
  Matrix v = a.value().cwiseProduct(m);
  if (!track1(a)) return Var(value_node(std::move(v)));
  NodeP pa = a.node();
  Matrix mc = m;
  return Var(graph_node(std::move(v), {pa}, [pa, mc](Node& self) {
    pa->accumulate(self.grad.cwiseProduct(mc));
  }));
}

Var transpose(const Var& a) {
  Matrix v = a.value().transpose();
  if (!track1(a)) return Var(value_node(std::move(v)));
  NodeP pa = a.node();
  return Var(graph_node(std::move(v), {pa}, [pa](Node& self) {
    pa->accumulate(self.grad.transpose());
  }));
}

Var gelu(const Var& a) {
  Matrix v = a.value().unaryExpr(
      [](double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); });
  if (!track1(a)) return Var(value_node(std::move(v)));
  NodeP pa = a.node();
  return Var(graph_node(std::move(v), {pa}, [pa](Node& self) {
    Matrix d = pa->value.unaryExpr([](double x) {
      return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) +
             x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
    });
    pa->accumulate(self.grad.cwiseProduct(d));
  }));
}

Var sigmoid(const Var& a) {
  Matrix v = a.value().unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
  if (!track1(a)) return Var(value_node(std::move(v)));
  NodeP pa = a.node();
  return Var(graph_node(std::move(v), {pa}, [pa](Node& self) {
    Matrix d = self.value.cwiseProduct(Matrix::Ones(self.value.rows(), self.value.cols()) -
                                       self.value);
    pa->accumulate(self.grad.cwiseProduct(d));
  }));
}

Var tanh_op(const Var& a) {
  Matrix v = a.value().array().tanh();
  if (!track1(a)) return Var(value_node(std::move(v)));
  NodeP pa = a.node();
  return Var(graph_node(std::move(v), {pa}, [pa](Node& self) {
    Matrix d = 1.0 - self.value.array().square();
    pa->accumulate(self.grad.cwiseProduct(d));
  }));
}

Var exp_op(const Var& a) {
  Matrix v = a.value().array().exp();
  if (!track1(a)) return Var(value_node(std::move(v)));
  NodeP pa = a.node();
  return Var(graph_node(std::move(v), {pa}, [pa](Node& self) {
    pa->accumulate(self.grad.cwiseProduct(self.value));
  }));
}

Var log_op(const Var& a) {
  Matrix v = a.value().array().log();
  if (!track1(a)) return Var(value_node(std::move(v)));
  NodeP pa = a.node();
  return Var(graph_node(std::move(v), {pa}, [pa](Node& self) {
    pa->accumulate(self.grad.cwiseQuotient(pa->value));
  }));
}

Var softmax_rows(const Var& a) {
  Matrix v = a.value();
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    double m = v.row(i).maxCoeff();
    v.row(i) = (v.row(i).array() - m).exp();
    v.row(i) /= v.row(i).sum();
  }
  if (!track1(a)) return Var(value_node(std::move(v)));
  NodeP pa = a.node();
  return Var(graph_node(std::move(v), {pa}, [pa](Node& self) {
    Matrix gy = self.grad.cwiseProduct(self.value);
    Eigen::VectorXd s = gy.rowwise().sum();
    Matrix dx = self.value.cwiseProduct(self.grad.colwise() - s);
    pa->accumulate(dx);
  }));
}

Var slice_cols(const Var& a, Eigen::Index c0, Eigen::Index n) {
  Matrix v = a.value().middleCols(c0, n);
  if (!track1(a)) return Var(value_node(std::move(v)));
  NodeP pa = a.node();
  return Var(graph_node(std::move(v), {pa}, [pa, c0, n](Node& self) {
    Matrix g = Matrix::Zero(pa->value.rows(), pa->value.cols());
    g.middleCols(c0, n) = self.grad;
    pa->accumulate(g);
  }));
}

Var slice_rows(const Var& a, Eigen::Index r0, Eigen::Index n) {
  Matrix v = a.value().middleRows(r0, n);
  if (!track1(a)) return Var(value_node(std::move(v)));
  NodeP pa = a.node();
  return Var(graph_node(std::move(v), {pa}, [pa, r0, n](Node& self) {
    Matrix g = Matrix::Zero(pa->value.rows(), pa->value.cols());
    g.middleRows(r0, n) = self.grad;
    pa->accumulate(g);
  }));
}

Var concat_cols(const std::vector<Var>& parts) {
  Eigen::Index rows = parts.front().rows(), cols = 0;
  for (const auto& p : parts) cols += p.cols();
  Matrix v(rows, cols);
  Eigen::Index c = 0;
  bool needs = false;
  for (const auto& p : parts) {
    v.middleCols(c, p.cols()) = p.value();
    c += p.cols();
    needs |= p.needs_grad();
  }
  if (!g_grad_enabled || !needs) return Var(value_node(std::move(v)));
  std::vector<NodeP> ps;
  for (const auto& p : parts) ps.push_back(p.node());
  return Var(graph_node(std::move(v), ps, [ps](Node& self) {
    Eigen::Index c = 0;
    for (const auto& p : ps) {
      if (p->needs_grad) p->accumulate(self.grad.middleCols(c, p->value.cols()));
      c += p->value.cols();
    }
  }));
}

Var concat_rows(const std::vector<Var>& parts) {
  Eigen::Index cols = parts.front().cols(), rows = 0;
  for (const auto& p : parts) rows += p.rows();
  Matrix v(rows, cols);
  Eigen::Index r = 0;
  bool needs = false;
  for (const auto& p : parts) {
    v.middleRows(r, p.rows()) = p.value();
    r += p.rows();
    needs |= p.needs_grad();
  }
  if (!g_grad_enabled || !needs) return Var(value_node(std::move(v)));
  std::vector<NodeP> ps;
  for (const auto& p : parts) ps.push_back(p.node());
  return Var(graph_node(std::move(v), ps, [ps](Node& self) {
    Eigen::Index r = 0;
    for (const auto& p : ps) {
      if (p->needs_grad) p->accumulate(self.grad.middleRows(r, p->value.rows()));
      r += p->value.rows();
    }
  }));
}

Var mean_rows(const Var& a) {
  Matrix v = a.value().colwise().mean();
  if (!track1(a)) return Var(value_node(std::move(v)));
  NodeP pa = a.node();
  return Var(graph_node(std::move(v), {pa}, [pa](Node& self) {
    double inv = 1.0 / static_cast<double>(pa->value.rows());
    pa->accumulate((self.grad * inv).replicate(pa->value.rows(), 1));
  }));
}

Var sum_all(const Var& a) {
  Matrix v(1, 1);
  v(0, 0) = a.value().sum();
  if (!track1(a)) return Var(value_node(std::move(v)));
  NodeP pa = a.node();
  return Var(graph_node(std::move(v), {pa}, [pa](Node& self) {
    pa->accumulate(Matrix::Constant(pa->value.rows(), pa->value.cols(), self.grad(0, 0)));
  }));
}

Var row_sums(const Var& a) {
  Matrix v = a.value().rowwise().sum();
  if (!track1(a)) return Var(value_node(std::move(v)));
  NodeP pa = a.node();
  return Var(graph_node(std::move(v), {pa}, [pa](Node& self) {
    pa->accumulate(self.grad.replicate(1, pa->value.cols()));
  }));
}

Var unit_rows(const Var& a) {
  Matrix v = a.value();
  Eigen::VectorXd norms(v.rows());
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    double n = v.row(i).norm();
    if (n == 0.0) throw Error("unit_rows: zero row cannot be normalized");
    norms(i) = n;
    v.row(i) /= n;
  }
  if (!track1(a)) return Var(value_node(std::move(v)));
  NodeP pa = a.node();
  return Var(graph_node(std::move(v), {pa}, [pa, norms](Node& self) {
    Matrix dx(pa->value.rows(), pa->value.cols());
    for (Eigen::Index i = 0; i < dx.rows(); ++i) {
      double yg = self.value.row(i).dot(self.grad.row(i));
      dx.row(i) = (self.grad.row(i) - self.value.row(i) * yg) / norms(i);
    }
    pa->accumulate(dx);
  }));
}

int conv1d_out_len(int in_len, int stride) {
  return (in_len + stride - 1) / stride;
}

namespace {

Matrix im2col(const Matrix& x, int k, int stride) {
  const int t_in = static_cast<int>(x.rows());
  const int din = static_cast<int>(x.cols());
  const int pad = (k - 1) / 2;
  const int t_out = conv1d_out_len(t_in, stride);
  Matrix cols = Matrix::Zero(t_out, static_cast<Eigen::Index>(k) * din);
  for (int i = 0; i < t_out; ++i) {
    for (int t = 0; t < k; ++t) {
      int src = i * stride - pad + t;
      if (src >= 0 && src < t_in) {
        cols.block(i, static_cast<Eigen::Index>(t) * din, 1, din) = x.row(src);
      }
    }
  }
  return cols;
}

}  // namespace

Var conv1d(const Var& x, const Var& w, const Var& b, int k, int stride) {
  if (k % 2 == 0) throw Error("conv1d: kernel width must be odd");
  if (stride < 1) throw Error("conv1d: stride must be >= 1");
  if (w.rows() != static_cast<Eigen::Index>(k) * x.cols())
    throw Error("conv1d: weight shape mismatch");
  Matrix cols = im2col(x.value(), k, stride);
  Matrix v = (cols * w.value()).rowwise() + b.value().row(0);
  bool needs = g_grad_enabled && (x.needs_grad() || w.needs_grad() || b.needs_grad());
  if (!needs) return Var(value_node(std::move(v)));
  NodeP px = x.node(), pw = w.node(), pb = b.node();
  return Var(graph_node(std::move(v), {px, pw, pb},
                        [px, pw, pb, cols, k, stride](Node& self) {
    if (pw->needs_grad) pw->accumulate(cols.transpose() * self.grad);
    if (pb->needs_grad) pb->accumulate(self.grad.colwise().sum());
    if (px->needs_grad) {
      const int t_in = static_cast<int>(px->value.rows());
      const int din = static_cast<int>(px->value.cols());
      const int pad = (k - 1) / 2;
      Matrix dcols = self.grad * pw->value.transpose();
      Matrix dx = Matrix::Zero(t_in, din);
      for (int i = 0; i < dcols.rows(); ++i) {
        for (int t = 0; t < k; ++t) {
          int src = i * stride - pad + t;
          if (src >= 0 && src < t_in) {
            dx.row(src) += dcols.block(i, static_cast<Eigen::Index>(t) * din, 1, din);
          }
        }
      }
      px->accumulate(dx);
    }
  }));
}

Var gather_rows(const Var& table, const std::vector<int>& ids) {
  Matrix v(static_cast<Eigen::Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= table.rows())
      throw Error("gather_rows: index out of range");
    v.row(static_cast<Eigen::Index>(i)) = table.value().row(ids[i]);
  }
  if (!track1(table)) return Var(value_node(std::move(v)));
  NodeP pt = table.node();
  std::vector<int> idx = ids;
  return Var(graph_node(std::move(v), {pt}, [pt, idx](Node& self) {
    Matrix g = Matrix::Zero(pt->value.rows(), pt->value.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      g.row(idx[i]) += self.grad.row(static_cast<Eigen::Index>(i));
    }
    pt->accumulate(g);
  }));
}

Var cross_entropy_rows(const Var& logits, const std::vector<int>& targets) {
  const Matrix& z = logits.value();
  if (static_cast<Eigen::Index>(targets.size()) != z.rows())
    throw Error("cross_entropy_rows: target count mismatch");
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    double m = z.row(i).maxCoeff();
    double lse = m + std::log((z.row(i).array() - m).exp().sum());
    total += lse - z(i, targets[static_cast<std::size_t>(i)]);
  }
  Matrix v(1, 1);
  v(0, 0) = total / static_cast<double>(z.rows());
  if (!track1(logits)) return Var(value_node(std::move(v)));
  NodeP pz = logits.node();
  std::vector<int> tg = targets;
  return Var(graph_node(std::move(v), {pz}, [pz, tg](Node& self) {
    const Matrix& z = pz->value;
    Matrix dz(z.rows(), z.cols());
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      double m = z.row(i).maxCoeff();
      Eigen::RowVectorXd e = (z.row(i).array() - m).exp();
      dz.row(i) = e / e.sum();
      dz(i, tg[static_cast<std::size_t>(i)]) -= 1.0;
    }
    dz *= self.grad(0, 0) / static_cast<double>(z.rows());
    pz->accumulate(dz);
  }));
}

Var nll_rows(const Var& p, const std::vector<int>& targets, double clamp) {
  const Matrix& pv = p.value();
  if (static_cast<Eigen::Index>(targets.size()) != pv.rows())
    throw Error("nll_rows: target count mismatch");
  double total = 0.0;
  for (Eigen::Index i = 0; i < pv.rows(); ++i) {
    double pi = pv(i, targets[static_cast<std::size_t>(i)]);
    total -= std::log(std::max(pi, clamp));
  }
  Matrix v(1, 1);
  v(0, 0) = total;
  if (!track1(p)) return Var(value_node(std::move(v)));
  NodeP pp = p.node();
  std::vector<int> tg = targets;
  return Var(graph_node(std::move(v), {pp}, [pp, tg, clamp](Node& self) {
    Matrix g = Matrix::Zero(pp->value.rows(), pp->value.cols());
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      double pi = pp->value(i, tg[static_cast<std::size_t>(i)]);
      if (pi >= clamp) {
        g(i, tg[static_cast<std::size_t>(i)]) = -self.grad(0, 0) / pi;
      }
    }
    pp->accumulate(g);
  }));
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
  const Matrix& xv = x.value();
  const Eigen::Index d = xv.cols();
  Eigen::VectorXd mu(xv.rows()), inv_sd(xv.rows());
  Matrix xhat(xv.rows(), d);
  for (Eigen::Index i = 0; i < xv.rows(); ++i) {
    double m = xv.row(i).mean();
    double var = (xv.row(i).array() - m).square().sum() / static_cast<double>(d);
    mu(i) = m;
    inv_sd(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (xv.row(i).array() - m) * inv_sd(i);
  }
  Matrix v = (xhat.array().rowwise() * gain.value().row(0).array()).rowwise() +
             bias.value().row(0).array();
  bool needs = g_grad_enabled && (x.needs_grad() || gain.needs_grad() || bias.needs_grad());
  if (!needs) return Var(value_node(std::move(v)));
  NodeP px = x.node(), pg = gain.node(), pb = bias.node();
  return Var(graph_node(std::move(v), {px, pg, pb},
                        [px, pg, pb, xhat, mu, inv_sd](Node& self) {
    const Eigen::Index d = px->value.cols();
    if (pg->needs_grad)
      pg->accumulate(self.grad.cwiseProduct(xhat).colwise().sum());
    if (pb->needs_grad) pb->accumulate(self.grad.colwise().sum());
    if (px->needs_grad) {
      Matrix dx(px->value.rows(), d);
      for (Eigen::Index i = 0; i < dx.rows(); ++i) {
        Eigen::RowVectorXd dxhat =
            self.grad.row(i).cwiseProduct(pg->value.row(0));
        double sum_dxhat = dxhat.sum();
        double sum_dxhat_xhat = dxhat.dot(xhat.row(i));
        dx.row(i) = inv_sd(i) *
                    (dxhat.array() - sum_dxhat / static_cast<double>(d) -
                     xhat.row(i).array() * sum_dxhat_xhat / static_cast<double>(d));
      }
      px->accumulate(dx);
    }
  }));
}

}  // namespace speechee::nn
