#include "speechee/contrastive.hpp"

#include "speechee/error.hpp"

namespace speechee {

nn::Var pool(const nn::Var& states) {
  if (states.rows() < 1) throw Error("pool: empty state sequence");
  return nn::unit_rows(nn::mean_rows(states));
}

nn::Var contrastive_loss(const nn::Var& embeddings,
                         const std::vector<std::set<std::string>>& labels, double tau) {
  if (tau <= 0.0) throw Error("contrastive_loss: temperature must be positive");
  const auto n = embeddings.rows();
  if (static_cast<Eigen::Index>(labels.size()) != n)
    throw Error("contrastive_loss: label count mismatch");

  auto share_type = [&](Eigen::Index i, Eigen::Index j) {
    for (const auto& t : labels[static_cast<std::size_t>(i)])
      if (labels[static_cast<std::size_t>(j)].count(t)) return true;
    return false;
  };

  nn::Matrix pos_weight = nn::Matrix::Zero(n, n);
  nn::Matrix den_mask = nn::Matrix::Ones(n, n) - nn::Matrix::Identity(n, n);
  Eigen::VectorXd anchor = Eigen::VectorXd::Zero(n);
  bool any_anchor = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    int positives = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i != j && share_type(i, j)) ++positives;
    }
    if (positives == 0) continue;
    any_anchor = true;
    anchor(i) = 1.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i != j && share_type(i, j)) pos_weight(i, j) = 1.0 / positives;
    }
  }
  if (!any_anchor || n < 2) return nn::Var::constant(nn::Matrix::Zero(1, 1));

  nn::Var sims = nn::scale(nn::matmul(embeddings, nn::transpose(embeddings)), 1.0 / tau);
  nn::Var expsims = nn::exp_op(sims);
  nn::Var numer = nn::row_sums(nn::cmul_const(expsims, pos_weight));
  nn::Var denom = nn::row_sums(nn::cmul_const(expsims, den_mask));
  // keep log() well-defined on skipped (non-anchor) rows
  nn::Matrix one_fill = (Eigen::VectorXd::Ones(n) - anchor).matrix();
  numer = nn::add_const(numer, one_fill);
  denom = nn::add_const(denom, one_fill);
  nn::Var per_anchor = nn::sub(nn::log_op(denom), nn::log_op(numer));
  return nn::sum_all(nn::cmul_const(per_anchor, anchor.matrix()));
}

}  // namespace speechee
