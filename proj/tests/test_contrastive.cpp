#include "speechee/contrastive.hpp"

#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "speechee/error.hpp"
#include "test_util.hpp"

using namespace speechee;
using nn::Matrix;
using nn::Var;

namespace {

// direct double-loop evaluation of the supervised contrastive objective
double oracle_loss(const Matrix& x, const std::vector<std::set<std::string>>& labels,
                   double tau) {
  auto share = [&](int i, int j) {
    for (const auto& t : labels[std::size_t(i)])
      if (labels[std::size_t(j)].count(t)) return true;
    return false;
  };
  const int n = static_cast<int>(x.rows());
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    std::vector<int> positives;
    for (int j = 0; j < n; ++j)
      if (j != i && share(i, j)) positives.push_back(j);
    if (positives.empty()) continue;
    double num = 0.0;
    for (int p : positives) num += std::exp(x.row(i).dot(x.row(p)) / tau);
    num /= static_cast<double>(positives.size());
    double den = 0.0;
    for (int k = 0; k < n; ++k)
      if (k != i) den += std::exp(x.row(i).dot(x.row(k)) / tau);
    total += -std::log(num / den);
  }
  return total;
}

Matrix unit_random(std::mt19937_64& rng, int n, int d) {
  Matrix x = testutil::random_matrix(rng, n, d);
  for (int i = 0; i < n; ++i) x.row(i).normalize();
  return x;
}

std::vector<std::set<std::string>> random_labels(std::mt19937_64& rng, int n) {
  std::vector<std::string> types = {"A", "B", "C"};
  std::uniform_int_distribution<int> pick(0, 2);
  std::uniform_int_distribution<int> multi(0, 9);
  std::vector<std::set<std::string>> labels;
  for (int i = 0; i < n; ++i) {
    std::set<std::string> s = {types[std::size_t(pick(rng))]};
    if (multi(rng) == 0) s.insert(types[std::size_t(pick(rng))]);
    labels.push_back(std::move(s));
  }
  return labels;
}

}  // namespace

TEST_CASE("pool averages over time and normalizes") {
  std::mt19937_64 rng(1);

  // constant rows: pool(h) = v / |v|
  Matrix v = testutil::random_matrix(rng, 1, 6);
  Matrix h = v.replicate(4, 1);
  Matrix expect = v / v.norm();
  CHECK((pool(Var::constant(h)).value() - expect).cwiseAbs().maxCoeff() < 1e-12);

  // single row
  Matrix one = testutil::random_matrix(rng, 1, 6);
  CHECK((pool(Var::constant(one)).value() - one / one.norm()).cwiseAbs().maxCoeff() <
        1e-12);

  // brute-force mean + normalize oracle
  Matrix m = testutil::random_matrix(rng, 5, 6);
  Eigen::RowVectorXd mean = m.colwise().mean();
  mean /= mean.norm();
  CHECK((pool(Var::constant(m)).value().row(0) - mean).cwiseAbs().maxCoeff() < 1e-12);

  CHECK_THROWS_AS(pool(Var::constant(Matrix::Zero(3, 4))), Error);
}

TEST_CASE("hand cases for the contrastive loss") {
  SUBCASE("two identical embeddings, same type: zero loss") {
    Matrix x(2, 2);
    x << 1, 0, 1, 0;
    std::vector<std::set<std::string>> labels = {{"A"}, {"A"}};
    CHECK(contrastive_loss(Var::constant(x), labels, 1.0).value()(0, 0) ==
          doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("different types: no anchors, zero loss") {
    Matrix x(2, 2);
    x << 1, 0, 0, 1;
    std::vector<std::set<std::string>> labels = {{"A"}, {"B"}};
    CHECK(contrastive_loss(Var::constant(x), labels, 1.0).value()(0, 0) == 0.0);
  }
  SUBCASE("three-sample case agrees with the brute-force oracle") {
    Matrix x(3, 2);
    x << 1, 0, 1, 0, 0, 1;
    std::vector<std::set<std::string>> labels = {{"A"}, {"A"}, {"B"}};
    double got = contrastive_loss(Var::constant(x), labels, 1.0).value()(0, 0);
    double want = oracle_loss(x, labels, 1.0);
    CHECK(got == doctest::Approx(want).epsilon(1e-9));
    // closed form: two anchors, each -log(e / (e + 1))
    CHECK(got == doctest::Approx(2.0 * (std::log(std::exp(1.0) + 1.0) - 1.0)).epsilon(1e-9));
  }
}

TEST_CASE("oracle equivalence over random batches") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> n_dist(2, 10);
  for (int t = 0; t < 100; ++t) {
    int n = n_dist(rng);
    Matrix x = unit_random(rng, n, 8);
    auto labels = random_labels(rng, n);
    double tau = (t % 2 == 0) ? 0.1 : 0.7;
    double got = contrastive_loss(Var::constant(x), labels, tau).value()(0, 0);
    double want = oracle_loss(x, labels, tau);
    CHECK(got == doctest::Approx(want).epsilon(1e-9));
  }
}

TEST_CASE("loss is nonnegative with single positives") {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 50; ++t) {
    Matrix x = unit_random(rng, 4, 6);
    // two types, one pair each: every anchor has exactly one positive
    std::vector<std::set<std::string>> labels = {{"A"}, {"A"}, {"B"}, {"B"}};
    CHECK(contrastive_loss(Var::constant(x), labels, 0.5).value()(0, 0) >= -1e-12);
  }
}

TEST_CASE("pulling a positive pair together never raises the loss") {
  // anchor pair of type A sweeping from orthogonal to aligned; B fixed
  double prev = 1e18;
  for (double t : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    double angle = (1.0 - t) * 1.5707963267948966;
    Matrix x(3, 2);
    x << 1, 0, std::cos(angle), std::sin(angle), -0.6, 0.8;
    std::vector<std::set<std::string>> labels = {{"A"}, {"A"}, {"B"}};
    double loss = contrastive_loss(Var::constant(x), labels, 0.3).value()(0, 0);
    CHECK(loss <= prev + 1e-12);
    prev = loss;
  }
}

TEST_CASE("temperature must be positive") {
  Matrix x = Matrix::Identity(2, 2);
  std::vector<std::set<std::string>> labels = {{"A"}, {"A"}};
  CHECK_THROWS_AS(contrastive_loss(Var::constant(x), labels, 0.0), Error);
  CHECK_THROWS_AS(contrastive_loss(Var::constant(x), labels, -1.0), Error);
}

TEST_CASE("finite-difference gradient through pooling and loss") {
  std::mt19937_64 rng(13);
  Var states = Var::param(testutil::random_matrix(rng, 4, 5));
  Var other = Var::param(testutil::random_matrix(rng, 3, 5));
  std::vector<std::set<std::string>> labels = {{"A"}, {"A"}, {"B"}};
  auto loss = [&] {
    Var x = nn::concat_rows({pool(states), pool(other), pool(nn::scale(other, -1.0))});
    return contrastive_loss(x, labels, 0.4);
  };
  CHECK(testutil::gradient_check(states, loss) < 1e-4);
  CHECK(testutil::gradient_check(other, loss) < 1e-4);
}
