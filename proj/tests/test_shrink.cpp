#include "speechee/shrink.hpp"

#include <random>

#include "doctest.h"
#include "speechee/error.hpp"
#include "test_util.hpp"

using namespace speechee;
using nn::Matrix;
using nn::Var;

TEST_CASE("table defaults compress by stride^layers") {
  ShrinkConfig cfg;  // layers 2, stride 2, kernel 3
  cfg.dim = 8;
  nn::ParamStore ps(1);
  ShrinkingUnit su(ps, "su", cfg);
  std::mt19937_64 rng(2);

  Var h = Var::constant(testutil::random_matrix(rng, 100, cfg.dim));
  CHECK(su(h).rows() == 25);  // factor 4 = m^n

  Var h7 = Var::constant(testutil::random_matrix(rng, 7, cfg.dim));
  CHECK(su(h7).rows() == 2);  // ceil(7/2)=4 then ceil(4/2)=2
  CHECK(su(h7).cols() == cfg.dim);
}

TEST_CASE("zero layers is the identity (ablation switch)") {
  ShrinkConfig cfg;
  cfg.layers = 0;
  cfg.dim = 8;
  nn::ParamStore ps(3);
  ShrinkingUnit su(ps, "su", cfg);
  CHECK(ps.names().empty());
  std::mt19937_64 rng(4);
  Matrix x = testutil::random_matrix(rng, 13, cfg.dim);
  CHECK(su(Var::constant(x)).value() == x);
  CHECK(shrink_out_len(13, cfg) == 13);
}

TEST_CASE("length law matches the nested-ceil formula on random shapes") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> t_dist(1, 400), n_dist(0, 3), m_dist(1, 4);
  for (int i = 0; i < 500; ++i) {
    ShrinkConfig cfg;
    cfg.layers = n_dist(rng);
    cfg.stride = m_dist(rng);
    cfg.dim = 6;
    int t = t_dist(rng);

    int expect = t;
    for (int l = 0; l < cfg.layers; ++l) expect = (expect + cfg.stride - 1) / cfg.stride;
    CHECK(shrink_out_len(t, cfg) == expect);

    nn::ParamStore ps{std::uint64_t(i)};
    ShrinkingUnit su(ps, "su", cfg);
    Var h = Var::constant(testutil::random_matrix(rng, t, cfg.dim));
    CHECK(su(h).rows() == expect);

    // divisible inputs give exactly t / m^n
    long factor = 1;
    for (int l = 0; l < cfg.layers; ++l) factor *= cfg.stride;
    if (t % factor == 0) CHECK(expect == t / factor);
  }
}

TEST_CASE("output length is monotone in layers and stride") {
  std::mt19937_64 rng(6);
  for (int t : {1, 9, 57, 256}) {
    int prev = t + 1;
    for (int n = 0; n <= 4; ++n) {
      ShrinkConfig cfg;
      cfg.layers = n;
      cfg.dim = 4;
      int len = shrink_out_len(t, cfg);
      CHECK(len <= prev);
      prev = len;
    }
    prev = t + 1;
    for (int m = 1; m <= 5; ++m) {
      ShrinkConfig cfg;
      cfg.stride = m;
      cfg.dim = 4;
      int len = shrink_out_len(t, cfg);
      CHECK(len <= prev);
      prev = len;
    }
  }
  (void)rng;
}

TEST_CASE("config validation") {
  ShrinkConfig cfg;
  cfg.kernel = 4;
  CHECK_THROWS_AS(cfg.check(), Error);
  cfg.kernel = 3;
  cfg.stride = 0;
  CHECK_THROWS_AS(cfg.check(), Error);
}

TEST_CASE("finite-difference gradients through the shrinking unit") {
  ShrinkConfig cfg;
  cfg.dim = 5;
  nn::ParamStore ps(9);
  ShrinkingUnit su(ps, "su", cfg);
  std::mt19937_64 rng(10);
  Matrix x = testutil::random_matrix(rng, 9, cfg.dim);
  Matrix r = testutil::random_matrix(rng, 3, cfg.dim);
  auto loss = [&] { return nn::sum_all(nn::cmul_const(su(Var::constant(x)), r)); };
  for (const auto& name : ps.names()) {
    CAPTURE(name);
    CHECK(testutil::gradient_check(ps.get(name), loss) < 1e-4);
  }
}
