#include "speechee/decoder.hpp"

#include <cmath>
#include <cstdio>
#include <random>

#include "doctest.h"
#include "speechee/error.hpp"
#include "test_util.hpp"

using namespace speechee;
using nn::Matrix;
using nn::Var;

namespace {

std::vector<std::string> w(const char* text) { return split_tokens(text); }

RecordSet with_args(const std::vector<std::vector<std::string>>& mentions) {
  RecordSet rs;
  EventRecord rec;
  rec.event_type = "Attack";
  rec.trigger = {"fired"};
  for (const auto& m : mentions) rec.arguments.emplace_back("Attacker", m);
  rs.records.push_back(rec);
  return rs;
}

// direct loops over the retrieval score definition: (Wq q) . (Wk k) / sqrt(datt)
Matrix oracle_scores(const Matrix& states, const Matrix& enc, const Matrix& wq,
                     const Matrix& wk) {
  Matrix alpha(states.rows(), enc.rows());
  for (Eigen::Index u = 0; u < states.rows(); ++u) {
    Eigen::VectorXd q = (states.row(u) * wq).transpose();
    for (Eigen::Index j = 0; j < enc.rows(); ++j) {
      Eigen::VectorXd k = (enc.row(j) * wk).transpose();
      double dot = 0.0;
      for (Eigen::Index c = 0; c < q.size(); ++c) dot += q(c) * k(c);
      alpha(u, j) = dot / std::sqrt(static_cast<double>(wq.cols()));
    }
  }
  return alpha;
}

}  // namespace

TEST_CASE("dictionary keeps only once-seen argument mentions, sorted") {
  // counts: a:2, b:1, c:1 -> entries b, c
  std::vector<RecordSet> train = {
      with_args({w("a"), w("c")}),
      with_args({w("a"), w("b")}),
  };
  EntityDictionary dict = build_entity_dictionary(train);
  REQUIRE(dict.size() == 3);
  CHECK(dict.entry(0).empty());  // sentinel
  CHECK(dict.entry(1) == w("b"));
  CHECK(dict.entry(2) == w("c"));
  CHECK(dict.index_of(w("b")) == 1);
  CHECK(dict.index_of(w("a")) == 0);

  // trigger mentions never enter
  RecordSet trig_only;
  trig_only.records.push_back({"Attack", {"unique_trigger"}, {}});
  CHECK(build_entity_dictionary({trig_only}).size() == 1);

  // all repeated -> sentinel only
  CHECK(build_entity_dictionary({with_args({w("a")}), with_args({w("a")})}).size() == 1);
  CHECK(build_entity_dictionary({RecordSet{}}).size() == 1);

  CHECK_THROWS_AS(EntityDictionary({w("dup"), w("dup")}), Error);
}

TEST_CASE("dictionary text file roundtrip, sentinel implicit") {
  EntityDictionary dict({w("captain myles"), w("zanzibar")});
  std::string path = "test_decoder_dict.txt";
  dict.save_text(path);
  EntityDictionary loaded = EntityDictionary::load_text(path);
  REQUIRE(loaded.size() == 3);
  CHECK(loaded.entry(1) == w("captain myles"));
  CHECK(loaded.entry(2) == w("zanzibar"));
  std::remove(path.c_str());
}

TEST_CASE("dictionary encoder arity and determinism") {
  EventSchema schema = testutil::small_schema();
  Vocab vocab(schema, testutil::word_pool());
  DecoderConfig cfg;
  cfg.model_dim = 8;
  cfg.att_dim = 6;
  cfg.ed_embed_dim = 5;
  nn::ParamStore ps(3);
  DictionaryEncoder enc(ps, "ed", vocab, cfg);

  EntityDictionary dict({w("cargo"), w("old harbor"), w("envoy"), w("peace")});
  Var h1 = enc(dict);
  Var h2 = enc(dict);
  CHECK(h1.rows() == 5);
  CHECK(h1.cols() == 6);
  CHECK(h1.value() == h2.value());
}

TEST_CASE("retrieval scores match the hand-computed example") {
  // identity projections, datt = 4
  DecoderConfig cfg;
  cfg.model_dim = 4;
  cfg.att_dim = 4;
  nn::ParamStore ps(5);
  RetrievalHead head(ps, "ret", cfg);
  ps.get("ret.wq").mutable_value() = Matrix::Identity(4, 4);
  ps.get("ret.wk").mutable_value() = Matrix::Identity(4, 4);

  Matrix state(1, 4);
  state << 1, 1, 0, 0;
  Matrix enc(2, 4);
  enc << 1, 0, 0, 0, 0, 0, 1, 0;
  RetrievalDistribution rd = head(Var::constant(state), Var::constant(enc));
  CHECK(rd.alpha.value()(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(rd.alpha.value()(0, 1) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(rd.p.value()(0, 0) == doctest::Approx(0.6225).epsilon(1e-4));
  CHECK(rd.p.value()(0, 1) == doctest::Approx(0.3775).epsilon(1e-4));

  // all-zero decoder state: uniform distribution
  RetrievalDistribution uniform =
      head(Var::constant(Matrix::Zero(1, 4)), Var::constant(enc));
  CHECK(uniform.p.value()(0, 0) == doctest::Approx(0.5).epsilon(1e-12));

  // dimension mismatch
  CHECK_THROWS_AS(head(Var::constant(Matrix::Zero(1, 3)), Var::constant(enc)), Error);
}

TEST_CASE("retrieval scores agree with direct arithmetic on random shapes") {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 100; ++t) {
    DecoderConfig cfg;
    cfg.model_dim = 5;
    cfg.att_dim = 4;
    nn::ParamStore ps{static_cast<std::uint64_t>(t)};
    RetrievalHead head(ps, "ret", cfg);
    std::uniform_int_distribution<int> steps(1, 6), entries(1, 7);
    Matrix states = testutil::random_matrix(rng, steps(rng), cfg.model_dim);
    Matrix enc = testutil::random_matrix(rng, entries(rng), cfg.att_dim);
    RetrievalDistribution rd = head(Var::constant(states), Var::constant(enc));
    Matrix want =
        oracle_scores(states, enc, ps.get("ret.wq").value(), ps.get("ret.wk").value());
    CHECK((rd.alpha.value() - want).cwiseAbs().maxCoeff() < 1e-9);
    for (Eigen::Index u = 0; u < rd.p.rows(); ++u) {
      CHECK(rd.p.value().row(u).sum() == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("retrieval loss values and additivity") {
  Matrix p1(1, 3);
  p1 << 0.25, 0.5, 0.25;
  CHECK(retrieval_loss(Var::constant(p1), {1}).value()(0, 0) ==
        doctest::Approx(0.6931).epsilon(1e-4));

  Matrix p2(2, 3);
  p2 << 0.25, 0.5, 0.25, 0.25, 0.5, 0.25;
  CHECK(retrieval_loss(Var::constant(p2), {1, 1}).value()(0, 0) ==
        doctest::Approx(1.3863).epsilon(1e-4));

  Matrix certain(2, 2);
  certain << 1, 0, 1, 0;
  CHECK(retrieval_loss(Var::constant(certain), {0, 0}).value()(0, 0) ==
        doctest::Approx(0.0).epsilon(1e-12));

  // zero-probability gold clamps instead of throwing
  Matrix zero(1, 2);
  zero << 1, 0;
  double clamped = retrieval_loss(Var::constant(zero), {1}).value()(0, 0);
  CHECK(clamped == doctest::Approx(-std::log(1e-12)).epsilon(1e-9));

  CHECK_THROWS_AS(retrieval_loss(Var::constant(p1), {5}), Error);
}

TEST_CASE("decoder forward shapes, determinism, causality") {
  EventSchema schema = testutil::small_schema();
  Vocab vocab(schema, testutil::word_pool());
  DecoderConfig cfg;
  cfg.model_dim = 8;
  cfg.layers = 2;
  cfg.heads = 2;
  cfg.ffn_mult = 2;
  nn::ParamStore ps(11);
  StructureDecoder dec(ps, "dec", vocab, cfg);

  std::mt19937_64 rng(13);
  Var memory = Var::constant(testutil::random_matrix(rng, 5, cfg.model_dim));

  // first step from BOS alone
  auto step = dec.decode_step(memory, {Vocab::kBos});
  CHECK(step.logits.size() == vocab.size());
  CHECK(step.logits.allFinite());

  std::vector<int> ids = {Vocab::kBos, Vocab::kOpen, Vocab::kOpen, vocab.id("Attack")};
  auto fwd = dec(memory, ids);
  CHECK(fwd.states.rows() == 4);
  CHECK(fwd.logits.cols() == vocab.size());

  // causality: changing a later input leaves earlier steps untouched
  std::vector<int> ids2 = ids;
  ids2[3] = vocab.id("Meet");
  auto fwd2 = dec(memory, ids2);
  CHECK((fwd.logits.value().topRows(3) - fwd2.logits.value().topRows(3))
            .cwiseAbs()
            .maxCoeff() == 0.0);
  CHECK((fwd.logits.value().row(3) - fwd2.logits.value().row(3)).cwiseAbs().maxCoeff() >
        1e-9);

  // determinism in eval mode
  nn::GradGuard off(false);
  auto a = dec(memory, ids);
  auto b = dec(memory, ids);
  CHECK(a.logits.value() == b.logits.value());

  CHECK_THROWS_AS(dec(memory, {}), Error);
}

TEST_CASE("emit policy gates on sentinel, threshold and grammar position") {
  EmitPolicy policy;
  policy.threshold = 0.5;
  Eigen::RowVectorXd logits(5);
  logits << 0, 0, 9, 0, 0;

  Eigen::RowVectorXd p_sentinel(2);
  p_sentinel << 0.9, 0.1;
  CHECK(emit(logits, p_sentinel, policy, true).kind == EmitAction::kGenerate);

  Eigen::RowVectorXd p_entity(2);
  p_entity << 0.1, 0.9;
  EmitAction a = emit(logits, p_entity, policy, true);
  CHECK(a.kind == EmitAction::kRetrieve);
  CHECK(a.entity == 1);

  // below threshold: generate even though the entity beats the sentinel
  Eigen::RowVectorXd p_weak(3);
  p_weak << 0.3, 0.4, 0.3;
  CHECK(emit(logits, p_weak, policy, true).kind == EmitAction::kGenerate);

  // not at a mention start: retrieval ignored
  CHECK(emit(logits, p_entity, policy, false).kind == EmitAction::kGenerate);
  CHECK(emit(logits, p_entity, policy, false).token_id == 2);

  // retrieval disabled
  EmitPolicy off;
  off.retrieval_enabled = false;
  CHECK(emit(logits, p_entity, off, true).kind == EmitAction::kGenerate);
}

TEST_CASE("gold entity indices round-trip through the linearizer") {
  EventSchema schema = testutil::small_schema();
  EntityDictionary dict({w("old harbor"), w("piece")});

  RecordSet rs;
  EventRecord rec;
  rec.event_type = "Attack";
  rec.trigger = {"fired"};
  rec.arguments.emplace_back("Attacker", w("the soldiers"));
  rec.arguments.emplace_back("Target", w("old harbor"));
  rs.records.push_back(rec);

  auto tokens = linearize(rs, schema);
  auto gold = derive_gold_entity_indices(tokens, dict);
  REQUIRE(gold.size() == tokens.size());

  // exactly one nonzero, at the start of "old harbor"
  int nonzero = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (gold[i] != 0) {
      ++nonzero;
      CHECK(tokens[i] == "old");
      CHECK(tokens[i - 1] == "Target");
      CHECK(gold[i] == 1);
    }
  }
  CHECK(nonzero == 1);

  // mention not in the dictionary -> all sentinel
  EntityDictionary empty_dict;
  for (int g : derive_gold_entity_indices(tokens, empty_dict)) CHECK(g == 0);
}

TEST_CASE("finite-difference gradients through the retrieval path") {
  EventSchema schema = testutil::small_schema();
  Vocab vocab(schema, testutil::word_pool());
  DecoderConfig cfg;
  cfg.model_dim = 6;
  cfg.att_dim = 4;
  cfg.ed_embed_dim = 3;
  nn::ParamStore ps(17);
  DictionaryEncoder denc(ps, "ed", vocab, cfg);
  RetrievalHead head(ps, "ret", cfg);
  EntityDictionary dict({w("cargo"), w("old harbor")});

  std::mt19937_64 rng(19);
  Matrix states = testutil::random_matrix(rng, 3, cfg.model_dim);
  std::vector<int> gold = {0, 2, 1};
  auto loss = [&] {
    RetrievalDistribution rd = head(Var::constant(states), denc(dict));
    return retrieval_loss(rd.p, gold);
  };
  for (const auto& name : ps.names()) {
    CAPTURE(name);
    CHECK(testutil::gradient_check(ps.get(name), loss) < 1e-4);
  }
}
