#include "speechee/metrics.hpp"

#include <random>
#include <vector>

#include "doctest.h"
#include "speechee/error.hpp"
#include "test_util.hpp"

using namespace speechee;

namespace {

RecordSet attack_record() {
  RecordSet rs;
  EventRecord rec;
  rec.event_type = "Attack";
  rec.trigger = {"fired"};
  rec.arguments.emplace_back("Attacker", std::vector<std::string>{"soldiers"});
  rs.records.push_back(rec);
  return rs;
}

// maximum bipartite matching via augmenting paths; edges join equal tuples
long optimal_matching(const std::vector<std::string>& pred,
                      const std::vector<std::string>& gold) {
  std::vector<int> match_of_gold(gold.size(), -1);
  std::vector<char> visited;
  std::function<bool(std::size_t)> try_assign = [&](std::size_t p) -> bool {
    for (std::size_t g = 0; g < gold.size(); ++g) {
      if (pred[p] != gold[g] || visited[g]) continue;
      visited[g] = 1;
      if (match_of_gold[g] < 0 || try_assign(std::size_t(match_of_gold[g]))) {
        match_of_gold[g] = static_cast<int>(p);
        return true;
      }
    }
    return false;
  };
  long matched = 0;
  for (std::size_t p = 0; p < pred.size(); ++p) {
    visited.assign(gold.size(), 0);
    if (try_assign(p)) ++matched;
  }
  return matched;
}

std::vector<std::string> ti_tuples(const RecordSet& rs) {
  std::vector<std::string> out;
  for (const auto& r : normalize(rs).records) out.push_back(join_tokens(r.trigger));
  return out;
}

std::vector<std::string> ac_tuples(const RecordSet& rs) {
  std::vector<std::string> out;
  for (const auto& r : normalize(rs).records)
    for (const auto& [role, m] : r.arguments)
      out.push_back(r.event_type + "|" + role + "|" + join_tokens(m));
  return out;
}

}  // namespace

TEST_CASE("identical prediction scores one everywhere") {
  std::map<std::string, RecordSet> golds = {{"c1", attack_record()}};
  MetricReport r = score(golds, golds, 3);
  CHECK(r.ti.f1() == 1.0);
  CHECK(r.tc.f1() == 1.0);
  CHECK(r.ai.f1() == 1.0);
  CHECK(r.ac.f1() == 1.0);
  CHECK(r.avg() == 1.0);
}

TEST_CASE("trigger mismatch kills TI/TC but not AI/AC") {
  auto gold = attack_record();
  auto pred = attack_record();
  pred.records[0].trigger = {"fire"};
  MetricReport r = score({{"c1", pred}}, {{"c1", gold}}, 3);
  CHECK(r.ti.f1() == 0.0);
  CHECK(r.tc.f1() == 0.0);
  CHECK(r.ai.f1() == 1.0);
  CHECK(r.ac.f1() == 1.0);
}

TEST_CASE("empty prediction gives zero recall") {
  MetricReport r = score({{"c1", RecordSet{}}}, {{"c1", attack_record()}}, 3);
  CHECK(r.ti.recall() == 0.0);
  CHECK(r.ti.f1() == 0.0);
  CHECK(r.ac.f1() == 0.0);
}

TEST_CASE("matching is case-insensitive after normalization") {
  auto pred = attack_record();
  pred.records[0].trigger = {"FIRED"};
  MetricReport r = score({{"c1", pred}}, {{"c1", attack_record()}}, 3);
  CHECK(r.ti.f1() == 1.0);
}

TEST_CASE("duplicate predictions cost precision, not recall") {
  auto pred = attack_record();
  pred.records.push_back(pred.records[0]);  // same tuple twice
  MetricReport r = score({{"c1", pred}}, {{"c1", attack_record()}}, 3);
  CHECK(r.ti.precision() == doctest::Approx(0.5));
  CHECK(r.ti.recall() == doctest::Approx(1.0));
  CHECK(r.ti.f1() == doctest::Approx(2.0 / 3).epsilon(1e-6));
}

TEST_CASE("id mismatch lists the symmetric difference") {
  std::map<std::string, RecordSet> preds = {{"a", {}}, {"b", {}}};
  std::map<std::string, RecordSet> golds = {{"a", {}}, {"c", {}}};
  CHECK_THROWS_WITH_AS(score(preds, golds, 2), doctest::Contains("c"), Error);
  CHECK_THROWS_WITH_AS(score(preds, golds, 2), doctest::Contains("b"), Error);
}

TEST_CASE("single-type corpora drop TC from the average") {
  EventSchema one_type({"E"}, {{"E", {"R"}}});
  RecordSet rs;
  rs.records.push_back({"E", {"t"}, {}});
  MetricReport r = score({{"c", rs}}, {{"c", rs}}, 1);
  CHECK_FALSE(r.tc_in_avg);
  CHECK(r.avg() == doctest::Approx((r.ti.f1() + r.ai.f1() + r.ac.f1()) / 3.0));

  // inferred from gold when no schema hint is given
  MetricReport inferred = score({{"c", rs}}, {{"c", rs}});
  CHECK_FALSE(inferred.tc_in_avg);
  (void)one_type;
}

TEST_CASE("hierarchy and symmetry over random corpora") {
  EventSchema schema = testutil::small_schema();
  auto words = testutil::word_pool();
  std::mt19937_64 rng(31);
  for (int t = 0; t < 50; ++t) {
    std::map<std::string, RecordSet> preds, golds;
    for (int c = 0; c < 6; ++c) {
      std::string id = "clip" + std::to_string(c);
      golds[id] = testutil::random_record_set(rng, schema, words);
      preds[id] = testutil::random_record_set(rng, schema, words);
    }
    MetricReport r = score(preds, golds, 3);
    CHECK(r.tc.f1() <= r.ti.f1() + 1e-12);
    CHECK(r.ac.f1() <= r.ai.f1() + 1e-12);

    MetricReport self = score(golds, golds, 3);
    CHECK(self.ti.f1() == 1.0);
    CHECK(self.tc.f1() == 1.0);
    CHECK(self.ai.f1() == 1.0);
    CHECK(self.ac.f1() == 1.0);
  }
}

TEST_CASE("greedy multiset matching equals optimal bipartite matching") {
  EventSchema schema = testutil::small_schema();
  // small pool so duplicate tuples are common
  std::vector<std::string> words = {"a", "b"};
  std::mt19937_64 rng(37);
  for (int t = 0; t < 200; ++t) {
    RecordSet pred = testutil::random_record_set(rng, schema, words, 4);
    RecordSet gold = testutil::random_record_set(rng, schema, words, 4);
    MetricReport r = score({{"c", pred}}, {{"c", gold}}, 3);
    CHECK(r.ti.matched == optimal_matching(ti_tuples(pred), ti_tuples(gold)));
    CHECK(r.ac.matched == optimal_matching(ac_tuples(pred), ac_tuples(gold)));
  }
}

TEST_CASE("report json has stable order and 4-decimal round-half-even values") {
  auto pred = attack_record();
  pred.records.push_back(pred.records[0]);
  MetricReport r = score({{"c1", pred}}, {{"c1", attack_record()}}, 3);
  std::string json = report_to_json(r);
  // deterministic bytes
  CHECK(json == report_to_json(r));
  // field order fixed by construction
  CHECK(json.find("\"ti\"") < json.find("\"tc\""));
  CHECK(json.find("\"tc\"") < json.find("\"ai\""));
  CHECK(json.find("\"avg\"") != std::string::npos);
  // 2/3 rounds to 0.6667 with a dot separator regardless of locale
  CHECK(json.find("0.6667") != std::string::npos);
  CHECK(json.find(',') != std::string::npos);
  CHECK(json.find("0,6667") == std::string::npos);

  MetricReport empty;
  std::string empty_json = report_to_json(empty);
  CHECK(empty_json.find("\"avg\":0.0") != std::string::npos);
}
