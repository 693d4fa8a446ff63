#include "speechee/metrics.hpp"

#include <cfenv>
#include <cmath>
#include <set>

#include "json.hpp"
#include "speechee/error.hpp"

namespace speechee {

namespace {

using TupleCounts = std::map<std::string, long>;

// Greedy multiset matching: identical tuples are interchangeable, so the
// number of matches is the sum of per-tuple count minima.
long match_count(const TupleCounts& pred, const TupleCounts& gold) {
  long matched = 0;
  for (const auto& [tuple, pc] : pred) {
    auto it = gold.find(tuple);
    if (it != gold.end()) matched += std::min(pc, it->second);
  }
  return matched;
}

long total(const TupleCounts& c) {
  long t = 0;
  for (const auto& [_, n] : c) t += n;
  return t;
}

constexpr char kSep = '\x1f';

struct ClipTuples {
  TupleCounts ti, tc, ai, ac;
};

ClipTuples extract_tuples(const RecordSet& rs) {
  ClipTuples t;
  for (const auto& rec : rs.records) {
    std::string trig = join_tokens(rec.trigger);
    ++t.ti[trig];
    ++t.tc[rec.event_type + kSep + trig];
    for (const auto& [role, mention] : rec.arguments) {
      std::string m = join_tokens(mention);
      ++t.ai[rec.event_type + kSep + m];
      ++t.ac[rec.event_type + kSep + role + kSep + m];
    }
  }
  return t;
}

void accumulate(MetricCounts& counts, const TupleCounts& pred, const TupleCounts& gold) {
  counts.matched += match_count(pred, gold);
  counts.predicted += total(pred);
  counts.gold += total(gold);
}

double round4(double x) {
  // default FP environment rounds to nearest, ties to even
  return std::nearbyint(x * 1e4) / 1e4;
}

}  // namespace

MetricReport score(const std::map<std::string, RecordSet>& preds,
                   const std::map<std::string, RecordSet>& golds, int n_event_types) {
  if (preds.size() != golds.size() ||
      !std::equal(preds.begin(), preds.end(), golds.begin(),
                  [](const auto& a, const auto& b) { return a.first == b.first; })) {
    std::string missing, extra;
    for (const auto& [id, _] : golds)
      if (!preds.count(id)) missing += " " + id;
    for (const auto& [id, _] : preds)
      if (!golds.count(id)) extra += " " + id;
    throw Error("score: id mismatch; missing predictions:[" + missing +
                " ] unmatched predictions:[" + extra + " ]");
  }

  MetricReport report;
  std::set<std::string> gold_types;
  for (const auto& [id, gold_rs] : golds) {
    ClipTuples gold = extract_tuples(normalize(gold_rs));
    ClipTuples pred = extract_tuples(normalize(preds.at(id)));
    accumulate(report.ti, pred.ti, gold.ti);
    accumulate(report.tc, pred.tc, gold.tc);
    accumulate(report.ai, pred.ai, gold.ai);
    accumulate(report.ac, pred.ac, gold.ac);
    for (const auto& rec : gold_rs.records) gold_types.insert(rec.event_type);
  }
  int types = n_event_types > 0 ? n_event_types : static_cast<int>(gold_types.size());
  report.tc_in_avg = types > 1;
  return report;
}

std::string report_to_json(const MetricReport& report) {
  auto block = [](const MetricCounts& c) {
    nlohmann::ordered_json j;
    j["precision"] = round4(c.precision());
    j["recall"] = round4(c.recall());
    j["f1"] = round4(c.f1());
    j["predicted"] = c.predicted;
    j["gold"] = c.gold;
    return j;
  };
  nlohmann::ordered_json j;
  j["ti"] = block(report.ti);
  j["tc"] = block(report.tc);
  j["ai"] = block(report.ai);
  j["ac"] = block(report.ac);
  j["avg"] = round4(report.avg());
  j["avg_includes_tc"] = report.tc_in_avg;
  return j.dump();
}

}  // namespace speechee
