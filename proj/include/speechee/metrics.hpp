#ifndef SPEECHEE_METRICS_HPP_
#define SPEECHEE_METRICS_HPP_

#include <map>
#include <string>

#include "speechee/schema.hpp"

namespace speechee {

struct MetricCounts {
  long matched = 0;
  long predicted = 0;
  long gold = 0;

  double precision() const { return predicted == 0 ? 0.0 : double(matched) / predicted; }
  double recall() const { return gold == 0 ? 0.0 : double(matched) / gold; }
  double f1() const {
    double p = precision(), r = recall();
    return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
  }
};

// TI: trigger mention; TC: type+trigger; AI: type+argument mention;
// AC: type+role+argument mention. Micro-aggregated multiset matching.
struct MetricReport {
  MetricCounts ti, tc, ai, ac;
  bool tc_in_avg = true;  // single-type schemas omit TC from the average

  double avg() const {
    double sum = ti.f1() + ai.f1() + ac.f1();
    int n = 3;
    if (tc_in_avg) {
      sum += tc.f1();
      ++n;
    }
    return sum / n;
  }
};

// Inputs are normalized (lowercased) internally before matching; ids must
// coincide or an error lists the symmetric difference. n_event_types <= 1
// drops TC from the average (pass 0 to infer from the gold sets).
MetricReport score(const std::map<std::string, RecordSet>& preds,
                   const std::map<std::string, RecordSet>& golds,
                   int n_event_types = 0);

// Stable field order, numbers rounded half-even to 4 decimals.
std::string report_to_json(const MetricReport& report);

}  // namespace speechee

#endif  // SPEECHEE_METRICS_HPP_
