#ifndef SPEECHEE_TESTS_TEST_UTIL_HPP_
#define SPEECHEE_TESTS_TEST_UTIL_HPP_

#include <random>
#include <string>
#include <vector>

#include "speechee/nn/tensor.hpp"
#include "speechee/schema.hpp"

namespace speechee::testutil {

inline EventSchema small_schema() {
  return EventSchema({"Attack", "Transport", "Meet"},
                     {{"Attack", {"Attacker", "Target", "Place"}},
                      {"Transport", {"Artifact", "Destination"}},
                      {"Meet", {"Participant", "Place"}}});
}

inline std::vector<std::string> word_pool() {
  return {"soldiers", "convoy", "valley", "fired", "moved", "peace", "piece",
          "envoy", "cargo", "depot", "the", "old", "harbor"};
}

// Random schema-valid RecordSet with up to max_records records.
inline RecordSet random_record_set(std::mt19937_64& rng, const EventSchema& schema,
                                   const std::vector<std::string>& words,
                                   int max_records = 3) {
  std::uniform_int_distribution<int> rec_count(0, max_records);
  std::uniform_int_distribution<std::size_t> word_pick(0, words.size() - 1);
  std::uniform_int_distribution<int> word_count(1, 3);
  RecordSet rs;
  int n = rec_count(rng);
  for (int i = 0; i < n; ++i) {
    EventRecord rec;
    std::uniform_int_distribution<std::size_t> type_pick(0,
                                                         schema.event_types().size() - 1);
    rec.event_type = schema.event_types()[type_pick(rng)];
    int tw = word_count(rng);
    for (int w = 0; w < tw; ++w) rec.trigger.push_back(words[word_pick(rng)]);
    const auto& roles = schema.roles_of(rec.event_type);
    std::uniform_int_distribution<int> arg_count(0, 3);
    int na = roles.empty() ? 0 : arg_count(rng);
    for (int a = 0; a < na; ++a) {
      std::uniform_int_distribution<std::size_t> role_pick(0, roles.size() - 1);
      std::vector<std::string> mention;
      int mw = word_count(rng);
      for (int w = 0; w < mw; ++w) mention.push_back(words[word_pick(rng)]);
      rec.arguments.emplace_back(roles[role_pick(rng)], mention);
    }
    rs.records.push_back(std::move(rec));
  }
  return rs;
}

inline nn::Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows,
                                Eigen::Index cols, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  nn::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  return m;
}

// Central-difference gradient check for a scalar function of one parameter.
// Returns the max relative error over all coordinates.
template <typename LossFn>
double gradient_check(nn::Var param, const LossFn& loss_fn, double step = 1e-6) {
  nn::Var loss = loss_fn();
  param.zero_grad();
  nn::backward(loss);
  nn::Matrix analytic = param.grad().size() == 0
                            ? nn::Matrix::Zero(param.rows(), param.cols())
                            : param.grad();
  double worst = 0.0;
  for (Eigen::Index i = 0; i < param.rows(); ++i) {
    for (Eigen::Index j = 0; j < param.cols(); ++j) {
      double saved = param.value()(i, j);
      param.mutable_value()(i, j) = saved + step;
      double up = loss_fn().value()(0, 0);
      param.mutable_value()(i, j) = saved - step;
      double down = loss_fn().value()(0, 0);
      param.mutable_value()(i, j) = saved;
      double numeric = (up - down) / (2.0 * step);
      double denom = std::max({std::abs(analytic(i, j)), std::abs(numeric), 1e-3});
      worst = std::max(worst, std::abs(analytic(i, j) - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace speechee::testutil

#endif  // SPEECHEE_TESTS_TEST_UTIL_HPP_
