#ifndef SPEECHEE_CONTRASTIVE_HPP_
#define SPEECHEE_CONTRASTIVE_HPP_

#include <set>
#include <string>
#include <vector>

#include "speechee/nn/tensor.hpp"

namespace speechee {

// Average-pool encoder states over time, then L2-normalize. Output 1 x d.
nn::Var pool(const nn::Var& states);

// Event-type supervised contrastive loss over pooled, unit-norm embeddings.
// Anchors are samples sharing at least one event type with another sample;
// positives are averaged in the numerator and the denominator runs over all
// other samples in the batch. Returns the sum over anchors (1 x 1 scalar).
nn::Var contrastive_loss(const nn::Var& embeddings,
                         const std::vector<std::set<std::string>>& labels, double tau);

}  // namespace speechee

#endif  // SPEECHEE_CONTRASTIVE_HPP_
