#ifndef SPEECHEE_SHRINK_HPP_
#define SPEECHEE_SHRINK_HPP_

#include <string>
#include <vector>

#include "speechee/nn/layers.hpp"

namespace speechee {

struct ShrinkConfig {
  int layers = 2;   // n; 0 disables the unit (identity)
  int stride = 2;   // m
  int kernel = 3;   // odd
  int dim = 48;     // matches encoder model_dim

  void check() const;
};

// Expected output length: layers nested applications of ceil(len / stride).
int shrink_out_len(int in_len, const ShrinkConfig& cfg);

// Stack of strided 1-D convolutions with GELU, same-padding, channel
// preserving. Compresses encoder states by stride^layers.
class ShrinkingUnit {
 public:
  ShrinkingUnit() = default;
  ShrinkingUnit(nn::ParamStore& ps, const std::string& prefix, const ShrinkConfig& cfg);
  nn::Var operator()(const nn::Var& h) const;
  const ShrinkConfig& config() const { return cfg_; }

 private:
  ShrinkConfig cfg_;
  std::vector<nn::Var> ws_, bs_;
};

}  // namespace speechee

#endif  // SPEECHEE_SHRINK_HPP_
