#include "speechee/shrink.hpp"

#include "speechee/error.hpp"

namespace speechee {

void ShrinkConfig::check() const {
  if (layers < 0) throw Error("shrink: layers must be >= 0");
  if (stride < 1) throw Error("shrink: stride must be >= 1");
  if (kernel % 2 == 0) throw Error("shrink: kernel width must be odd");
  if (dim < 1) throw Error("shrink: bad channel dim");
}

int shrink_out_len(int in_len, const ShrinkConfig& cfg) {
  int len = in_len;
  for (int i = 0; i < cfg.layers; ++i) {
    len = (len + cfg.stride - 1) / cfg.stride;
  }
  return len;
}

ShrinkingUnit::ShrinkingUnit(nn::ParamStore& ps, const std::string& prefix,
                             const ShrinkConfig& cfg)
    : cfg_(cfg) {
  cfg.check();
  for (int i = 0; i < cfg.layers; ++i) {
    ws_.push_back(ps.create(prefix + ".conv" + std::to_string(i) + ".w",
                            static_cast<Eigen::Index>(cfg.kernel) * cfg.dim, cfg.dim));
    bs_.push_back(
        ps.create_zeros(prefix + ".conv" + std::to_string(i) + ".b", 1, cfg.dim));
  }
}

nn::Var ShrinkingUnit::operator()(const nn::Var& h) const {
  nn::Var x = h;
  for (std::size_t i = 0; i < ws_.size(); ++i) {
    x = nn::gelu(nn::conv1d(x, ws_[i], bs_[i], cfg_.kernel, cfg_.stride));
  }
  return x;
}

}  // namespace speechee
