#include "seqnat/optimizer.hpp"

#include <algorithm>
#include <cmath>

namespace seqnat {

Adam::Adam(const ModelDims& dims, AdamConfig cfg) : cfg_(cfg), first_(dims), second_(dims) {}

void Adam::step(ModelParams& params, const ParamGrads& grads, double lr) {
  ++steps_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
  for (std::size_t b = 0; b < kNumBlocks; ++b) {
    const Block block = static_cast<Block>(b);
    auto w = params.mutable_block(block).data();
    auto g = grads[block].data();
    auto m = first_[block].data();
    auto v = second_[block].data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.eps);
    }
  }
}

double scheduled_learning_rate(std::uint64_t step, std::uint64_t stage_steps, double peak) {
  const double warmup = std::max<double>(1.0, std::ceil(0.05 * static_cast<double>(stage_steps)));
  const double s = static_cast<double>(std::max<std::uint64_t>(step, 1));
  if (s <= warmup) return peak * s / warmup;
  return peak * std::sqrt(warmup / s);
}

}  // namespace seqnat
