#pragma once

#include <cstdint>

#include "seqnat/nat_model.hpp"

namespace seqnat {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-8;
};

/// Adam with bias correction; one moment pair per parameter block.
class Adam {
 public:
  Adam(const ModelDims& dims, AdamConfig cfg = {});

  void step(ModelParams& params, const ParamGrads& grads, double lr);
  std::uint64_t steps() const { return steps_; }

 private:
  AdamConfig cfg_;
  ParamGrads first_;
  ParamGrads second_;
  std::uint64_t steps_ = 0;
};

/// Linear warmup over the first 5% of a stage (at least one step) to
/// `peak`, then inverse-square-root decay. `step` is 1-based within the stage.
double scheduled_learning_rate(std::uint64_t step, std::uint64_t stage_steps, double peak);

}  // namespace seqnat
