#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "convat/model/cnn.hpp"

namespace convat::model {

enum class OptimizerKind { Adam, Sgd };
OptimizerKind parse_optimizer(std::string_view name);
std::string_view optimizer_name(OptimizerKind kind);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Applies gradient steps in place. Keeps the PAD embedding row at zero and
/// bumps params.version so stale forward caches are rejected.
class Optimizer {
 public:
  Optimizer(OptimizerConfig cfg, const ParamTensors& shape);

  void step(ModelParams& params, const ParamGrads& grads);
  std::uint64_t steps_taken() const noexcept { return t_; }

 private:
  OptimizerConfig cfg_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::uint64_t t_ = 0;
};

}  // namespace convat::model
