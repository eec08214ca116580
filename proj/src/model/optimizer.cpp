#include "convat/model/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "convat/netcore/errors.hpp"

namespace convat::model {

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "adam") return OptimizerKind::Adam;
  if (name == "sgd") return OptimizerKind::Sgd;
  throw InvalidInputError("unknown optimizer '" + std::string(name) + "'");
}

std::string_view optimizer_name(OptimizerKind kind) {
  return kind == OptimizerKind::Adam ? "adam" : "sgd";
}

Optimizer::Optimizer(OptimizerConfig cfg, const ParamTensors& shape) : cfg_(cfg) {
  if (!(cfg_.learning_rate > 0.0)) throw InvalidInputError("learning rate must be positive");
  if (cfg_.kind == OptimizerKind::Adam) {
    for (auto view : tensor_views(shape)) {
      m_.emplace_back(view.size(), 0.0);
      v_.emplace_back(view.size(), 0.0);
    }
  }
}

void Optimizer::step(ModelParams& params, const ParamGrads& grads) {
  auto pviews = tensor_views(params);
  auto gviews = tensor_views(grads);
  if (pviews.size() != gviews.size()) throw DimensionError("optimizer: gradient structure mismatch");
  ++t_;

  if (cfg_.kind == OptimizerKind::Sgd) {
    for (std::size_t k = 0; k < pviews.size(); ++k) axpy(-cfg_.learning_rate, gviews[k], pviews[k]);
  } else {
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < pviews.size(); ++k) {
      auto p = pviews[k];
      auto g = gviews[k];
      if (p.size() != g.size() || p.size() != m_[k].size()) {
        throw DimensionError("optimizer: tensor " + std::to_string(k) + " changed size");
      }
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
        p[i] -= cfg_.learning_rate * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg_.epsilon);
      }
    }
  }

  auto pad = params.embeddings.row(textdata::kPadId);
  std::fill(pad.begin(), pad.end(), 0.0);
  ++params.version;
}

}  // namespace convat::model
