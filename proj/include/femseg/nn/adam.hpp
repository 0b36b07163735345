#pragma once

#include <cmath>
#include <vector>

#include "femseg/core/error.hpp"
#include "femseg/nn/param.hpp"

namespace femseg {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update over the given parameters; t is the
/// 1-based step index.
inline void adam_step(std::vector<ParamTensor*>& params, std::uint64_t t, const AdamConfig& cfg) {
  if (t < 1) raise(ErrorKind::Config, "adam step index must be >= 1");
  if (!(cfg.beta1 > 0.0 && cfg.beta1 < 1.0 && cfg.beta2 > 0.0 && cfg.beta2 < 1.0))
    raise(ErrorKind::Config, "adam betas must lie in (0, 1)");
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (ParamTensor* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double g = p->grad[i];
      p->adam_m[i] = cfg.beta1 * p->adam_m[i] + (1.0 - cfg.beta1) * g;
      p->adam_v[i] = cfg.beta2 * p->adam_v[i] + (1.0 - cfg.beta2) * g * g;
      const double mhat = p->adam_m[i] / bc1;
      const double vhat = p->adam_v[i] / bc2;
      p->value[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

}  // namespace femseg
