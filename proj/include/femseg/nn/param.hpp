#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace femseg {

/// One named parameter array with its gradient and Adam moment buffers.
struct ParamTensor {
  std::string name;
  std::vector<std::int64_t> shape;
  std::vector<double> value;
  std::vector<double> grad;
  std::vector<double> adam_m;
  std::vector<double> adam_v;

  void init(std::string n, std::vector<std::int64_t> s, std::size_t count, double fill = 0.0) {
    name = std::move(n);
    shape = std::move(s);
    value.assign(count, fill);
    grad.assign(count, 0.0);
    adam_m.assign(count, 0.0);
    adam_v.assign(count, 0.0);
  }

  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
};

}  // namespace femseg
