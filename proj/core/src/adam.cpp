#include <cmath>

#include "goldmine/error.hpp"
#include "goldmine/net.hpp"

namespace goldmine::net {

AdamState AdamState::zeros(std::size_t n) {
  const auto size = static_cast<Eigen::Index>(n);
  return {Vector::Zero(size), Vector::Zero(size), 0};
}

void adam_step(AdamState& state, Vector& weights, const Vector& gradient, const AdamConfig& config) {
  if (gradient.size() != weights.size() || state.m.size() != weights.size()) {
    throw Error(ErrorCode::config, "adam: shape mismatch");
  }
  ++state.step;
  state.m = config.beta1 * state.m + (1.0 - config.beta1) * gradient;
  state.v = config.beta2 * state.v + (1.0 - config.beta2) * gradient.cwiseProduct(gradient);
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  weights.array() -= config.lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + config.eps);
}

}  // namespace goldmine::net
