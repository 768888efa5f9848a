#include "ebench/optimizer.hpp"

#include <cmath>
#include <numbers>

namespace ebench::optim {

Adam::Adam(nn::ParameterRegistry& params, AdamConfig config) : params_(params), config_(config) {}

void Adam::step(double lr) {
  for (auto& p : params_.all()) {
    if (!p.tensor.requires_grad()) continue;
    const auto grad = p.tensor.grad();
    if (grad.empty()) continue;
    auto& slot = slots_[p.name];
    if (slot.m.empty()) {
      slot.m.assign(grad.size(), 0.0);
      slot.v.assign(grad.size(), 0.0);
    }
    ++slot.step;
    const double b1 = config_.beta1, b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(slot.step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(slot.step));
    auto w = p.tensor.mutable_data();
    for (std::size_t i = 0; i < grad.size(); ++i) {
      slot.m[i] = b1 * slot.m[i] + (1 - b1) * grad[i];
      slot.v[i] = b2 * slot.v[i] + (1 - b2) * grad[i] * grad[i];
      w[i] -= lr * (slot.m[i] / c1) / (std::sqrt(slot.v[i] / c2) + config_.eps);
    }
  }
}

double cosine_lr(double base_lr, int epoch, int total_epochs) {
  if (total_epochs <= 0) return base_lr;
  const double t = static_cast<double>(epoch) / static_cast<double>(total_epochs);
  return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * std::min(t, 1.0)));
}

}  // namespace ebench::optim
