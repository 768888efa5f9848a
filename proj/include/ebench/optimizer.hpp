#pragma once

#include <map>
#include <string>
#include <vector>

#include "ebench/nn/layers.hpp"

namespace ebench::optim {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with per-parameter step counts, so a group that starts training late
// gets correct bias correction. Only parameters that currently require grad
// and hold a gradient are updated.
class Adam {
 public:
  struct Slot {
    std::vector<double> m;
    std::vector<double> v;
    long long step = 0;
  };

  explicit Adam(nn::ParameterRegistry& params, AdamConfig config = {});

  void step(double lr);
  const std::map<std::string, Slot>& slots() const { return slots_; }
  std::map<std::string, Slot>& slots() { return slots_; }
  const AdamConfig& config() const { return config_; }

 private:
  nn::ParameterRegistry& params_;
  AdamConfig config_;
  std::map<std::string, Slot> slots_;
};

// Cosine decay from base_lr at epoch 0 toward 0 at total_epochs.
double cosine_lr(double base_lr, int epoch, int total_epochs);

}  // namespace ebench::optim
