#pragma once

#include <span>
#include <vector>

#include "ebench/nn/tensor.hpp"

namespace ebench::loss {

// Loss value with its analytic gradient with respect to the predictions.
struct LossValue {
  double value = 0;
  std::vector<double> grad;
};

// (1 - PLCC(pred, gt)) / 2. A constant prediction has PLCC 0 (loss 0.5,
// zero gradient). Errors on length mismatch, n < 2, or constant gt.
LossValue plcc_loss(std::span<const double> pred, std::span<const double> gt);

// Mean over pairs with gt_i > gt_j of max(0, pred_j - pred_i + margin);
// 0 when no such pairs exist.
LossValue rank_loss(std::span<const double> pred, std::span<const double> gt,
                    double margin = 0.0);

// plcc_loss + alpha * rank_loss
LossValue total_loss(std::span<const double> pred, std::span<const double> gt, double alpha,
                     double margin = 0.0);

// Wraps total_loss as a graph node over a [n,1] prediction tensor.
nn::Tensor total_loss_node(const nn::Tensor& pred, std::span<const double> gt, double alpha,
                           double margin = 0.0);

}  // namespace ebench::loss
