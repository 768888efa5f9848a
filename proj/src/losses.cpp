#include "ebench/losses.hpp"

#include <cmath>

#include "ebench/error.hpp"
#include "ebench/nn/ops.hpp"

namespace ebench::loss {

namespace {

void check_lengths(std::span<const double> pred, std::span<const double> gt, const char* op) {
  if (pred.size() != gt.size()) {
    throw ValidationError(std::string(op) + ": length mismatch (" + std::to_string(pred.size()) +
                          " vs " + std::to_string(gt.size()) + ")");
  }
  if (pred.size() < 2) throw ValidationError(std::string(op) + ": needs at least 2 samples");
}

std::vector<double> centred(std::span<const double> v) {
  double mean = 0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] - mean;
  return out;
}

}  // namespace

LossValue plcc_loss(std::span<const double> pred, std::span<const double> gt) {
  check_lengths(pred, gt, "plcc_loss");
  const auto p = centred(pred);
  const auto g = centred(gt);
  double pp = 0, gg = 0, pg = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    pp += p[i] * p[i];
    gg += g[i] * g[i];
    pg += p[i] * g[i];
  }
  if (gg == 0.0) throw ValidationError("plcc_loss: ground truth is constant");
  LossValue out;
  out.grad.assign(p.size(), 0.0);
  if (pp == 0.0) {
    out.value = 0.5;
    return out;
  }
  const double np = std::sqrt(pp), ng = std::sqrt(gg);
  const double r = pg / (np * ng);
  out.value = (1.0 - r) / 2.0;
  // dr/dp_i = g_i / (|p||g|) - r p_i / |p|^2 on centred vectors.
  for (std::size_t i = 0; i < p.size(); ++i) {
    out.grad[i] = -0.5 * (g[i] / (np * ng) - r * p[i] / pp);
  }
  return out;
}

LossValue rank_loss(std::span<const double> pred, std::span<const double> gt, double margin) {
  check_lengths(pred, gt, "rank_loss");
  LossValue out;
  out.grad.assign(pred.size(), 0.0);
  std::size_t pairs = 0;
  double total = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    for (std::size_t j = 0; j < pred.size(); ++j) {
      if (!(gt[i] > gt[j])) continue;
      ++pairs;
      const double h = pred[j] - pred[i] + margin;
      if (h > 0) {
        total += h;
        out.grad[j] += 1.0;
        out.grad[i] -= 1.0;
      }
    }
  }
  if (pairs == 0) return out;
  out.value = total / static_cast<double>(pairs);
  for (auto& g : out.grad) g /= static_cast<double>(pairs);
  return out;
}

LossValue total_loss(std::span<const double> pred, std::span<const double> gt, double alpha,
                     double margin) {
  if (alpha < 0) throw ValidationError("total_loss: alpha must be non-negative");
  auto p = plcc_loss(pred, gt);
  const auto r = rank_loss(pred, gt, margin);
  p.value += alpha * r.value;
  for (std::size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += alpha * r.grad[i];
  return p;
}

nn::Tensor total_loss_node(const nn::Tensor& pred, std::span<const double> gt, double alpha,
                           double margin) {
  auto l = total_loss(pred.data(), gt, alpha, margin);
  return nn::external_loss(pred, l.value, std::move(l.grad));
}

}  // namespace ebench::loss
