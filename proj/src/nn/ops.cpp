#include "ebench/nn/ops.hpp"

#include <cmath>
#include <numbers>

#include "ebench/error.hpp"
#include "ebench/kernels.hpp"

namespace ebench::nn {

namespace {

using kernels::GemmShape;

void expect(bool ok, const char* op, const std::string& detail) {
  if (!ok) throw Error(std::string(op) + ": " + detail);
}

void expect_2d(const Tensor& t, const char* op) {
  expect(t.shape().size() == 2, op, "expected a 2-D tensor, got " + shape_string(t.shape()));
}

// Grad buffer of parent i, or nullptr when that parent needs none.
double* parent_grad(Node& self, std::size_t i) {
  Node& p = *self.parents[i];
  return p.requires_grad ? p.ensure_grad().data() : nullptr;
}

const double* parent_value(Node& self, std::size_t i) { return self.parents[i]->value.data(); }

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  expect_2d(a, "matmul");
  expect_2d(b, "matmul");
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  expect(static_cast<std::size_t>(b.rows()) == k, "matmul",
         shape_string(a.shape()) + " x " + shape_string(b.shape()));
  std::vector<double> out(n * m);
  kernels::gemm(a.data().data(), b.data().data(), out.data(), {n, k, m});
  return make_result({static_cast<int>(n), static_cast<int>(m)}, std::move(out), {a, b},
                     [n, k, m](Node& self) {
                       const double* g = self.grad.data();
                       if (double* ga = parent_grad(self, 0)) {
                         kernels::gemm(g, parent_value(self, 1), ga,
                                       {n, m, k, false, true, true});
                       }
                       if (double* gb = parent_grad(self, 1)) {
                         kernels::gemm(parent_value(self, 0), g, gb,
                                       {k, n, m, true, false, true});
                       }
                     });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  expect_2d(a, "matmul_nt");
  expect_2d(b, "matmul_nt");
  const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
  expect(static_cast<std::size_t>(b.cols()) == k, "matmul_nt",
         shape_string(a.shape()) + " x " + shape_string(b.shape()) + "^T");
  std::vector<double> out(n * m);
  kernels::gemm(a.data().data(), b.data().data(), out.data(), {n, k, m, false, true});
  return make_result({static_cast<int>(n), static_cast<int>(m)}, std::move(out), {a, b},
                     [n, k, m](Node& self) {
                       const double* g = self.grad.data();
                       if (double* ga = parent_grad(self, 0)) {
                         kernels::gemm(g, parent_value(self, 1), ga, {n, m, k, false, false, true});
                       }
                       if (double* gb = parent_grad(self, 1)) {
                         kernels::gemm(g, parent_value(self, 0), gb, {m, n, k, true, false, true});
                       }
                     });
}

Tensor transpose(const Tensor& a) {
  expect_2d(a, "transpose");
  const int n = a.rows(), m = a.cols();
  std::vector<double> out(a.numel());
  const auto v = a.data();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) out[static_cast<std::size_t>(j) * n + i] = v[static_cast<std::size_t>(i) * m + j];
  return make_result({m, n}, std::move(out), {a}, [n, m](Node& self) {
    if (double* ga = parent_grad(self, 0)) {
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j)
          ga[static_cast<std::size_t>(i) * m + j] += self.grad[static_cast<std::size_t>(j) * n + i];
    }
  });
}

namespace {

template <typename Fwd, typename DA, typename DB>
Tensor binary(const Tensor& a, const Tensor& b, const char* op, Fwd fwd, DA da, DB db) {
  expect(a.shape() == b.shape(), op, shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(a.data()[i], b.data()[i]);
  return make_result(a.shape(), std::move(out), {a, b}, [da, db](Node& self) {
    const double* va = parent_value(self, 0);
    const double* vb = parent_value(self, 1);
    const std::size_t n = self.value.size();
    if (double* ga = parent_grad(self, 0))
      for (std::size_t i = 0; i < n; ++i) ga[i] += self.grad[i] * da(va[i], vb[i]);
    if (double* gb = parent_grad(self, 1))
      for (std::size_t i = 0; i < n; ++i) gb[i] += self.grad[i] * db(va[i], vb[i]);
  });
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& a, Fwd fwd, Deriv deriv) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(a.data()[i]);
  return make_result(a.shape(), std::move(out), {a}, [deriv](Node& self) {
    const double* va = parent_value(self, 0);
    if (double* ga = parent_grad(self, 0))
      for (std::size_t i = 0; i < self.value.size(); ++i)
        ga[i] += self.grad[i] * deriv(va[i], self.value[i]);
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor scale(const Tensor& a, double s) {
  return unary(a, [s](double x) { return x * s; }, [s](double, double) { return s; });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  expect_2d(x, "add_bias");
  const std::size_t n = x.rows(), m = x.cols();
  expect(bias.numel() == m, "add_bias",
         shape_string(x.shape()) + " + bias " + shape_string(bias.shape()));
  std::vector<double> out(x.data().begin(), x.data().end());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] += bias.data()[j];
  return make_result(x.shape(), std::move(out), {x, bias}, [n, m](Node& self) {
    if (double* gx = parent_grad(self, 0))
      for (std::size_t i = 0; i < n * m; ++i) gx[i] += self.grad[i];
    if (double* gb = parent_grad(self, 1))
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) gb[j] += self.grad[i * m + j];
  });
}

Tensor gelu(const Tensor& a) {
  constexpr double c = 0.7978845608028654;  // sqrt(2/pi)
  return unary(
      a,
      [](double x) { return 0.5 * x * (1.0 + std::tanh(c * (x + 0.044715 * x * x * x))); },
      [](double x, double) {
        const double u = c * (x + 0.044715 * x * x * x);
        const double t = std::tanh(u);
        const double du = c * (1.0 + 3 * 0.044715 * x * x);
        return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
      });
}

Tensor tanh(const Tensor& a) {
  return unary(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor softmax_rows(const Tensor& a) {
  expect_2d(a, "softmax_rows");
  const std::size_t n = a.rows(), m = a.cols();
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < n; ++i) {
    const double* r = a.data().data() + i * m;
    double mx = r[0];
    for (std::size_t j = 1; j < m; ++j) mx = std::max(mx, r[j]);
    double s = 0;
    for (std::size_t j = 0; j < m; ++j) s += out[i * m + j] = std::exp(r[j] - mx);
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] /= s;
  }
  return make_result(a.shape(), std::move(out), {a}, [n, m](Node& self) {
    double* ga = parent_grad(self, 0);
    if (!ga) return;
    for (std::size_t i = 0; i < n; ++i) {
      const double* y = self.value.data() + i * m;
      const double* g = self.grad.data() + i * m;
      double dot = 0;
      for (std::size_t j = 0; j < m; ++j) dot += g[j] * y[j];
      for (std::size_t j = 0; j < m; ++j) ga[i * m + j] += y[j] * (g[j] - dot);
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  expect_2d(x, "layer_norm");
  const std::size_t n = x.rows(), m = x.cols();
  expect(gamma.numel() == m && beta.numel() == m, "layer_norm", "affine size mismatch");
  std::vector<double> xhat(x.numel()), inv_std(n), out(x.numel());
  for (std::size_t i = 0; i < n; ++i) {
    const double* r = x.data().data() + i * m;
    double mu = 0;
    for (std::size_t j = 0; j < m; ++j) mu += r[j];
    mu /= static_cast<double>(m);
    double var = 0;
    for (std::size_t j = 0; j < m; ++j) var += (r[j] - mu) * (r[j] - mu);
    var /= static_cast<double>(m);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < m; ++j) {
      xhat[i * m + j] = (r[j] - mu) * inv_std[i];
      out[i * m + j] = xhat[i * m + j] * gamma.data()[j] + beta.data()[j];
    }
  }
  return make_result(x.shape(), std::move(out), {x, gamma, beta},
                     [n, m, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
                       const double* g = self.grad.data();
                       const double* gam = parent_value(self, 1);
                       if (double* gg = parent_grad(self, 1))
                         for (std::size_t i = 0; i < n * m; ++i) gg[i % m] += g[i] * xhat[i];
                       if (double* gb = parent_grad(self, 2))
                         for (std::size_t i = 0; i < n * m; ++i) gb[i % m] += g[i];
                       double* gx = parent_grad(self, 0);
                       if (!gx) return;
                       for (std::size_t i = 0; i < n; ++i) {
                         double mean_d = 0, mean_dx = 0;
                         for (std::size_t j = 0; j < m; ++j) {
                           const double d = g[i * m + j] * gam[j];
                           mean_d += d;
                           mean_dx += d * xhat[i * m + j];
                         }
                         mean_d /= static_cast<double>(m);
                         mean_dx /= static_cast<double>(m);
                         for (std::size_t j = 0; j < m; ++j) {
                           const double d = g[i * m + j] * gam[j];
                           gx[i * m + j] += inv_std[i] * (d - mean_d - xhat[i * m + j] * mean_dx);
                         }
                       }
                     });
}

Tensor l2_normalize_rows(const Tensor& x, double eps) {
  expect_2d(x, "l2_normalize_rows");
  const std::size_t n = x.rows(), m = x.cols();
  std::vector<double> out(x.numel()), norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < m; ++j) s += x.data()[i * m + j] * x.data()[i * m + j];
    norms[i] = std::max(std::sqrt(s), eps);
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] = x.data()[i * m + j] / norms[i];
  }
  return make_result(x.shape(), std::move(out), {x}, [n, m, norms = std::move(norms)](Node& self) {
    double* gx = parent_grad(self, 0);
    if (!gx) return;
    for (std::size_t i = 0; i < n; ++i) {
      const double* y = self.value.data() + i * m;
      const double* g = self.grad.data() + i * m;
      double dot = 0;
      for (std::size_t j = 0; j < m; ++j) dot += y[j] * g[j];
      for (std::size_t j = 0; j < m; ++j) gx[i * m + j] += (g[j] - y[j] * dot) / norms[i];
    }
  });
}

Tensor mean_rows(const Tensor& x) {
  expect_2d(x, "mean_rows");
  const std::size_t n = x.rows(), m = x.cols();
  std::vector<double> out(m, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[j] += x.data()[i * m + j];
  for (auto& v : out) v /= static_cast<double>(n);
  return make_result({1, static_cast<int>(m)}, std::move(out), {x}, [n, m](Node& self) {
    if (double* gx = parent_grad(self, 0))
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) gx[i * m + j] += self.grad[j] / static_cast<double>(n);
  });
}

Tensor sum_all(const Tensor& x) {
  double s = 0;
  for (double v : x.data()) s += v;
  return make_result({1, 1}, {s}, {x}, [](Node& self) {
    if (double* gx = parent_grad(self, 0))
      for (std::size_t i = 0; i < self.parents[0]->value.size(); ++i) gx[i] += self.grad[0];
  });
}

Tensor sum_cols(const Tensor& x) {
  expect_2d(x, "sum_cols");
  const std::size_t n = x.rows(), m = x.cols();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[i] += x.data()[i * m + j];
  return make_result({static_cast<int>(n), 1}, std::move(out), {x}, [n, m](Node& self) {
    if (double* gx = parent_grad(self, 0))
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) gx[i * m + j] += self.grad[i];
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  expect(!parts.empty(), "concat_cols", "no inputs");
  const std::size_t n = parts[0].rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    expect_2d(p, "concat_cols");
    expect(static_cast<std::size_t>(p.rows()) == n, "concat_cols", "row count mismatch");
    widths.push_back(p.cols());
    total += p.cols();
  }
  std::vector<double> out(n * total);
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < widths[k]; ++j)
        out[i * total + off + j] = parts[k].data()[i * widths[k] + j];
    off += widths[k];
  }
  return make_result({static_cast<int>(n), static_cast<int>(total)}, std::move(out), parts,
                     [n, total, widths](Node& self) {
                       std::size_t off = 0;
                       for (std::size_t k = 0; k < widths.size(); ++k) {
                         if (double* g = parent_grad(self, k))
                           for (std::size_t i = 0; i < n; ++i)
                             for (std::size_t j = 0; j < widths[k]; ++j)
                               g[i * widths[k] + j] += self.grad[i * total + off + j];
                         off += widths[k];
                       }
                     });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  expect(!parts.empty(), "concat_rows", "no inputs");
  const int m = parts[0].cols();
  std::vector<std::size_t> sizes;
  std::vector<double> out;
  int rows = 0;
  for (const auto& p : parts) {
    expect_2d(p, "concat_rows");
    expect(p.cols() == m, "concat_rows", "column count mismatch");
    out.insert(out.end(), p.data().begin(), p.data().end());
    sizes.push_back(p.numel());
    rows += p.rows();
  }
  return make_result({rows, m}, std::move(out), parts, [sizes](Node& self) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      if (double* g = parent_grad(self, k))
        for (std::size_t i = 0; i < sizes[k]; ++i) g[i] += self.grad[off + i];
      off += sizes[k];
    }
  });
}

Tensor slice_rows(const Tensor& x, int start, int count) {
  expect_2d(x, "slice_rows");
  expect(start >= 0 && count >= 0 && start + count <= x.rows(), "slice_rows", "range out of bounds");
  const std::size_t m = x.cols();
  std::vector<double> out(x.data().begin() + static_cast<std::ptrdiff_t>(start * m),
                          x.data().begin() + static_cast<std::ptrdiff_t>((start + count) * m));
  return make_result({count, static_cast<int>(m)}, std::move(out), {x}, [start, m](Node& self) {
    if (double* g = parent_grad(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[start * m + i] += self.grad[i];
  });
}

Tensor slice_cols(const Tensor& x, int start, int count) {
  expect_2d(x, "slice_cols");
  expect(start >= 0 && count >= 0 && start + count <= x.cols(), "slice_cols", "range out of bounds");
  const std::size_t n = x.rows(), m = x.cols(), c = count;
  std::vector<double> out(n * c);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = x.data()[i * m + start + j];
  return make_result({static_cast<int>(n), count}, std::move(out), {x},
                     [n, m, c, start](Node& self) {
                       if (double* g = parent_grad(self, 0))
                         for (std::size_t i = 0; i < n; ++i)
                           for (std::size_t j = 0; j < c; ++j)
                             g[i * m + start + j] += self.grad[i * c + j];
                     });
}

Tensor gather_rows(const Tensor& x, std::span<const int> rows) {
  expect_2d(x, "gather_rows");
  const std::size_t m = x.cols();
  std::vector<int> idx(rows.begin(), rows.end());
  std::vector<double> out(idx.size() * m);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    expect(idx[r] >= 0 && idx[r] < x.rows(), "gather_rows", "row index out of range");
    for (std::size_t j = 0; j < m; ++j) out[r * m + j] = x.data()[idx[r] * m + j];
  }
  return make_result({static_cast<int>(idx.size()), static_cast<int>(m)}, std::move(out), {x},
                     [m, idx](Node& self) {
                       if (double* g = parent_grad(self, 0))
                         for (std::size_t r = 0; r < idx.size(); ++r)
                           for (std::size_t j = 0; j < m; ++j) g[idx[r] * m + j] += self.grad[r * m + j];
                     });
}

Tensor embedding(const Tensor& table, std::span<const int> ids) { return gather_rows(table, ids); }

Tensor reshape(const Tensor& x, Shape shape) {
  expect(nn::numel(shape) == x.numel(), "reshape",
         shape_string(x.shape()) + " -> " + shape_string(shape));
  std::vector<double> out(x.data().begin(), x.data().end());
  return make_result(std::move(shape), std::move(out), {x}, [](Node& self) {
    if (double* g = parent_grad(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, int k, int stride,
              int pad) {
  expect(x.shape().size() == 3, "conv2d", "input must be [C,H,W], got " + shape_string(x.shape()));
  const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
  const int O = weight.rows();
  expect(weight.shape().size() == 2 && weight.cols() == C * k * k, "conv2d",
         "weight " + shape_string(weight.shape()) + " does not match input channels");
  expect(static_cast<int>(bias.numel()) == O, "conv2d", "bias size mismatch");
  const int Ho = (H + 2 * pad - k) / stride + 1;
  const int Wo = (W + 2 * pad - k) / stride + 1;
  expect(Ho > 0 && Wo > 0, "conv2d", "input smaller than kernel");
  const std::size_t ckk = static_cast<std::size_t>(C) * k * k;
  const std::size_t hw = static_cast<std::size_t>(Ho) * Wo;

  std::vector<double> cols(ckk * hw, 0.0);
  const double* xv = x.data().data();
  for (int c = 0; c < C; ++c)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const std::size_t row = (static_cast<std::size_t>(c) * k + ky) * k + kx;
        for (int oy = 0; oy < Ho; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= H) continue;
          for (int ox = 0; ox < Wo; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= W) continue;
            cols[row * hw + static_cast<std::size_t>(oy) * Wo + ox] =
                xv[(static_cast<std::size_t>(c) * H + iy) * W + ix];
          }
        }
      }
  std::vector<double> out(static_cast<std::size_t>(O) * hw);
  kernels::gemm(weight.data().data(), cols.data(), out.data(), {static_cast<std::size_t>(O), ckk, hw});
  for (int o = 0; o < O; ++o)
    for (std::size_t p = 0; p < hw; ++p) out[o * hw + p] += bias.data()[o];

  return make_result(
      {O, Ho, Wo}, std::move(out), {x, weight, bias},
      [=, cols = std::move(cols)](Node& self) {
        const double* g = self.grad.data();
        const std::size_t o = static_cast<std::size_t>(O);
        if (double* gw = parent_grad(self, 1)) {
          kernels::gemm(g, cols.data(), gw, {o, hw, ckk, false, true, true});
        }
        if (double* gb = parent_grad(self, 2)) {
          for (std::size_t i = 0; i < o; ++i)
            for (std::size_t p = 0; p < hw; ++p) gb[i] += g[i * hw + p];
        }
        if (double* gx = parent_grad(self, 0)) {
          std::vector<double> dcols(ckk * hw);
          kernels::gemm(parent_value(self, 1), g, dcols.data(), {ckk, o, hw, true, false, false});
          for (int c = 0; c < C; ++c)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const std::size_t row = (static_cast<std::size_t>(c) * k + ky) * k + kx;
                for (int oy = 0; oy < Ho; ++oy) {
                  const int iy = oy * stride - pad + ky;
                  if (iy < 0 || iy >= H) continue;
                  for (int ox = 0; ox < Wo; ++ox) {
                    const int ix = ox * stride - pad + kx;
                    if (ix < 0 || ix >= W) continue;
                    gx[(static_cast<std::size_t>(c) * H + iy) * W + ix] +=
                        dcols[row * hw + static_cast<std::size_t>(oy) * Wo + ox];
                  }
                }
              }
        }
      });
}

Tensor global_avg_pool(const Tensor& x) {
  expect(x.shape().size() == 3, "global_avg_pool", "input must be [C,H,W]");
  const std::size_t C = x.dim(0), hw = static_cast<std::size_t>(x.dim(1)) * x.dim(2);
  std::vector<double> out(C, 0.0);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t p = 0; p < hw; ++p) out[c] += x.data()[c * hw + p];
    out[c] /= static_cast<double>(hw);
  }
  return make_result({1, static_cast<int>(C)}, std::move(out), {x}, [C, hw](Node& self) {
    if (double* g = parent_grad(self, 0))
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t p = 0; p < hw; ++p) g[c * hw + p] += self.grad[c] / static_cast<double>(hw);
  });
}

Tensor external_loss(const Tensor& pred, double loss, std::vector<double> dloss_dpred) {
  expect(dloss_dpred.size() == pred.numel(), "external_loss", "gradient size mismatch");
  return make_result({1, 1}, {loss}, {pred}, [d = std::move(dloss_dpred)](Node& self) {
    if (double* g = parent_grad(self, 0))
      for (std::size_t i = 0; i < d.size(); ++i) g[i] += self.grad[0] * d[i];
  });
}

}  // namespace ebench::nn
