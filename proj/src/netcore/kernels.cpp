#include "convat/netcore/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "convat/netcore/errors.hpp"

namespace convat {
namespace {

[[noreturn]] void shape_mismatch(const char* op, const Tensor2& a, const Tensor2& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + a.shape_string() + " and " +
                       b.shape_string());
}

void check_distribution(const Vector& p, const char* name) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) throw InvalidInputError(std::string("kl_divergence: negative entry in ") + name);
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw InvalidInputError(std::string("kl_divergence: ") + name + " sums to " +
                            std::to_string(sum));
  }
}

}  // namespace

Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
  if (a.cols() != b.rows()) shape_mismatch("matmul", a, b);
  Tensor2 out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto orow = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

MatmulGrads matmul_backward(const Tensor2& a, const Tensor2& b, const Tensor2& upstream) {
  if (a.cols() != b.rows()) shape_mismatch("matmul_backward", a, b);
  if (upstream.rows() != a.rows() || upstream.cols() != b.cols()) {
    throw DimensionError("matmul_backward: upstream " + upstream.shape_string() +
                         " does not match product shape (" + std::to_string(a.rows()) + "x" +
                         std::to_string(b.cols()) + ")");
  }
  MatmulGrads g{Tensor2(a.rows(), a.cols()), Tensor2(b.rows(), b.cols())};
  // da = upstream * b^T ; db = a^T * upstream
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto up = upstream.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      g.da(i, k) = dot(up, b.row(k));
      axpy(a(i, k), up, g.db.row(k));
    }
  }
  return g;
}

Vector vec_mat(std::span<const double> x, const Tensor2& w) {
  if (x.size() != w.rows()) {
    throw DimensionError("vec_mat: vector of dim " + std::to_string(x.size()) +
                         " against matrix " + w.shape_string());
  }
  Vector out(w.cols());
  for (std::size_t i = 0; i < w.rows(); ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    axpy(xi, w.row(i), out.flat());
  }
  return out;
}

Vector mat_vec(const Tensor2& w, std::span<const double> y) {
  if (y.size() != w.cols()) {
    throw DimensionError("mat_vec: matrix " + w.shape_string() + " against vector of dim " +
                         std::to_string(y.size()));
  }
  Vector out(w.rows());
  for (std::size_t i = 0; i < w.rows(); ++i) out[i] = dot(w.row(i), y);
  return out;
}

void add_outer(Tensor2& w, double alpha, std::span<const double> x, std::span<const double> y) {
  if (x.size() != w.rows() || y.size() != w.cols()) {
    throw DimensionError("add_outer: (" + std::to_string(x.size()) + "x" +
                         std::to_string(y.size()) + ") into " + w.shape_string());
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double s = alpha * x[i];
    if (s == 0.0) continue;
    axpy(s, y, w.row(i));
  }
}

Vector softmax(const Vector& z) {
  if (z.dim() < 2) throw InvalidInputError("softmax: need at least 2 logits");
  const double zmax = *std::max_element(z.begin(), z.end());
  Vector out(z.dim());
  double sum = 0.0;
  for (std::size_t k = 0; k < z.dim(); ++k) {
    out[k] = std::exp(z[k] - zmax);
    sum += out[k];
  }
  for (double& v : out) v /= sum;
  return out;
}

Vector floor_probs(const Vector& p) {
  Vector out = p;
  for (double& v : out) v = std::max(v, kProbFloor);
  return out;
}

double kl_divergence(const Vector& p, const Vector& q) {
  if (p.dim() != q.dim()) {
    throw DimensionError("kl_divergence: dims " + std::to_string(p.dim()) + " and " +
                         std::to_string(q.dim()));
  }
  check_distribution(p, "p");
  check_distribution(q, "q");
  double kl = 0.0;
  for (std::size_t k = 0; k < p.dim(); ++k) {
    if (p[k] == 0.0) continue;
    if (q[k] == 0.0) return std::numeric_limits<double>::infinity();
    kl += p[k] * (std::log(p[k]) - std::log(q[k]));
  }
  return std::max(kl, 0.0);
}

bool is_divergence_overflow(double kl) { return std::isinf(kl); }

Vector softmax_cross_entropy_backward(const Vector& logits, std::size_t label) {
  if (label >= logits.dim()) {
    throw DimensionError("softmax_cross_entropy_backward: label " + std::to_string(label) +
                         " out of range for " + std::to_string(logits.dim()) + " classes");
  }
  Vector g = softmax(logits);
  g[label] -= 1.0;
  return g;
}

ConvParams::ConvParams(std::size_t window_, std::size_t in_dim_, std::size_t filters)
    : window(window_), in_dim(in_dim_), weights(filters, window_ * in_dim_), bias(filters) {}

Tensor2 conv1d_forward(const Tensor2& x, const ConvParams& p) {
  if (x.cols() != p.in_dim || p.weights.cols() != p.window * p.in_dim) {
    throw DimensionError("conv1d_forward: input " + x.shape_string() + " against kernels " +
                         p.weights.shape_string() + " with window " + std::to_string(p.window));
  }
  if (x.rows() < p.window) throw SequenceTooShortError(x.rows(), p.window);
  const std::size_t steps = x.rows() - p.window + 1;
  const std::size_t span_len = p.window * p.in_dim;
  Tensor2 out(steps, p.filters());
  for (std::size_t t = 0; t < steps; ++t) {
    // Rows t..t+h-1 of a row-major T×d matrix are one contiguous h·d block.
    std::span<const double> window(x.data() + t * p.in_dim, span_len);
    auto orow = out.row(t);
    for (std::size_t f = 0; f < p.filters(); ++f) orow[f] = dot(p.weights.row(f), window) + p.bias[f];
  }
  return out;
}

ConvGrads conv1d_backward(const Tensor2& x, const ConvParams& p, const Tensor2& upstream,
                          bool want_dx, bool want_params) {
  if (x.cols() != p.in_dim || x.rows() < p.window) {
    throw DimensionError("conv1d_backward: cached input " + x.shape_string() +
                         " does not fit kernels " + p.weights.shape_string());
  }
  const std::size_t steps = x.rows() - p.window + 1;
  if (upstream.rows() != steps || upstream.cols() != p.filters()) {
    throw DimensionError("conv1d_backward: upstream " + upstream.shape_string() + " expected (" +
                         std::to_string(steps) + "x" + std::to_string(p.filters()) + ")");
  }
  const std::size_t span_len = p.window * p.in_dim;
  ConvGrads g;
  if (want_dx) g.dx = Tensor2(x.rows(), x.cols());
  if (want_params) {
    g.dweights = Tensor2(p.weights.rows(), p.weights.cols());
    g.dbias = Vector(p.filters());
  }
  for (std::size_t t = 0; t < steps; ++t) {
    std::span<const double> window(x.data() + t * p.in_dim, span_len);
    std::span<double> dwindow;
    if (want_dx) dwindow = std::span<double>(g.dx.data() + t * p.in_dim, span_len);
    auto up = upstream.row(t);
    for (std::size_t f = 0; f < p.filters(); ++f) {
      const double u = up[f];
      if (u == 0.0) continue;
      if (want_params) {
        axpy(u, window, g.dweights.row(f));
        g.dbias[f] += u;
      }
      if (want_dx) axpy(u, p.weights.row(f), dwindow);
    }
  }
  return g;
}

Tensor2 relu_forward(const Tensor2& x) {
  Tensor2 out = x;
  for (double& v : out.flat()) v = v > 0.0 ? v : 0.0;
  return out;
}

Tensor2 relu_backward(const Tensor2& pre_activation, const Tensor2& upstream) {
  if (pre_activation.rows() != upstream.rows() || pre_activation.cols() != upstream.cols()) {
    shape_mismatch("relu_backward", pre_activation, upstream);
  }
  Tensor2 out(upstream.rows(), upstream.cols());
  auto pre = pre_activation.flat();
  auto up = upstream.flat();
  auto o = out.flat();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = pre[i] > 0.0 ? up[i] : 0.0;
  return out;
}

MaxPoolResult max_over_time_forward(const Tensor2& x) {
  if (x.rows() == 0) throw DimensionError("max_over_time_forward: empty time axis");
  MaxPoolResult r{Vector(x.cols()), std::vector<std::size_t>(x.cols(), 0)};
  for (std::size_t f = 0; f < x.cols(); ++f) r.values[f] = x(0, f);
  for (std::size_t t = 1; t < x.rows(); ++t) {
    auto row = x.row(t);
    for (std::size_t f = 0; f < x.cols(); ++f) {
      if (row[f] > r.values[f]) {
        r.values[f] = row[f];
        r.argmax[f] = t;
      }
    }
  }
  return r;
}

Tensor2 max_over_time_backward(std::span<const std::size_t> argmax, std::size_t time_steps,
                               const Vector& upstream) {
  if (argmax.size() != upstream.dim()) {
    throw DimensionError("max_over_time_backward: " + std::to_string(argmax.size()) +
                         " cached positions vs upstream dim " + std::to_string(upstream.dim()));
  }
  Tensor2 out(time_steps, argmax.size());
  for (std::size_t f = 0; f < argmax.size(); ++f) {
    if (argmax[f] >= time_steps) {
      throw DimensionError("max_over_time_backward: cached argmax " + std::to_string(argmax[f]) +
                           " outside " + std::to_string(time_steps) + " steps");
    }
    out(argmax[f], f) = upstream[f];
  }
  return out;
}

Tensor2 embedding_lookup(const Tensor2& table, std::span<const int> ids) {
  Tensor2 out(ids.size(), table.cols());
  for (std::size_t t = 0; t < ids.size(); ++t) {
    const int id = ids[t];
    if (id < 0 || static_cast<std::size_t>(id) >= table.rows()) {
      throw DimensionError("embedding_lookup: id " + std::to_string(id) + " outside table " +
                           table.shape_string());
    }
    auto src = table.row(static_cast<std::size_t>(id));
    std::copy(src.begin(), src.end(), out.row(t).begin());
  }
  return out;
}

void embedding_backward(std::span<const int> ids, const Tensor2& upstream, Tensor2& table_grad) {
  if (upstream.rows() != ids.size() || upstream.cols() != table_grad.cols()) {
    throw DimensionError("embedding_backward: upstream " + upstream.shape_string() + " for " +
                         std::to_string(ids.size()) + " ids into " + table_grad.shape_string());
  }
  for (std::size_t t = 0; t < ids.size(); ++t) {
    const auto id = static_cast<std::size_t>(ids[t]);
    if (id >= table_grad.rows()) throw DimensionError("embedding_backward: id out of range");
    axpy(1.0, upstream.row(t), table_grad.row(id));
  }
}

Tensor2 pad_rows(const Tensor2& x, std::size_t before, std::size_t after) {
  Tensor2 out(x.rows() + before + after, x.cols());
  std::copy(x.flat().begin(), x.flat().end(), out.data() + before * x.cols());
  return out;
}

Tensor2 strip_rows(const Tensor2& x, std::size_t before, std::size_t after) {
  if (before + after > x.rows()) throw DimensionError("strip_rows: more rows stripped than present");
  const std::size_t rows = x.rows() - before - after;
  Tensor2 out(rows, x.cols());
  const double* src = x.data() + before * x.cols();
  std::copy(src, src + rows * x.cols(), out.data());
  return out;
}

}  // namespace convat
