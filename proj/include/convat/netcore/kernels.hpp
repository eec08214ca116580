#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "convat/netcore/tensor.hpp"

namespace convat {

/// Probabilities are clamped below at this value before any log or KL.
inline constexpr double kProbFloor = 1e-12;

Tensor2 matmul(const Tensor2& a, const Tensor2& b);

struct MatmulGrads {
  Tensor2 da;
  Tensor2 db;
};

/// Gradients of a*b given the upstream gradient of the product.
MatmulGrads matmul_backward(const Tensor2& a, const Tensor2& b, const Tensor2& upstream);

/// Row vector times matrix: x^T W, W is (x.dim × cols).
Vector vec_mat(std::span<const double> x, const Tensor2& w);
/// Matrix times column vector: W y, W is (rows × y.dim).
Vector mat_vec(const Tensor2& w, std::span<const double> y);
/// w += alpha * x y^T
void add_outer(Tensor2& w, double alpha, std::span<const double> x, std::span<const double> y);

Vector softmax(const Vector& z);
/// Clamps every entry to at least kProbFloor.
Vector floor_probs(const Vector& p);

/// KL(p || q) with 0 ln 0 = 0. Returns +infinity when some q_k = 0 < p_k;
/// see is_divergence_overflow().
double kl_divergence(const Vector& p, const Vector& q);
bool is_divergence_overflow(double kl);

/// Fused softmax + cross-entropy gradient w.r.t. logits: softmax(z) - onehot(label).
Vector softmax_cross_entropy_backward(const Vector& logits, std::size_t label);

/// A bank of F kernels of shape h×d. Kernel f is row f of `weights`, stored as
/// the row-major flattening of its h×d window.
struct ConvParams {
  std::size_t window = 0;
  std::size_t in_dim = 0;
  Tensor2 weights;  // F × (window·in_dim)
  Vector bias;      // F

  ConvParams() = default;
  ConvParams(std::size_t window, std::size_t in_dim, std::size_t filters);
  std::size_t filters() const noexcept { return weights.rows(); }

  friend bool operator==(const ConvParams&, const ConvParams&) = default;
};

struct ConvGrads {
  Tensor2 dx;
  Tensor2 dweights;
  Vector dbias;
};

/// Valid 1-D convolution over time. x is T×d; output is (T-h+1)×F.
Tensor2 conv1d_forward(const Tensor2& x, const ConvParams& p);
/// `upstream` is (T-h+1)×F. Set want_dx/want_params false to skip either half.
ConvGrads conv1d_backward(const Tensor2& x, const ConvParams& p, const Tensor2& upstream,
                          bool want_dx = true, bool want_params = true);

Tensor2 relu_forward(const Tensor2& x);
Tensor2 relu_backward(const Tensor2& pre_activation, const Tensor2& upstream);

struct MaxPoolResult {
  Vector values;                    // F
  std::vector<std::size_t> argmax;  // F, first index wins on ties
};

MaxPoolResult max_over_time_forward(const Tensor2& x);
Tensor2 max_over_time_backward(std::span<const std::size_t> argmax, std::size_t time_steps,
                               const Vector& upstream);

/// Gathers rows of `table` for each id. Output is ids.size()×table.cols().
Tensor2 embedding_lookup(const Tensor2& table, std::span<const int> ids);
/// Scatter-adds upstream rows into table_grad at the looked-up ids.
void embedding_backward(std::span<const int> ids, const Tensor2& upstream, Tensor2& table_grad);

/// Pads `x` with `before` and `after` zero rows.
Tensor2 pad_rows(const Tensor2& x, std::size_t before, std::size_t after);
/// Inverse of pad_rows on a gradient.
Tensor2 strip_rows(const Tensor2& x, std::size_t before, std::size_t after);

}  // namespace convat
