#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "convat/model/cnn.hpp"
#include "convat/netcore/tensor.hpp"

namespace convat::reg {

/// Where the smoothing gradient flows: into W and c (and the encoder), or into W only.
enum class ClsScope { Full, SoftmaxOnly };
ClsScope parse_cls_scope(std::string_view name);
std::string_view cls_scope_name(ClsScope scope);

struct ConvatConfig {
  double epsilon = 1.0;         // perturbation radius
  double xi = 1e-6;             // probe scale
  double lambda = 1.0;          // smoothing weight
  std::size_t power_iters = 1;  // a single power-method step by default
  ClsScope cls_scope = ClsScope::Full;

  void validate() const;
  /// True when the smoothing term cannot contribute (lambda or epsilon zero).
  bool inactive() const noexcept { return lambda == 0.0 || epsilon == 0.0; }
};

/// Local gradient norms below this count as a flat KL surface.
inline constexpr double kFlatGradient = 1e-30;

struct PerturbationResult {
  Vector r_adv;
  Vector g;
  double kl_at_r = 0.0;
  bool degenerate = false;
};

/// KL[p(c) || p(c + r)] with both distributions from softmax((·)^T W), floored at 1e-12.
double perturbation_kl(const Vector& context, const Tensor2& softmax_weights, const Vector& r);

/// ∇_r KL[p(c) || p(c + r)] = W (q − p), p held fixed.
Vector kl_gradient_wrt_perturbation(const Vector& context, const Tensor2& softmax_weights,
                                    const Vector& r);

/// Seeded random unit direction of dimension `dim` (normalized Gaussian draws).
Vector random_unit_vector(std::size_t dim, std::uint64_t seed);

/// Power-method search for the KL-maximizing context perturbation of norm ε.
/// Only the softmax layer is involved; parameters are read, never written.
PerturbationResult contextual_perturbation(const Vector& context, const Tensor2& softmax_weights,
                                           const ConvatConfig& cfg, std::uint64_t seed);
/// Same with an explicit starting direction `d` (must be unit norm).
PerturbationResult contextual_perturbation_from(const Vector& context,
                                                const Tensor2& softmax_weights,
                                                const ConvatConfig& cfg, Vector d);

struct ClsResult {
  double value = 0.0;
  Vector grad_context;   // W (q − p)
  Tensor2 grad_weights;  // (c + r)(q − p)^T
};

/// KL[p(c) || p(c + r_adv)] with p(c) and r_adv treated as constants.
ClsResult cls_term(const Vector& context, const Vector& r_adv, const Tensor2& softmax_weights);

struct LossResult {
  double total = 0.0;
  double ce = 0.0;
  double cls_mean = 0.0;
  std::size_t degenerate = 0;
  model::ParamGrads grads;
};

/// Plain cross-entropy with one encoder backward.
LossResult ce_loss(const model::ModelParams& params, std::span<const model::ForwardCache> caches,
                   std::span<const std::size_t> labels);

/// CE + λ·mean CLS. The perturbation search stays at the softmax layer, so the
/// encoder is traversed forward once (by the caller) and backward once here.
/// Example i draws its start direction from derive_seed(seed, {i}).
LossResult convat_loss(const model::ModelParams& params, std::span<const model::ForwardCache> caches,
                       std::span<const std::size_t> labels, const ConvatConfig& cfg,
                       std::uint64_t seed);

struct VatPerturbation {
  std::vector<Tensor2> r_adv;  // per example, Frobenius norm ε
  std::size_t degenerate = 0;
};

/// Input-level search: perturbs the embedded matrices, needing an extra encoder
/// forward and backward per power iteration.
VatPerturbation input_perturbation(const model::ModelParams& params,
                                   std::span<const model::ForwardCache> caches,
                                   const ConvatConfig& cfg, std::uint64_t seed);

/// Input-level VAT baseline: CE + λ·mean KL[p(X) || p(X + r_adv)].
LossResult vat_loss(const model::ModelParams& params, std::span<const model::ForwardCache> caches,
                    std::span<const std::size_t> labels, const ConvatConfig& cfg, std::uint64_t seed);

}  // namespace convat::reg
