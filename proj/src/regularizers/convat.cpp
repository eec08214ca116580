#include "convat/regularizers/convat.hpp"

#include <cmath>
#include <string>

#include "convat/netcore/errors.hpp"
#include "convat/netcore/kernels.hpp"
#include "convat/netcore/rng.hpp"

namespace convat::reg {
namespace {

Vector add(const Vector& a, const Vector& b) {
  if (a.dim() != b.dim()) {
    throw DimensionError("vector add: dims " + std::to_string(a.dim()) + " and " +
                         std::to_string(b.dim()));
  }
  Vector out = a;
  axpy(1.0, b.flat(), out.flat());
  return out;
}

Vector difference(const Vector& q, const Vector& p) {
  Vector out = q;
  axpy(-1.0, p.flat(), out.flat());
  return out;
}

double floored_kl(const Vector& p, const Vector& q) {
  return kl_divergence(floor_probs(p), floor_probs(q));
}

void check_context(const Vector& context, const Tensor2& w) {
  if (context.dim() != w.rows()) {
    throw DimensionError("context of dim " + std::to_string(context.dim()) +
                         " against softmax weights " + w.shape_string());
  }
}

std::vector<Vector> ce_logit_grads(std::span<const model::ForwardCache> caches,
                                   std::span<const std::size_t> labels) {
  const double inv_n = 1.0 / static_cast<double>(caches.size());
  std::vector<Vector> dlogits;
  dlogits.reserve(caches.size());
  for (std::size_t i = 0; i < caches.size(); ++i) {
    Vector g = caches[i].probs;
    g[labels[i]] -= 1.0;
    scale(g.flat(), inv_n);
    dlogits.push_back(std::move(g));
  }
  return dlogits;
}

std::vector<Vector> probs_of(std::span<const model::ForwardCache> caches) {
  std::vector<Vector> out;
  out.reserve(caches.size());
  for (const auto& c : caches) out.push_back(c.probs);
  return out;
}

void check_batch(std::span<const model::ForwardCache> caches, std::span<const std::size_t> labels) {
  if (caches.size() != labels.size()) {
    throw DimensionError("loss: " + std::to_string(caches.size()) + " caches for " +
                         std::to_string(labels.size()) + " labels");
  }
  if (caches.empty()) throw InvalidInputError("loss: empty batch");
}

}  // namespace

ClsScope parse_cls_scope(std::string_view name) {
  if (name == "full") return ClsScope::Full;
  if (name == "softmax_only") return ClsScope::SoftmaxOnly;
  throw InvalidInputError("unknown cls scope '" + std::string(name) + "'");
}

std::string_view cls_scope_name(ClsScope scope) {
  return scope == ClsScope::Full ? "full" : "softmax_only";
}

void ConvatConfig::validate() const {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw InvalidInputError("epsilon must be >= 0");
  if (!(xi > 0.0)) throw InvalidInputError("xi must be > 0");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidInputError("lambda must be >= 0");
  if (power_iters < 1) throw InvalidInputError("power_iters must be >= 1");
}

double perturbation_kl(const Vector& context, const Tensor2& softmax_weights, const Vector& r) {
  check_context(context, softmax_weights);
  const Vector p = model::predict_proba(context, softmax_weights);
  const Vector q = model::predict_proba(add(context, r), softmax_weights);
  return floored_kl(p, q);
}

Vector kl_gradient_wrt_perturbation(const Vector& context, const Tensor2& softmax_weights,
                                    const Vector& r) {
  check_context(context, softmax_weights);
  const Vector p = model::predict_proba(context, softmax_weights);
  const Vector q = model::predict_proba(add(context, r), softmax_weights);
  return mat_vec(softmax_weights, difference(q, p).flat());
}

Vector random_unit_vector(std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  Vector d(dim);
  double norm = 0.0;
  while (norm == 0.0) {
    for (double& v : d) v = rng.normal();
    norm = l2_norm(d.flat());
  }
  scale(d.flat(), 1.0 / norm);
  return d;
}

PerturbationResult contextual_perturbation(const Vector& context, const Tensor2& softmax_weights,
                                           const ConvatConfig& cfg, std::uint64_t seed) {
  return contextual_perturbation_from(context, softmax_weights, cfg,
                                      random_unit_vector(context.dim(), seed));
}

PerturbationResult contextual_perturbation_from(const Vector& context,
                                                const Tensor2& softmax_weights,
                                                const ConvatConfig& cfg, Vector d) {
  check_context(context, softmax_weights);
  cfg.validate();
  if (d.dim() != context.dim()) throw DimensionError("start direction has wrong dimension");

  const Vector p = model::predict_proba(context, softmax_weights);
  PerturbationResult res;
  for (std::size_t it = 0; it < cfg.power_iters; ++it) {
    Vector probe = context;
    axpy(cfg.xi, d.flat(), probe.flat());
    const Vector q = model::predict_proba(probe, softmax_weights);
    res.g = mat_vec(softmax_weights, difference(q, p).flat());
    const double gnorm = l2_norm(res.g.flat());
    if (!(gnorm >= kFlatGradient)) {
      res.degenerate = true;
      break;
    }
    d = res.g;
    scale(d.flat(), 1.0 / gnorm);
  }
  res.r_adv = d;
  scale(res.r_adv.flat(), cfg.epsilon);
  res.kl_at_r = floored_kl(p, model::predict_proba(add(context, res.r_adv), softmax_weights));
  return res;
}

ClsResult cls_term(const Vector& context, const Vector& r_adv, const Tensor2& softmax_weights) {
  check_context(context, softmax_weights);
  if (!all_finite(r_adv.flat())) throw NumericError("cls_term: non-finite perturbation");
  const Vector p = model::predict_proba(context, softmax_weights);
  const Vector shifted = add(context, r_adv);
  const Vector q = model::predict_proba(shifted, softmax_weights);
  const Vector delta = difference(q, p);

  ClsResult res;
  res.value = floored_kl(p, q);
  res.grad_context = mat_vec(softmax_weights, delta.flat());
  res.grad_weights = Tensor2(softmax_weights.rows(), softmax_weights.cols());
  add_outer(res.grad_weights, 1.0, shifted.flat(), delta.flat());
  return res;
}

LossResult ce_loss(const model::ModelParams& params, std::span<const model::ForwardCache> caches,
                   std::span<const std::size_t> labels) {
  check_batch(caches, labels);
  const auto probs = probs_of(caches);
  LossResult res;
  res.ce = model::cross_entropy_loss(probs, labels);
  res.total = res.ce;
  res.grads = model::backward(params, caches, ce_logit_grads(caches, labels));
  return res;
}

LossResult convat_loss(const model::ModelParams& params, std::span<const model::ForwardCache> caches,
                       std::span<const std::size_t> labels, const ConvatConfig& cfg,
                       std::uint64_t seed) {
  cfg.validate();
  if (cfg.inactive()) return ce_loss(params, caches, labels);
  check_batch(caches, labels);

  const std::size_t n = caches.size();
  const double weight = cfg.lambda / static_cast<double>(n);
  const auto probs = probs_of(caches);

  LossResult res;
  res.ce = model::cross_entropy_loss(probs, labels);
  res.grads = model::zeros_like(params);

  std::vector<Vector> dcontext_cls(n);
  double cls_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& c = caches[i].context;
    auto pert = contextual_perturbation(c, params.softmax_weights, cfg, derive_seed(seed, {i}));
    res.degenerate += pert.degenerate;
    auto cls = cls_term(c, pert.r_adv, params.softmax_weights);
    cls_sum += cls.value;
    axpy(weight, cls.grad_weights.flat(), res.grads.softmax_weights.flat());
    if (cfg.cls_scope == ClsScope::Full) {
      scale(cls.grad_context.flat(), weight);
      dcontext_cls[i] = std::move(cls.grad_context);
    }
  }
  res.cls_mean = cls_sum / static_cast<double>(n);
  res.total = res.ce + cfg.lambda * res.cls_mean;

  auto dcontext = model::softmax_layer_backward(params, caches, ce_logit_grads(caches, labels), res.grads);
  if (cfg.cls_scope == ClsScope::Full) {
    for (std::size_t i = 0; i < n; ++i) axpy(1.0, dcontext_cls[i].flat(), dcontext[i].flat());
  }
  model::encoder_backward(params, caches, dcontext, res.grads);
  return res;
}

VatPerturbation input_perturbation(const model::ModelParams& params,
                                   std::span<const model::ForwardCache> caches,
                                   const ConvatConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const std::size_t n = caches.size();
  std::vector<std::vector<int>> ids;
  ids.reserve(n);
  for (const auto& c : caches) ids.push_back(c.ids);

  std::vector<Tensor2> dirs;
  dirs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& x = caches[i].embedded;
    Vector flat = random_unit_vector(x.size(), derive_seed(seed, {i}));
    dirs.emplace_back(x.rows(), x.cols(), std::vector<double>(flat.begin(), flat.end()));
  }

  VatPerturbation out;
  std::vector<bool> flat_grad(n, false);
  model::ParamGrads scratch = model::zeros_like(params);
  for (std::size_t it = 0; it < cfg.power_iters; ++it) {
    std::vector<Tensor2> probe;
    probe.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      Tensor2 x = caches[i].embedded;
      axpy(cfg.xi, dirs[i].flat(), x.flat());
      probe.push_back(std::move(x));
    }
    auto probe_caches = model::encode_embedded(params, ids, std::move(probe));
    std::vector<Vector> dcontext;
    dcontext.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      dcontext.push_back(
          mat_vec(params.softmax_weights, difference(probe_caches[i].probs, caches[i].probs).flat()));
    }
    std::vector<Tensor2> gx;
    model::EncoderBackwardOptions opts;
    opts.param_grads = false;
    opts.embedded_grads = &gx;
    model::encoder_backward(params, probe_caches, dcontext, scratch, opts);
    for (std::size_t i = 0; i < n; ++i) {
      if (flat_grad[i]) continue;
      const double gnorm = l2_norm(gx[i].flat());
      if (!(gnorm >= kFlatGradient)) {
        flat_grad[i] = true;
        continue;
      }
      dirs[i] = std::move(gx[i]);
      scale(dirs[i].flat(), 1.0 / gnorm);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    out.degenerate += flat_grad[i];
    scale(dirs[i].flat(), cfg.epsilon);
  }
  out.r_adv = std::move(dirs);
  return out;
}

LossResult vat_loss(const model::ModelParams& params, std::span<const model::ForwardCache> caches,
                    std::span<const std::size_t> labels, const ConvatConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (cfg.inactive()) return ce_loss(params, caches, labels);
  check_batch(caches, labels);

  const std::size_t n = caches.size();
  const double weight = cfg.lambda / static_cast<double>(n);
  const auto probs = probs_of(caches);

  LossResult res;
  res.ce = model::cross_entropy_loss(probs, labels);
  res.grads = model::zeros_like(params);

  auto pert = input_perturbation(params, caches, cfg, seed);
  res.degenerate = pert.degenerate;

  std::vector<std::vector<int>> ids;
  std::vector<Tensor2> shifted;
  for (std::size_t i = 0; i < n; ++i) {
    ids.push_back(caches[i].ids);
    Tensor2 x = caches[i].embedded;
    axpy(1.0, pert.r_adv[i].flat(), x.flat());
    shifted.push_back(std::move(x));
  }
  auto adv_caches = model::encode_embedded(params, ids, std::move(shifted));

  double cls_sum = 0.0;
  std::vector<Vector> dlogits_adv;
  dlogits_adv.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    cls_sum += floored_kl(caches[i].probs, adv_caches[i].probs);
    Vector g = difference(adv_caches[i].probs, caches[i].probs);
    scale(g.flat(), weight);
    dlogits_adv.push_back(std::move(g));
  }
  res.cls_mean = cls_sum / static_cast<double>(n);
  res.total = res.ce + cfg.lambda * res.cls_mean;

  auto dctx_adv = model::softmax_layer_backward(params, adv_caches, dlogits_adv, res.grads);
  model::encoder_backward(params, adv_caches, dctx_adv, res.grads);
  auto dctx = model::softmax_layer_backward(params, caches, ce_logit_grads(caches, labels), res.grads);
  model::encoder_backward(params, caches, dctx, res.grads);
  return res;
}

}  // namespace convat::reg
