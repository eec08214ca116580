#include <doctest.h>

#include <chrono>
#include <cmath>

#include "../support/oracles.hpp"
#include "convat/model/cnn.hpp"
#include "convat/netcore/errors.hpp"
#include "convat/netcore/rng.hpp"
#include "convat/regularizers/convat.hpp"

using namespace convat;
using namespace convat::reg;

namespace {

std::vector<double> as_std(const Vector& v) { return {v.flat().begin(), v.flat().end()}; }
std::vector<double> as_std(const Tensor2& t) { return {t.flat().begin(), t.flat().end()}; }

Vector random_vector(Rng& rng, std::size_t n, double scale) {
  Vector v(n);
  for (double& x : v.flat()) x = rng.uniform(-scale, scale);
  return v;
}

Tensor2 random_matrix(Rng& rng, std::size_t r, std::size_t c, double scale) {
  Tensor2 t(r, c);
  for (double& x : t.flat()) x = rng.uniform(-scale, scale);
  return t;
}

// KL[p0 || softmax((c + r)^T W)] with p0 held fixed.
double detached_kl(const std::vector<double>& p0, const std::vector<double>& c, const std::vector<double>& r,
                   const std::vector<double>& w, std::size_t k) {
  std::vector<double> cr(c.size());
  for (std::size_t j = 0; j < c.size(); ++j) cr[j] = c[j] + r[j];
  const auto q = oracle::softmax(oracle::logits(cr, w, k));
  double s = 0.0;
  for (std::size_t t = 0; t < k; ++t) s += p0[t] * (std::log(p0[t]) - std::log(q[t]));
  return s;
}

struct Setup {
  model::ModelParams params;
  textdata::Batch batch;
};

Setup make_setup(std::uint64_t seed, std::size_t depth) {
  model::ModelConfig cfg;
  cfg.vocab_size = 30;
  cfg.embed_dim = 16;
  cfg.windows = {3, 4, 5};
  cfg.filters = 16;
  cfg.depth = depth;
  cfg.num_classes = 4;
  Setup s{model::init_params(cfg, seed), {}};
  Rng rng(seed);
  s.batch.length = 20;
  for (std::size_t i = 0; i < 16; ++i) {
    std::vector<int> ids;
    for (std::size_t t = 0; t < s.batch.length; ++t) ids.push_back(1 + static_cast<int>(rng.below(29)));
    s.batch.token_ids.push_back(ids);
    s.batch.labels.push_back(rng.below(4));
    s.batch.example_indices.push_back(i);
  }
  return s;
}

}  // namespace

TEST_CASE("config validation and names") {
  ConvatConfig cfg;
  CHECK(cfg.lambda == 1.0);
  CHECK(cfg.xi == 1e-6);
  CHECK(cfg.power_iters == 1);
  cfg.validate();
  cfg.epsilon = -1.0;
  CHECK_THROWS(cfg.validate());
  CHECK(parse_cls_scope("softmax_only") == ClsScope::SoftmaxOnly);
  CHECK(cls_scope_name(ClsScope::Full) == "full");
  CHECK_THROWS(parse_cls_scope("encoder"));
}

TEST_CASE("perturbation has norm epsilon and KL is non-negative") {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t v = 2 + rng.below(20), k = 2 + rng.below(6);
    ConvatConfig cfg;
    cfg.epsilon = rng.uniform(0.01, 5.0);
    cfg.power_iters = 1 + rng.below(3);
    const auto res = contextual_perturbation(random_vector(rng, v, 2.0), random_matrix(rng, v, k, 1.0), cfg,
                                             static_cast<std::uint64_t>(trial));
    CHECK(std::abs(oracle::norm2(as_std(res.r_adv)) - cfg.epsilon) <= 1e-9);
    CHECK(res.kl_at_r >= 0.0);
  }
}

TEST_CASE("closed-form g matches finite differences on a 2x2 problem") {
  const Tensor2 w{{1.0, 0.0}, {0.0, 1.0}};
  const std::vector<double> wf = as_std(w), c = {0.0, 0.0};
  for (const std::vector<double>& r : {std::vector<double>{0.3, -0.2}, std::vector<double>{-1.0, 0.5},
                                       std::vector<double>{1e-3, 2e-3}}) {
    const auto g = kl_gradient_wrt_perturbation(Vector(c), w, Vector(r));
    const auto fd = oracle::context_kl_grad_fd(c, wf, 2, r, 1e-5);
    CHECK(oracle::rel_error(as_std(g), fd) <= 1e-5);
    CHECK(perturbation_kl(Vector(c), w, Vector(r)) == doctest::Approx(oracle::context_kl(c, wf, 2, r)));
  }
}

TEST_CASE("direction does not depend on epsilon") {
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const auto c = random_vector(rng, 6, 1.0);
    const auto w = random_matrix(rng, 6, 3, 1.0);
    ConvatConfig a, b;
    a.epsilon = 0.5;
    b.epsilon = 2.5;
    const auto ra = contextual_perturbation(c, w, a, 40 + trial).r_adv;
    const auto rb = contextual_perturbation(c, w, b, 40 + trial).r_adv;
    for (std::size_t j = 0; j < 6; ++j) CHECK(std::abs(ra[j] / 0.5 - rb[j] / 2.5) <= 1e-12);
  }
}

TEST_CASE("flat KL surface falls back to the start direction") {
  ConvatConfig cfg;
  cfg.epsilon = 1.5;
  const Tensor2 zero(4, 3);
  const auto d = random_unit_vector(4, 8);
  const auto res = contextual_perturbation_from(Vector{1, 2, 3, 4}, zero, cfg, d);
  CHECK(res.degenerate);
  for (std::size_t j = 0; j < 4; ++j) CHECK(res.r_adv[j] == doctest::Approx(1.5 * d[j]).epsilon(1e-14));
  CHECK(std::abs(oracle::norm2(as_std(random_unit_vector(9, 3))) - 1.0) <= 1e-12);
}

TEST_CASE("the power step is more adversarial than its random start") {
  Rng rng(5);
  std::size_t wins = 0;
  const std::size_t draws = 200;
  for (std::size_t i = 0; i < draws; ++i) {
    const std::size_t v = 3 + rng.below(12), k = 2 + rng.below(5);
    const auto c = random_vector(rng, v, 1.5);
    const auto w = random_matrix(rng, v, k, 1.5);
    ConvatConfig cfg;
    cfg.epsilon = rng.uniform(0.1, 2.0);
    const auto d = random_unit_vector(v, 1000 + i);
    const auto res = contextual_perturbation_from(c, w, cfg, d);
    Vector rd = d;
    for (double& x : rd.flat()) x *= cfg.epsilon;
    wins += perturbation_kl(c, w, res.r_adv) >= perturbation_kl(c, w, rd);
  }
  CHECK(static_cast<double>(wins) / draws >= 0.90);
}

TEST_CASE("cls_term examples and gradients") {
  Rng rng(6);
  const auto c = random_vector(rng, 5, 1.0);
  const auto w = random_matrix(rng, 5, 3, 1.0);
  const auto none = cls_term(c, Vector(5), w);
  CHECK(none.value == 0.0);
  for (double g : none.grad_context.flat()) CHECK(g == 0.0);
  for (double g : none.grad_weights.flat()) CHECK(g == 0.0);

  for (int trial = 0; trial < 20; ++trial) {
    const auto cc = random_vector(rng, 5, 1.0);
    const auto ww = random_matrix(rng, 5, 3, 1.0);
    const auto r = random_vector(rng, 5, 0.5);
    const auto res = cls_term(cc, r, ww);
    CHECK(res.value >= 0.0);

    const auto p0 = oracle::softmax(oracle::logits(as_std(cc), as_std(ww), 3));
    const auto cs = as_std(cc), rs = as_std(r), ws = as_std(ww);
    CHECK(res.value == doctest::Approx(detached_kl(p0, cs, rs, ws, 3)).epsilon(1e-10));

    const double h = 1e-5;
    std::vector<double> fd_c(5), fd_w(ws.size());
    for (std::size_t j = 0; j < 5; ++j) {
      auto a = cs, b = cs;
      a[j] += h;
      b[j] -= h;
      fd_c[j] = (detached_kl(p0, a, rs, ws, 3) - detached_kl(p0, b, rs, ws, 3)) / (2 * h);
    }
    for (std::size_t j = 0; j < ws.size(); ++j) {
      auto a = ws, b = ws;
      a[j] += h;
      b[j] -= h;
      fd_w[j] = (detached_kl(p0, cs, rs, a, 3) - detached_kl(p0, cs, rs, b, 3)) / (2 * h);
    }
    for (std::size_t j = 0; j < 5; ++j) CHECK(std::abs(res.grad_context[j] - fd_c[j]) / std::max(1.0, std::abs(res.grad_context[j]) + std::abs(fd_c[j])) <= 1e-4);
    const auto gw = as_std(res.grad_weights);
    for (std::size_t j = 0; j < gw.size(); ++j) CHECK(std::abs(gw[j] - fd_w[j]) / std::max(1.0, std::abs(gw[j]) + std::abs(fd_w[j])) <= 1e-4);
  }
}

TEST_CASE("convat_loss combines CE and the smoothing term") {
  auto s = make_setup(2, 0);
  const auto caches = model::encode(s.params, s.batch);
  const auto ce = ce_loss(s.params, caches, s.batch.labels);

  ConvatConfig off;
  off.lambda = 0.0;
  const auto same = convat_loss(s.params, caches, s.batch.labels, off, 9);
  CHECK(same.total == ce.total);
  CHECK(model::flatten(same.grads) == model::flatten(ce.grads));

  ConvatConfig on;
  on.lambda = 0.7;
  on.epsilon = 1.3;
  const auto res = convat_loss(s.params, caches, s.batch.labels, on, 9);
  CHECK(res.ce == doctest::Approx(ce.total).epsilon(1e-14));
  CHECK(res.total == doctest::Approx(res.ce + 0.7 * res.cls_mean).epsilon(1e-14));
  CHECK(res.cls_mean > 0.0);

  // softmax_only scope leaves the encoder gradient equal to CE's
  on.cls_scope = ClsScope::SoftmaxOnly;
  const auto sm = convat_loss(s.params, caches, s.batch.labels, on, 9);
  CHECK(sm.grads.banks == ce.grads.banks);
  CHECK(sm.grads.embeddings == ce.grads.embeddings);
  CHECK_FALSE(sm.grads.softmax_weights == ce.grads.softmax_weights);
}

TEST_CASE("vat_loss: perturbation norm and the degenerate case") {
  auto s = make_setup(3, 1);
  const auto caches = model::encode(s.params, s.batch);
  ConvatConfig cfg;
  cfg.epsilon = 0.8;
  const auto pert = input_perturbation(s.params, caches, cfg, 5);
  REQUIRE(pert.r_adv.size() == s.batch.size());
  for (const auto& r : pert.r_adv) CHECK(std::abs(oracle::norm2(as_std(r)) - 0.8) <= 1e-9);

  cfg.lambda = 0.0;
  const auto ce = ce_loss(s.params, caches, s.batch.labels);
  const auto vat = vat_loss(s.params, caches, s.batch.labels, cfg, 5);
  CHECK(vat.total == ce.total);
  CHECK(model::flatten(vat.grads) == model::flatten(ce.grads));
}

TEST_CASE("perturbation search never writes parameters") {
  auto s = make_setup(4, 1);
  const auto before = model::parameter_hash(s.params);
  const auto caches = model::encode(s.params, s.batch);
  ConvatConfig cfg;
  cfg.power_iters = 2;
  for (const auto& cache : caches) contextual_perturbation(cache.context, s.params.softmax_weights, cfg, 1);
  convat_loss(s.params, caches, s.batch.labels, cfg, 1);
  input_perturbation(s.params, caches, cfg, 1);
  vat_loss(s.params, caches, s.batch.labels, cfg, 1);
  CHECK(model::parameter_hash(s.params) == before);
}

TEST_CASE("encoder traversal counts: convat matches CE, VAT needs more") {
  auto s = make_setup(5, 2);
  const auto caches = model::encode(s.params, s.batch);
  ConvatConfig cfg;

  auto delta = [&](auto&& fn) {
    const auto before = model::counters();
    fn();
    const auto after = model::counters();
    return std::pair{after.forward_passes - before.forward_passes, after.backward_passes - before.backward_passes};
  };
  const auto ce = delta([&] { ce_loss(s.params, caches, s.batch.labels); });
  const auto cv = delta([&] { convat_loss(s.params, caches, s.batch.labels, cfg, 2); });
  const auto vt = delta([&] { vat_loss(s.params, caches, s.batch.labels, cfg, 2); });
  CHECK(ce == std::pair<std::uint64_t, std::uint64_t>{0, 1});
  CHECK(cv == ce);
  CHECK(vt.first + vt.second >= ce.first + ce.second + 2);
}

TEST_CASE("a VAT step costs more wall-clock than a convat step at depth 3") {
  auto s = make_setup(6, 3);
  ConvatConfig cfg;
  using clock = std::chrono::steady_clock;
  auto time_steps = [&](bool vat) {
    const auto t0 = clock::now();
    for (int i = 0; i < 5; ++i) {
      const auto caches = model::encode(s.params, s.batch);
      if (vat) {
        vat_loss(s.params, caches, s.batch.labels, cfg, i);
      } else {
        convat_loss(s.params, caches, s.batch.labels, cfg, i);
      }
    }
    return std::chrono::duration<double>(clock::now() - t0).count();
  };
  time_steps(false);  // warm-up
  CHECK(time_steps(true) > time_steps(false));
}
