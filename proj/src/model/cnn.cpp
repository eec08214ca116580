#include "convat/model/cnn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "convat/netcore/errors.hpp"
#include "convat/netcore/rng.hpp"

namespace convat::model {
namespace {

constexpr int kCheckpointVersion = 1;

void glorot_fill(Tensor2& w, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : w.flat()) v = rng.uniform(-a, a);
}

void zero_pad_row(Tensor2& table) {
  if (table.rows() == 0) return;
  auto r = table.row(textdata::kPadId);
  std::fill(r.begin(), r.end(), 0.0);
}

template <typename Tensors, typename Span>
std::vector<Span> collect_views(Tensors& p) {
  std::vector<Span> out;
  out.emplace_back(p.embeddings.flat());
  for (auto& bank : p.banks) {
    out.emplace_back(bank.first.weights.flat());
    out.emplace_back(bank.first.bias.flat());
    for (auto& layer : bank.extra) {
      out.emplace_back(layer.weights.flat());
      out.emplace_back(layer.bias.flat());
    }
  }
  out.emplace_back(p.softmax_weights.flat());
  return out;
}

ForwardCache forward_one(const ModelParams& params, std::vector<int> ids, Tensor2 embedded) {
  ForwardCache cache;
  cache.ids = std::move(ids);
  cache.embedded = std::move(embedded);
  cache.version = params.version;
  cache.context = Vector(params.context_dim());
  cache.banks.resize(params.banks.size());

  std::size_t offset = 0;
  for (std::size_t b = 0; b < params.banks.size(); ++b) {
    const auto& bank = params.banks[b];
    auto& bc = cache.banks[b];
    const std::size_t layers = 1 + bank.extra.size();
    bc.inputs.resize(layers);
    bc.pre.resize(layers);

    bc.pre[0] = conv1d_forward(cache.embedded, bank.first);
    Tensor2 act = relu_forward(bc.pre[0]);
    for (std::size_t l = 1; l < layers; ++l) {
      bc.inputs[l] = pad_rows(act, 1, 1);
      bc.pre[l] = conv1d_forward(bc.inputs[l], bank.extra[l - 1]);
      act = relu_forward(bc.pre[l]);
    }
    auto pooled = max_over_time_forward(act);
    bc.argmax = std::move(pooled.argmax);
    std::copy(pooled.values.begin(), pooled.values.end(), cache.context.begin() + offset);
    offset += pooled.values.dim();
  }

  cache.logits = vec_mat(cache.context.flat(), params.softmax_weights);
  cache.probs = softmax(cache.logits);
  return cache;
}

std::vector<int> padded_ids(const std::vector<int>& ids, std::size_t min_length) {
  std::vector<int> out = ids;
  if (out.size() < min_length) out.resize(min_length, textdata::kPadId);
  return out;
}

void check_cache(const ModelParams& params, const ForwardCache& cache) {
  if (cache.version != params.version) {
    throw ContractViolation("forward cache from parameter version " +
                            std::to_string(cache.version) + " used with version " +
                            std::to_string(params.version));
  }
  if (cache.banks.size() != params.banks.size() || cache.context.dim() != params.context_dim()) {
    throw DimensionError("forward cache does not match model structure");
  }
}

void write_tensor(std::ostream& out, std::span<const double> data, std::size_t rows,
                  std::size_t cols) {
  out << rows << ' ' << cols << '\n';
  char buf[40];
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", data[r * cols + c]);
      out << (c ? " " : "") << buf;
    }
    out << '\n';
  }
}

void read_tensor(std::istream& in, std::span<double> data, std::size_t rows, std::size_t cols,
                 const std::string& path) {
  std::size_t r = 0, c = 0;
  if (!(in >> r >> c) || r != rows || c != cols) {
    throw FormatError(path + ": tensor shape mismatch, expected (" + std::to_string(rows) + "x" +
                      std::to_string(cols) + ")");
  }
  std::string tok;
  for (double& v : data) {
    if (!(in >> tok)) throw FormatError(path + ": truncated tensor data");
    char* end = nullptr;
    v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size()) throw FormatError(path + ": bad number '" + tok + "'");
  }
}

}  // namespace

std::size_t ParamTensors::max_window() const noexcept {
  std::size_t h = 0;
  for (const auto& b : banks) h = std::max(h, b.first.window);
  return h;
}

std::size_t ParamTensors::parameter_count() const noexcept {
  std::size_t n = 0;
  for (auto v : tensor_views(*this)) n += v.size();
  return n;
}

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed,
                        const std::optional<textdata::EmbeddingTable>& pretrained) {
  if (cfg.num_classes < 2) throw InvalidInputError("model needs at least 2 classes");
  if (cfg.windows.empty() || cfg.filters == 0) throw InvalidInputError("model needs conv filters");
  if (cfg.vocab_size < 2) throw InvalidInputError("vocabulary must hold PAD and UNK");

  ModelParams p;
  if (pretrained) {
    if (pretrained->weights.rows() != cfg.vocab_size) {
      throw DimensionError("pretrained table has " + std::to_string(pretrained->weights.rows()) +
                           " rows for vocabulary of " + std::to_string(cfg.vocab_size));
    }
    p.embeddings = pretrained->weights;
  } else {
    p.embeddings = textdata::random_embeddings(cfg.vocab_size, cfg.embed_dim,
                                               derive_seed(seed, {1})).weights;
  }
  zero_pad_row(p.embeddings);
  const std::size_t d = p.embeddings.cols();

  Rng rng(derive_seed(seed, {2}));
  for (std::size_t h : cfg.windows) {
    if (h == 0) throw InvalidInputError("conv window must be >= 1");
    ConvBank bank;
    bank.first = ConvParams(h, d, cfg.filters);
    glorot_fill(bank.first.weights, h * d, cfg.filters, rng);
    for (std::size_t l = 0; l < cfg.depth; ++l) {
      ConvParams layer(kExtraBlockWindow, cfg.filters, cfg.filters);
      glorot_fill(layer.weights, kExtraBlockWindow * cfg.filters, cfg.filters, rng);
      bank.extra.push_back(std::move(layer));
    }
    p.banks.push_back(std::move(bank));
  }
  const std::size_t v = cfg.filters * cfg.windows.size();
  p.softmax_weights = Tensor2(v, cfg.num_classes);
  glorot_fill(p.softmax_weights, v, cfg.num_classes, rng);
  return p;
}

ParamGrads zeros_like(const ParamTensors& p) {
  ParamGrads g;
  g.embeddings = Tensor2(p.embeddings.rows(), p.embeddings.cols());
  for (const auto& bank : p.banks) {
    ConvBank gb;
    gb.first = ConvParams(bank.first.window, bank.first.in_dim, bank.first.filters());
    for (const auto& layer : bank.extra) gb.extra.emplace_back(layer.window, layer.in_dim, layer.filters());
    g.banks.push_back(std::move(gb));
  }
  g.softmax_weights = Tensor2(p.softmax_weights.rows(), p.softmax_weights.cols());
  return g;
}

std::vector<std::span<double>> tensor_views(ParamTensors& p) {
  return collect_views<ParamTensors, std::span<double>>(p);
}

std::vector<std::span<const double>> tensor_views(const ParamTensors& p) {
  return collect_views<const ParamTensors, std::span<const double>>(p);
}

std::vector<double> flatten(const ParamTensors& p) {
  std::vector<double> out;
  out.reserve(p.parameter_count());
  for (auto v : tensor_views(p)) out.insert(out.end(), v.begin(), v.end());
  return out;
}

void unflatten(std::span<const double> flat, ParamTensors& p) {
  if (flat.size() != p.parameter_count()) {
    throw DimensionError("unflatten: " + std::to_string(flat.size()) + " values for " +
                         std::to_string(p.parameter_count()) + " parameters");
  }
  std::size_t pos = 0;
  for (auto v : tensor_views(p)) {
    std::copy(flat.begin() + pos, flat.begin() + pos + v.size(), v.begin());
    pos += v.size();
  }
}

std::uint64_t parameter_hash(const ParamTensors& p) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto v : tensor_views(p)) {
    for (double x : v) {
      std::uint64_t bits = 0;
      std::memcpy(&bits, &x, sizeof bits);
      for (int i = 0; i < 8; ++i) {
        h ^= (bits >> (8 * i)) & 0xFF;
        h *= 0x100000001b3ULL;
      }
    }
  }
  return h;
}

EncoderCounters& counters() noexcept {
  thread_local EncoderCounters c;
  return c;
}

std::vector<ForwardCache> encode(const ModelParams& params, const textdata::Batch& batch) {
  std::vector<Tensor2> embedded;
  embedded.reserve(batch.size());
  for (const auto& ids : batch.token_ids) embedded.push_back(embedding_lookup(params.embeddings, ids));
  return encode_embedded(params, batch.token_ids, std::move(embedded));
}

std::vector<ForwardCache> encode_embedded(const ModelParams& params,
                                          const std::vector<std::vector<int>>& ids,
                                          std::vector<Tensor2> embedded) {
  if (ids.size() != embedded.size()) {
    throw DimensionError("encode_embedded: " + std::to_string(ids.size()) + " id lists for " +
                         std::to_string(embedded.size()) + " inputs");
  }
  ++counters().forward_passes;
  std::vector<ForwardCache> caches;
  caches.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    caches.push_back(forward_one(params, ids[i], std::move(embedded[i])));
  }
  return caches;
}

Vector predict_proba(const Vector& context, const Tensor2& softmax_weights) {
  return softmax(vec_mat(context.flat(), softmax_weights));
}

double cross_entropy_loss(std::span<const Vector> probs, std::span<const std::size_t> labels) {
  if (probs.size() != labels.size()) {
    throw DimensionError("cross_entropy_loss: " + std::to_string(probs.size()) +
                         " distributions for " + std::to_string(labels.size()) + " labels");
  }
  if (probs.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (labels[i] >= probs[i].dim()) {
      throw DimensionError("cross_entropy_loss: label " + std::to_string(labels[i]) +
                           " out of range");
    }
    total -= std::log(std::max(probs[i][labels[i]], kProbFloor));
  }
  return total / static_cast<double>(probs.size());
}

std::vector<Vector> softmax_layer_backward(const ModelParams& params,
                                           std::span<const ForwardCache> caches,
                                           std::span<const Vector> dlogits, ParamGrads& grads) {
  if (caches.size() != dlogits.size()) {
    throw DimensionError("softmax_layer_backward: cache/gradient count mismatch");
  }
  std::vector<Vector> dcontext;
  dcontext.reserve(caches.size());
  for (std::size_t i = 0; i < caches.size(); ++i) {
    check_cache(params, caches[i]);
    if (dlogits[i].dim() != params.num_classes()) {
      throw DimensionError("softmax_layer_backward: logit gradient of dim " +
                           std::to_string(dlogits[i].dim()));
    }
    add_outer(grads.softmax_weights, 1.0, caches[i].context.flat(), dlogits[i].flat());
    dcontext.push_back(mat_vec(params.softmax_weights, dlogits[i].flat()));
  }
  return dcontext;
}

void encoder_backward(const ModelParams& params, std::span<const ForwardCache> caches,
                      std::span<const Vector> dcontext, ParamGrads& grads,
                      const EncoderBackwardOptions& options) {
  if (caches.size() != dcontext.size()) {
    throw DimensionError("encoder_backward: cache/gradient count mismatch");
  }
  ++counters().backward_passes;
  if (options.embedded_grads) options.embedded_grads->clear();

  for (std::size_t i = 0; i < caches.size(); ++i) {
    const auto& cache = caches[i];
    check_cache(params, cache);
    if (dcontext[i].dim() != params.context_dim()) {
      throw DimensionError("encoder_backward: context gradient of dim " +
                           std::to_string(dcontext[i].dim()));
    }
    Tensor2 dx(cache.embedded.rows(), cache.embedded.cols());
    std::size_t offset = 0;
    for (std::size_t b = 0; b < params.banks.size(); ++b) {
      const auto& bank = params.banks[b];
      const auto& bc = cache.banks[b];
      auto& gb = grads.banks[b];
      const std::size_t filters = bank.first.filters();
      const std::size_t layers = bc.pre.size();

      Vector dpooled(filters);
      std::copy(dcontext[i].begin() + offset, dcontext[i].begin() + offset + filters, dpooled.begin());
      offset += filters;

      Tensor2 dact = max_over_time_backward(bc.argmax, bc.pre.back().rows(), dpooled);
      for (std::size_t l = layers; l-- > 1;) {
        Tensor2 dpre = relu_backward(bc.pre[l], dact);
        const auto& layer = bank.extra[l - 1];
        auto g = conv1d_backward(bc.inputs[l], layer, dpre, true, options.param_grads);
        if (options.param_grads) {
          axpy(1.0, g.dweights.flat(), gb.extra[l - 1].weights.flat());
          axpy(1.0, g.dbias.flat(), gb.extra[l - 1].bias.flat());
        }
        dact = strip_rows(g.dx, 1, 1);
      }
      Tensor2 dpre = relu_backward(bc.pre[0], dact);
      auto g = conv1d_backward(cache.embedded, bank.first, dpre, true, options.param_grads);
      if (options.param_grads) {
        axpy(1.0, g.dweights.flat(), gb.first.weights.flat());
        axpy(1.0, g.dbias.flat(), gb.first.bias.flat());
      }
      axpy(1.0, g.dx.flat(), dx.flat());
    }

    if (options.embedded_grads) {
      options.embedded_grads->push_back(std::move(dx));
    } else if (options.param_grads) {
      embedding_backward(cache.ids, dx, grads.embeddings);
    }
  }
  zero_pad_row(grads.embeddings);
}

ParamGrads backward(const ModelParams& params, std::span<const ForwardCache> caches,
                    std::span<const Vector> dlogits) {
  ParamGrads grads = zeros_like(params);
  auto dcontext = softmax_layer_backward(params, caches, dlogits, grads);
  encoder_backward(params, caches, dcontext, grads);
  return grads;
}

std::size_t argmax(const Vector& v) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < v.dim(); ++k) {
    if (v[k] > v[best]) best = k;
  }
  return best;
}

std::vector<std::size_t> predict(const ModelParams& params, const textdata::LabeledCorpus& corpus) {
  std::vector<std::size_t> out;
  out.reserve(corpus.size());
  for (const auto& ex : corpus.examples) {
    auto ids = padded_ids(ex.token_ids, params.max_window());
    auto cache = forward_one(params, ids, embedding_lookup(params.embeddings, ids));
    out.push_back(argmax(cache.logits));
  }
  return out;
}

double accuracy(const ModelParams& params, const textdata::LabeledCorpus& corpus) {
  if (corpus.size() == 0) return 0.0;
  auto preds = predict(params, corpus);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hits += preds[i] == corpus.examples[i].label;
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

void save_checkpoint(const ModelParams& params, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint " + path);
  out << kCheckpointVersion << ' ' << params.embed_dim() << ' ' << params.context_dim() << ' '
      << params.num_classes() << '\n';
  out << params.embeddings.rows() << ' ' << params.depth() << ' ' << params.banks.size() << '\n';
  for (const auto& bank : params.banks) out << bank.first.window << ' ' << bank.first.filters() << '\n';
  write_tensor(out, params.embeddings.flat(), params.embeddings.rows(), params.embeddings.cols());
  for (const auto& bank : params.banks) {
    write_tensor(out, bank.first.weights.flat(), bank.first.weights.rows(), bank.first.weights.cols());
    write_tensor(out, bank.first.bias.flat(), 1, bank.first.bias.dim());
    for (const auto& layer : bank.extra) {
      write_tensor(out, layer.weights.flat(), layer.weights.rows(), layer.weights.cols());
      write_tensor(out, layer.bias.flat(), 1, layer.bias.dim());
    }
  }
  write_tensor(out, params.softmax_weights.flat(), params.softmax_weights.rows(),
               params.softmax_weights.cols());
  if (!out) throw DataError("failed writing checkpoint " + path);
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint " + path);
  int version = 0;
  std::size_t d = 0, v = 0, k = 0, vocab = 0, depth = 0, nbanks = 0;
  if (!(in >> version >> d >> v >> k)) throw FormatError(path + ": bad checkpoint header");
  if (version != kCheckpointVersion) {
    throw FormatError(path + ": unsupported checkpoint version " + std::to_string(version));
  }
  if (!(in >> vocab >> depth >> nbanks) || nbanks == 0) throw FormatError(path + ": bad structure line");

  ModelConfig cfg;
  cfg.vocab_size = vocab;
  cfg.embed_dim = d;
  cfg.depth = depth;
  cfg.num_classes = k;
  cfg.windows.clear();
  std::size_t filters = 0;
  for (std::size_t b = 0; b < nbanks; ++b) {
    std::size_t h = 0, f = 0;
    if (!(in >> h >> f)) throw FormatError(path + ": bad bank line");
    if (filters != 0 && f != filters) throw FormatError(path + ": banks disagree on filter count");
    filters = f;
    cfg.windows.push_back(h);
  }
  cfg.filters = filters;
  if (filters * nbanks != v) throw FormatError(path + ": context dimension does not match banks");

  ModelParams p = init_params(cfg, 0);
  read_tensor(in, p.embeddings.flat(), p.embeddings.rows(), p.embeddings.cols(), path);
  for (auto& bank : p.banks) {
    read_tensor(in, bank.first.weights.flat(), bank.first.weights.rows(), bank.first.weights.cols(), path);
    read_tensor(in, bank.first.bias.flat(), 1, bank.first.bias.dim(), path);
    for (auto& layer : bank.extra) {
      read_tensor(in, layer.weights.flat(), layer.weights.rows(), layer.weights.cols(), path);
      read_tensor(in, layer.bias.flat(), 1, layer.bias.dim(), path);
    }
  }
  read_tensor(in, p.softmax_weights.flat(), p.softmax_weights.rows(), p.softmax_weights.cols(), path);
  return p;
}

void export_context_csv(const ModelParams& params, const textdata::LabeledCorpus& corpus,
                        const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write context vectors to " + path);
  out << "example_id,label";
  for (std::size_t j = 1; j <= params.context_dim(); ++j) out << ",c_" << j;
  out << '\n';
  char buf[40];
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& ex = corpus.examples[i];
    auto ids = padded_ids(ex.token_ids, params.max_window());
    auto cache = forward_one(params, ids, embedding_lookup(params.embeddings, ids));
    out << i << ',' << ex.label;
    for (double c : cache.context) {
      std::snprintf(buf, sizeof buf, "%.17g", c);
      out << ',' << buf;
    }
    out << '\n';
  }
}

}  // namespace convat::model
