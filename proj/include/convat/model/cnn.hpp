#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "convat/netcore/kernels.hpp"
#include "convat/netcore/tensor.hpp"
#include "convat/textdata/batching.hpp"

namespace convat::model {

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 50;
  std::vector<std::size_t> windows{3, 4, 5};
  std::size_t filters = 100;  // per window size
  /// Extra conv(window 3, same padding)+ReLU blocks stacked on every bank.
  std::size_t depth = 0;
  std::size_t num_classes = 2;
};

inline constexpr std::size_t kExtraBlockWindow = 3;

/// One window size: the input convolution plus `depth` F→F blocks.
struct ConvBank {
  ConvParams first;
  std::vector<ConvParams> extra;

  friend bool operator==(const ConvBank&, const ConvBank&) = default;
};

/// Shape shared by parameters and their gradients.
struct ParamTensors {
  Tensor2 embeddings;        // |V| × d
  std::vector<ConvBank> banks;
  Tensor2 softmax_weights;   // v × K, no bias

  std::size_t embed_dim() const noexcept { return embeddings.cols(); }
  std::size_t context_dim() const noexcept { return softmax_weights.rows(); }
  std::size_t num_classes() const noexcept { return softmax_weights.cols(); }
  std::size_t depth() const noexcept { return banks.empty() ? 0 : banks.front().extra.size(); }
  std::size_t max_window() const noexcept;
  std::size_t parameter_count() const noexcept;

  friend bool operator==(const ParamTensors&, const ParamTensors&) = default;
};

struct ModelParams : ParamTensors {
  /// Bumped on every in-place update; forward caches remember the value they saw.
  std::uint64_t version = 0;
};

struct ParamGrads : ParamTensors {};

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed,
                        const std::optional<textdata::EmbeddingTable>& pretrained = std::nullopt);
ParamGrads zeros_like(const ParamTensors& p);

/// Every tensor of `p` as a flat span, in a fixed order.
std::vector<std::span<double>> tensor_views(ParamTensors& p);
std::vector<std::span<const double>> tensor_views(const ParamTensors& p);

std::vector<double> flatten(const ParamTensors& p);
void unflatten(std::span<const double> flat, ParamTensors& p);
/// Order-sensitive FNV-1a hash over the raw bytes of every parameter.
std::uint64_t parameter_hash(const ParamTensors& p);

struct BankCache {
  std::vector<Tensor2> inputs;  // inputs[0] unused (embedded); inputs[l] is padded act of layer l-1
  std::vector<Tensor2> pre;     // pre-activation of each layer
  std::vector<std::size_t> argmax;
};

struct ForwardCache {
  std::vector<int> ids;
  Tensor2 embedded;
  std::vector<BankCache> banks;
  Vector context;
  Vector logits;
  Vector probs;
  std::uint64_t version = 0;
};

/// Encoder traversal counters for the calling thread.
struct EncoderCounters {
  std::uint64_t forward_passes = 0;   // batch-level encoder forwards
  std::uint64_t backward_passes = 0;  // batch-level encoder backwards
};
EncoderCounters& counters() noexcept;

/// Embedding lookup → per-bank conv/ReLU stack → max-over-time → concatenated c,
/// then logits c^T W and probabilities.
std::vector<ForwardCache> encode(const ModelParams& params, const textdata::Batch& batch);

/// Same encoder starting from embedded matrices (used to perturb inputs).
std::vector<ForwardCache> encode_embedded(const ModelParams& params,
                                          const std::vector<std::vector<int>>& ids,
                                          std::vector<Tensor2> embedded);

/// softmax(c^T W).
Vector predict_proba(const Vector& context, const Tensor2& softmax_weights);

/// -(1/N) Σ log max(p_i[y_i], 1e-12).
double cross_entropy_loss(std::span<const Vector> probs, std::span<const std::size_t> labels);

/// Adds c dz^T into grads.softmax_weights for each example; returns dL/dc = W dz.
std::vector<Vector> softmax_layer_backward(const ModelParams& params,
                                           std::span<const ForwardCache> caches,
                                           std::span<const Vector> dlogits, ParamGrads& grads);

struct EncoderBackwardOptions {
  bool param_grads = true;
  /// When set, receives dL/dX for every example instead of scattering into embeddings.
  std::vector<Tensor2>* embedded_grads = nullptr;
};

/// Back-propagates dL/dc through the conv stacks (and embeddings).
void encoder_backward(const ModelParams& params, std::span<const ForwardCache> caches,
                      std::span<const Vector> dcontext, ParamGrads& grads,
                      const EncoderBackwardOptions& options = {});

/// Softmax layer plus encoder backward from logit gradients.
ParamGrads backward(const ModelParams& params, std::span<const ForwardCache> caches,
                    std::span<const Vector> dlogits);

/// Argmax with ties to the lowest class index.
std::size_t argmax(const Vector& v);

/// Class predictions in corpus order. Each example is padded on its own to the
/// largest window, so predictions do not depend on batch composition.
std::vector<std::size_t> predict(const ModelParams& params, const textdata::LabeledCorpus& corpus);
double accuracy(const ModelParams& params, const textdata::LabeledCorpus& corpus);

/// Plain-text checkpoint: header `version d v K`, then structure and row-major data.
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

/// CSV `example_id,label,c_1..c_v` for every example in `corpus`.
void export_context_csv(const ModelParams& params, const textdata::LabeledCorpus& corpus,
                        const std::string& path);

}  // namespace convat::model
