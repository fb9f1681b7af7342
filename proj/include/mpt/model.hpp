// SPDX-License-Identifier: Apache-2.0
//
// A small frozen encoder-decoder transformer. The soft prompt is prepended to
// the encoder input embeddings; the only gradient the reverse pass produces is
// the one with respect to that prompt matrix.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mpt/numerics.hpp"
#include "mpt/rng.hpp"

namespace mpt {

inline constexpr int kPadToken = 0;
inline constexpr int kBosToken = 1;
inline constexpr int kEosToken = 2;
inline constexpr int kSepToken = 3;
inline constexpr int kFirstContentToken = 4;

inline constexpr std::size_t kMaxPromptLength = 512;

struct ModelConfig {
  std::size_t vocab_size = 20;
  std::size_t d_model = 16;
  std::size_t n_heads = 2;
  std::size_t enc_layers = 1;
  std::size_t dec_layers = 1;
  std::size_t ff_dim = 32;
  std::size_t max_src_len = 8;
  std::size_t max_tgt_len = 8;

  // Throws std::invalid_argument naming the violated constraint.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// Gaussian scales for init_model. Projections are drawn with
// std = weight_gain / sqrt(fan_in); the embedding table with embedding_std.
struct InitOptions {
  double weight_gain = 1.0;
  double embedding_std = 0.25;
  bool operator==(const InitOptions&) const = default;
};

struct LayerNormWeights {
  Vector gain;
  Vector bias;
};

struct AttentionWeights {
  Matrix wq, wk, wv, wo;  // d × d, applied as x · W
};

struct FeedForwardWeights {
  Matrix w1;  // d × ff
  Vector b1;
  Matrix w2;  // ff × d
  Vector b2;
};

struct EncoderLayerWeights {
  LayerNormWeights ln_attn;
  AttentionWeights self_attn;
  LayerNormWeights ln_ff;
  FeedForwardWeights ff;
};

struct DecoderLayerWeights {
  LayerNormWeights ln_self;
  AttentionWeights self_attn;
  LayerNormWeights ln_cross;
  AttentionWeights cross_attn;
  LayerNormWeights ln_ff;
  FeedForwardWeights ff;
};

struct ModelWeights {
  Matrix embedding;  // vocab × d, tied with the output projection
  std::vector<EncoderLayerWeights> encoder;
  LayerNormWeights enc_final;
  std::vector<DecoderLayerWeights> decoder;
  LayerNormWeights dec_final;
};

namespace detail {

struct LayerNormCache {
  Matrix xhat;
  std::vector<double> inv_std;
};

struct AttentionCache {
  Matrix q, k, v;
  std::vector<Matrix> probs;  // one (rows_q × rows_kv) matrix per head
};

struct FeedForwardCache {
  Matrix pre;  // input to the activation
};

struct EncoderLayerCache {
  LayerNormCache ln_attn;
  AttentionCache attn;
  LayerNormCache ln_ff;
  FeedForwardCache ff;
};

struct DecoderLayerCache {
  LayerNormCache ln_self;
  AttentionCache self_attn;
  LayerNormCache ln_cross;
  AttentionCache cross_attn;
  LayerNormCache ln_ff;
  FeedForwardCache ff;
};

}  // namespace detail

// Everything one forward pass produces. Single-use: hand it to the reverse
// pass of the same model that produced it.
struct ForwardTrace {
  std::size_t prompt_len = 0;
  Matrix logits;          // n_tgt × vocab
  Matrix enc_hidden;      // (l + n_src) × d, after the encoder's final layer norm
  Matrix dec_hidden;      // n_tgt × d, after the decoder's final layer norm

  std::vector<detail::EncoderLayerCache> enc_cache;
  detail::LayerNormCache enc_final_cache;
  std::vector<detail::DecoderLayerCache> dec_cache;
  detail::LayerNormCache dec_final_cache;
};

class FrozenModel {
 public:
  FrozenModel(ModelConfig config, ModelWeights weights);

  const ModelConfig& config() const { return config_; }
  const ModelWeights& weights() const { return weights_; }
  const Matrix& embedding() const { return weights_.embedding; }

  ForwardTrace forward(const Matrix& prompt, std::span<const int> src_ids,
                       std::span<const int> tgt_ids) const;

  // Gradient of a loss with respect to the prompt rows of `trace`. The
  // hidden-state gradients may be empty (0 × 0), meaning zero.
  Matrix backward_to_prompt(const ForwardTrace& trace, const Matrix& dloss_dlogits,
                            const Matrix& dloss_dhidden_enc,
                            const Matrix& dloss_dhidden_dec) const;

  // Greedy decode of exactly `length` target tokens.
  std::vector<int> greedy_decode(const Matrix& prompt, std::span<const int> src_ids,
                                 std::size_t length) const;

  // FNV-1a over every weight's bit pattern.
  std::uint64_t checksum() const;
  std::size_t parameter_count() const;

  void save(const std::filesystem::path& path) const;
  static FrozenModel load(const std::filesystem::path& path);

  static constexpr std::uint32_t kFormatVersion = 1;

 private:
  void check_inputs(const Matrix& prompt, std::span<const int> src_ids,
                    std::span<const int> tgt_ids) const;

  ModelConfig config_;
  ModelWeights weights_;
  Matrix positions_;  // sinusoidal table, (kMaxPromptLength + max_len) × d
};

// Visits every weight tensor in checkpoint declaration order.
void for_each_tensor(const ModelWeights& w, const std::function<void(std::span<const double>)>& fn);
void for_each_tensor(ModelWeights& w, const std::function<void(std::span<double>)>& fn);

ModelWeights allocate_weights(const ModelConfig& cfg);

FrozenModel init_model(const ModelConfig& cfg, Rng rng, const InitOptions& init = {});

inline ForwardTrace forward(const FrozenModel& model, const Matrix& prompt,
                            std::span<const int> src_ids, std::span<const int> tgt_ids) {
  return model.forward(prompt, src_ids, tgt_ids);
}

inline Matrix backward_to_prompt(const FrozenModel& model, const ForwardTrace& trace,
                                 const Matrix& dloss_dlogits, const Matrix& dloss_dhidden_enc,
                                 const Matrix& dloss_dhidden_dec) {
  return model.backward_to_prompt(trace, dloss_dlogits, dloss_dhidden_enc, dloss_dhidden_dec);
}

// Mean negative log-likelihood of tgt_ids under the trace's logits.
double task_loss(const ForwardTrace& trace, std::span<const int> tgt_ids);

// d task_loss / d logits: (softmax - onehot) / n_tgt.
Matrix task_loss_grad(const ForwardTrace& trace, std::span<const int> tgt_ids);

}  // namespace mpt
