#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xprot/rng.hpp"
#include "xprot/tensor.hpp"

namespace xprot {

enum class TaskKind { multilabel, multiclass };

struct ModelConfig {
  std::size_t n_layers = 4;
  std::size_t n_heads = 4;
  std::size_t d_model = 64;
  std::size_t d_ff = 256;
  std::size_t vocab_size = 24;
  std::size_t max_positions = 1002;
  std::size_t n_classes = 2;
  TaskKind task_kind = TaskKind::multiclass;
  std::size_t head_hidden = 50;
  double dropout_rate = 0.10;
  std::vector<std::string> class_vocab;  // optional; size n_classes when set

  std::size_t head_dim() const { return d_model / n_heads; }
  void validate() const;
};

// Token table (fixed): PAD=0, CLS=1, SEP=2, UNK=3, then the 20 canonical
// amino acids "ACDEFGHIKLMNPQRSTVWY" at ids 4..23. Ambiguity codes
// B, Z, X, U, O map to UNK. Sequences are cropped to kMaxResidues residues
// and framed as [CLS] residues [SEP].
inline constexpr int kPadToken = 0;
inline constexpr int kClsToken = 1;
inline constexpr int kSepToken = 2;
inline constexpr int kUnkToken = 3;
inline constexpr std::size_t kVocabSize = 24;
inline constexpr std::size_t kMaxResidues = 1000;

std::vector<int> tokenize(const std::string& sequence);

struct LayerWeights {
  Tensor wq, bq, wk, bk, wv, bv;  // projections [D x D], biases [D]
  Tensor wo, bo;                  // output projection
  Tensor ln1_g, ln1_b;            // post-attention layer norm
  Tensor ln2_g, ln2_b;            // post-feed-forward layer norm
  Tensor w_ff1, b_ff1;            // [D x F], [F]
  Tensor w_ff2, b_ff2;            // [F x D], [D]
};

struct ClassifierWeights {
  Tensor w_hidden, b_hidden;  // [4D x H], [H]
  Tensor ln_g, ln_b;          // [H]
  Tensor w_out, b_out;        // [H x C], [C]
};

struct ModelWeights {
  Tensor token_embedding;     // [V x D]
  Tensor position_embedding;  // [P x D]
  std::vector<LayerWeights> layers;
  ClassifierWeights classifier;

  static ModelWeights zeros(const ModelConfig& config);
  static ModelWeights random_init(const ModelConfig& config, Rng& rng, double scale = 0.02);
  void validate(const ModelConfig& config) const;
};

enum class ParamGroup { encoder, head };

// Visits every parameter tensor as (name, group, tensor). The order is fixed
// and identical for weights and gradient buffers of the same config.
template <typename W, typename F>
void for_each_param(W& weights, F&& fn) {
  fn("token_embedding", ParamGroup::encoder, weights.token_embedding);
  fn("position_embedding", ParamGroup::encoder, weights.position_embedding);
  for (std::size_t i = 0; i < weights.layers.size(); ++i) {
    auto& layer = weights.layers[i];
    const std::string prefix = "layer" + std::to_string(i) + ".";
    fn(prefix + "wq", ParamGroup::encoder, layer.wq);
    fn(prefix + "bq", ParamGroup::encoder, layer.bq);
    fn(prefix + "wk", ParamGroup::encoder, layer.wk);
    fn(prefix + "bk", ParamGroup::encoder, layer.bk);
    fn(prefix + "wv", ParamGroup::encoder, layer.wv);
    fn(prefix + "bv", ParamGroup::encoder, layer.bv);
    fn(prefix + "wo", ParamGroup::encoder, layer.wo);
    fn(prefix + "bo", ParamGroup::encoder, layer.bo);
    fn(prefix + "ln1_g", ParamGroup::encoder, layer.ln1_g);
    fn(prefix + "ln1_b", ParamGroup::encoder, layer.ln1_b);
    fn(prefix + "ln2_g", ParamGroup::encoder, layer.ln2_g);
    fn(prefix + "ln2_b", ParamGroup::encoder, layer.ln2_b);
    fn(prefix + "w_ff1", ParamGroup::encoder, layer.w_ff1);
    fn(prefix + "b_ff1", ParamGroup::encoder, layer.b_ff1);
    fn(prefix + "w_ff2", ParamGroup::encoder, layer.w_ff2);
    fn(prefix + "b_ff2", ParamGroup::encoder, layer.b_ff2);
  }
  fn("classifier.w_hidden", ParamGroup::head, weights.classifier.w_hidden);
  fn("classifier.b_hidden", ParamGroup::head, weights.classifier.b_hidden);
  fn("classifier.ln_g", ParamGroup::head, weights.classifier.ln_g);
  fn("classifier.ln_b", ParamGroup::head, weights.classifier.ln_b);
  fn("classifier.w_out", ParamGroup::head, weights.classifier.w_out);
  fn("classifier.b_out", ParamGroup::head, weights.classifier.b_out);
}

struct LayerCache {
  Tensor s;      // block input [T x D]
  Tensor q, k, v;
  Tensor probs;  // attention weights [H x T x T]
  Tensor c;      // concatenated per-head output, pre output projection [T x D].
                 // Head h owns channels [h*D/H, (h+1)*D/H).
  Tensor r1;     // s + output-projected attention
  Tensor h1;     // layer_norm(r1)
  Tensor f1;     // feed-forward pre-activation [T x F]
  Tensor gelu;   // gelu(f1)
  Tensor r2;     // h1 + feed-forward output
  Tensor out;    // layer_norm(r2) = next block input
};

struct ForwardCache {
  std::vector<int> tokens;
  std::size_t n_res = 0;  // residue tokens (excludes CLS/SEP)
  Tensor embedding;       // E [T x D]
  std::vector<LayerCache> layers;
  Tensor pooled;          // [4D] = concat(CLS, max, mean, sum/sqrt(n_res))
  std::vector<std::size_t> max_index;  // argmax residue row per channel
  Tensor cls_z1;          // classifier hidden pre-activation [H]
  Tensor cls_relu;        // [H]
  Tensor cls_ln;          // [H]
  Tensor dropout_mask;    // [H] with 1/(1-rate) scaling; empty at inference
  Tensor logits;          // [C]
};

// Embedding lookup for a token sequence: token embedding + position embedding.
Tensor embed_tokens(const ModelWeights& weights, const ModelConfig& config,
                    const std::vector<int>& tokens);

// Full forward pass. dropout_rng enables the training-only classifier dropout.
ForwardCache forward(const ModelWeights& weights, const ModelConfig& config,
                     const std::vector<int>& tokens, Rng* dropout_rng = nullptr);

// Forward from an externally supplied embedding tensor [T x D]; the token
// frame is assumed [CLS] residues [SEP], so n_res = T - 2.
ForwardCache forward_from_embedding(const ModelWeights& weights, const ModelConfig& config,
                                    const Tensor& embedding);

// Downstream evaluation from the attention cut of one layer: treats
// (s_l, c_l) as independent inputs to the rest of the network, so
// logits = G(s, c). This is the function whose partials grad_head_cut
// returns; finite-difference checks drive it directly.
Tensor forward_downstream_from_cut(const ModelWeights& weights, const ModelConfig& config,
                                   std::size_t layer, const Tensor& s, const Tensor& c);

struct CutGrads {
  Tensor g_c;  // d logit / d c_l with downstream treated as G(s_l, c_l)
  Tensor g_s;  // skip-branch partial d logit / d s_l
};

struct BackwardResult {
  Tensor d_embedding;          // [T x D]
  std::vector<CutGrads> cuts;  // one per layer
};

// Reverse sweep from an arbitrary logit cotangent. When param_grads is given
// it must be a zeros/accumulator ModelWeights of the same config; gradients
// are accumulated (+=) so callers can sum over micro-batches.
BackwardResult backward(const ModelWeights& weights, const ModelConfig& config,
                        const ForwardCache& cache, const Tensor& d_logits,
                        ModelWeights* param_grads = nullptr);

// d logits[class_index] / d embedding.
Tensor grad_embedding(const ModelWeights& weights, const ModelConfig& config,
                      const ForwardCache& cache, std::size_t class_index);

// Cut gradients at one layer for a class logit.
CutGrads grad_head_cut(const ModelWeights& weights, const ModelConfig& config,
                       const ForwardCache& cache, std::size_t layer,
                       std::size_t class_index);

// Weight archive ("XPROTW1\0" magic, u64-LE manifest length, JSON manifest,
// little-endian row-major payload). Round-trips bit-exactly.
void save_weights(const std::string& path, const ModelConfig& config,
                  const ModelWeights& weights);
std::pair<ModelConfig, ModelWeights> load_weights(const std::string& path);

std::string model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const std::string& text);

}  // namespace xprot
