#include "xprot/model.hpp"

#include <array>
#include <cmath>
#include <string>

#include "xprot/error.hpp"
#include "xprot/model_ops.hpp"

namespace xprot {

namespace {

constexpr const char* kAminoAcids = "ACDEFGHIKLMNPQRSTVWY";
constexpr const char* kUnknownCodes = "BZXUO";

int residue_token(char c) {
  for (int i = 0; kAminoAcids[i]; ++i) {
    if (kAminoAcids[i] == c) return 4 + i;
  }
  for (int i = 0; kUnknownCodes[i]; ++i) {
    if (kUnknownCodes[i] == c) return kUnkToken;
  }
  return -1;
}

}  // namespace

void ModelConfig::validate() const {
  if (d_model == 0 || n_heads == 0 || n_layers == 0 || d_ff == 0 || head_hidden == 0 ||
      n_classes == 0 || vocab_size == 0 || max_positions < 3) {
    throw Error(ErrorCode::manifest_mismatch, "model config: zero-sized dimension");
  }
  if (d_model % n_heads != 0) {
    throw Error(ErrorCode::manifest_mismatch,
                "model config: d_model " + std::to_string(d_model) +
                    " not divisible by n_heads " + std::to_string(n_heads));
  }
  if (!class_vocab.empty() && class_vocab.size() != n_classes) {
    throw Error(ErrorCode::manifest_mismatch, "model config: class_vocab size != n_classes");
  }
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
    throw Error(ErrorCode::manifest_mismatch, "model config: dropout_rate outside [0,1)");
  }
}

std::vector<int> tokenize(const std::string& sequence) {
  if (sequence.empty()) {
    throw Error(ErrorCode::invalid_argument, "tokenize: empty sequence");
  }
  const std::size_t n = std::min(sequence.size(), kMaxResidues);
  std::vector<int> tokens;
  tokens.reserve(n + 2);
  tokens.push_back(kClsToken);
  for (std::size_t i = 0; i < n; ++i) {
    const int t = residue_token(sequence[i]);
    if (t < 0) {
      throw Error(ErrorCode::invalid_argument,
                  std::string("tokenize: illegal character '") + sequence[i] + "' at position " +
                      std::to_string(i + 1));
    }
    tokens.push_back(t);
  }
  tokens.push_back(kSepToken);
  return tokens;
}

ModelWeights ModelWeights::zeros(const ModelConfig& config) {
  const std::size_t d = config.d_model, f = config.d_ff, h = config.head_hidden;
  ModelWeights w;
  w.token_embedding = Tensor({config.vocab_size, d});
  w.position_embedding = Tensor({config.max_positions, d});
  w.layers.resize(config.n_layers);
  for (auto& layer : w.layers) {
    layer.wq = Tensor({d, d});
    layer.bq = Tensor({d});
    layer.wk = Tensor({d, d});
    layer.bk = Tensor({d});
    layer.wv = Tensor({d, d});
    layer.bv = Tensor({d});
    layer.wo = Tensor({d, d});
    layer.bo = Tensor({d});
    layer.ln1_g = Tensor({d});
    layer.ln1_b = Tensor({d});
    layer.ln2_g = Tensor({d});
    layer.ln2_b = Tensor({d});
    layer.w_ff1 = Tensor({d, f});
    layer.b_ff1 = Tensor({f});
    layer.w_ff2 = Tensor({f, d});
    layer.b_ff2 = Tensor({d});
  }
  w.classifier.w_hidden = Tensor({4 * d, h});
  w.classifier.b_hidden = Tensor({h});
  w.classifier.ln_g = Tensor({h});
  w.classifier.ln_b = Tensor({h});
  w.classifier.w_out = Tensor({h, config.n_classes});
  w.classifier.b_out = Tensor({config.n_classes});
  return w;
}

ModelWeights ModelWeights::random_init(const ModelConfig& config, Rng& rng, double scale) {
  ModelWeights w = zeros(config);
  for_each_param(w, [&](const std::string& name, ParamGroup, Tensor& t) {
    const bool is_gain = name.ends_with("ln1_g") || name.ends_with("ln2_g") || name.ends_with("ln_g");
    const bool is_bias_like = t.rank() == 1;
    if (is_gain) {
      t.fill(1.0);
    } else if (is_bias_like) {
      t.fill(0.0);
    } else {
      for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal() * scale;
    }
  });
  return w;
}

void ModelWeights::validate(const ModelConfig& config) const {
  const ModelWeights ref = zeros(config);
  bool ok = true;
  std::string bad;
  for_each_param(ref, [&](const std::string& name, ParamGroup, const Tensor& expected) {
    const Tensor* actual = nullptr;
    for_each_param(*this, [&](const std::string& n2, ParamGroup, const Tensor& t2) {
      if (n2 == name) actual = &t2;
    });
    if (!actual || actual->shape() != expected.shape()) {
      ok = false;
      if (bad.empty()) bad = name;
    } else if (!actual->all_finite()) {
      ok = false;
      if (bad.empty()) bad = name + " (non-finite)";
    }
  });
  if (!ok) {
    throw Error(ErrorCode::manifest_mismatch, "model weights: inconsistent tensor " + bad);
  }
}

Tensor embed_tokens(const ModelWeights& weights, const ModelConfig& config,
                    const std::vector<int>& tokens) {
  const std::size_t t_len = tokens.size();
  if (t_len < 3 || t_len > config.max_positions) {
    throw Error(ErrorCode::invalid_argument,
                "embed_tokens: token count " + std::to_string(t_len) + " outside [3, " +
                    std::to_string(config.max_positions) + "]");
  }
  const std::size_t d = config.d_model;
  Tensor e({t_len, d});
  for (std::size_t t = 0; t < t_len; ++t) {
    const int id = tokens[t];
    if (id < 0 || static_cast<std::size_t>(id) >= config.vocab_size) {
      throw Error(ErrorCode::invalid_argument, "embed_tokens: token id out of vocabulary");
    }
    for (std::size_t j = 0; j < d; ++j) {
      e(t, j) = weights.token_embedding(static_cast<std::size_t>(id), j) +
                weights.position_embedding(t, j);
    }
  }
  return e;
}

namespace {

// Attention half of a layer: fills q, k, v, probs, c from cache.s.
void attention_block(const LayerWeights& lw, const ModelConfig& config, LayerCache& cache) {
  const std::size_t t_len = cache.s.rows();
  const std::size_t d = config.d_model;
  const std::size_t n_heads = config.n_heads;
  const std::size_t dh = config.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  cache.q = ops::linear(cache.s, lw.wq, lw.bq);
  cache.k = ops::linear(cache.s, lw.wk, lw.bk);
  cache.v = ops::linear(cache.s, lw.wv, lw.bv);
  cache.probs = Tensor({n_heads, t_len, t_len});
  cache.c = Tensor({t_len, d});
  for (std::size_t h = 0; h < n_heads; ++h) {
    const Tensor qh = ops::slice_cols(cache.q, h * dh, dh);
    const Tensor kh = ops::slice_cols(cache.k, h * dh, dh);
    const Tensor vh = ops::slice_cols(cache.v, h * dh, dh);
    Tensor scores = matmul_nt(qh, kh);
    scores.scale(scale);
    const Tensor probs = softmax_rows(scores);
    std::copy(probs.data(), probs.data() + t_len * t_len,
              cache.probs.data() + h * t_len * t_len);
    const Tensor oh = matmul(probs, vh);
    ops::paste_cols(cache.c, oh, h * dh);
  }
}

// Post-attention half: r1 = s + c*Wo + bo, layer norms and feed-forward.
void finish_layer(const LayerWeights& lw, LayerCache& cache) {
  Tensor ao = ops::linear(cache.c, lw.wo, lw.bo);
  cache.r1 = cache.s;
  cache.r1.add(ao);
  cache.h1 = ops::layer_norm(cache.r1, lw.ln1_g, lw.ln1_b);
  cache.f1 = ops::linear(cache.h1, lw.w_ff1, lw.b_ff1);
  cache.gelu = ops::gelu(cache.f1);
  Tensor f2 = ops::linear(cache.gelu, lw.w_ff2, lw.b_ff2);
  cache.r2 = cache.h1;
  cache.r2.add(f2);
  cache.out = ops::layer_norm(cache.r2, lw.ln2_g, lw.ln2_b);
}

LayerCache run_layer(const LayerWeights& lw, const ModelConfig& config, Tensor input) {
  LayerCache cache;
  cache.s = std::move(input);
  attention_block(lw, config, cache);
  finish_layer(lw, cache);
  return cache;
}

// Pooling and classifier on top of the last layer's output.
void run_head(const ModelWeights& weights, const ModelConfig& config, ForwardCache& cache,
              Rng* dropout_rng) {
  const Tensor& features = cache.layers.back().out;
  const std::size_t t_len = features.rows();
  const std::size_t d = config.d_model;

  // Pooling: CLS feature, then per-channel max / mean / sum over residue rows
  // only (rows 1 .. T-2), the sum scaled by 1/sqrt(n_res).
  const double n_res = static_cast<double>(cache.n_res);
  const double inv_sqrt = 1.0 / std::sqrt(n_res);
  cache.pooled = Tensor({4 * d});
  cache.max_index.assign(d, 1);
  for (std::size_t ch = 0; ch < d; ++ch) {
    cache.pooled[ch] = features(0, ch);
    double mx = features(1, ch);
    std::size_t arg = 1;
    double sum = 0.0;
    for (std::size_t r = 1; r + 1 < t_len; ++r) {
      const double v = features(r, ch);
      if (v > mx) {
        mx = v;
        arg = r;
      }
      sum += v;
    }
    cache.max_index[ch] = arg;
    cache.pooled[d + ch] = mx;
    cache.pooled[2 * d + ch] = sum / n_res;
    cache.pooled[3 * d + ch] = sum * inv_sqrt;
  }

  const ClassifierWeights& cw = weights.classifier;
  cache.cls_z1 = ops::linear_vec(cache.pooled, cw.w_hidden, cw.b_hidden);
  cache.cls_relu = ops::relu(cache.cls_z1);
  cache.cls_ln = ops::layer_norm(cache.cls_relu, cw.ln_g, cw.ln_b);
  Tensor head_in = cache.cls_ln;
  if (dropout_rng != nullptr && config.dropout_rate > 0.0) {
    const double keep = 1.0 - config.dropout_rate;
    cache.dropout_mask = Tensor({head_in.size()});
    for (std::size_t i = 0; i < head_in.size(); ++i) {
      cache.dropout_mask[i] = dropout_rng->next_double() < keep ? 1.0 / keep : 0.0;
      head_in[i] *= cache.dropout_mask[i];
    }
  }
  cache.logits = ops::linear_vec(head_in, cw.w_out, cw.b_out);
}

ForwardCache run_model(const ModelWeights& weights, const ModelConfig& config,
                       std::vector<int> tokens, Tensor embedding, Rng* dropout_rng) {
  const std::size_t t_len = embedding.rows();
  if (t_len < 3) {
    throw Error(ErrorCode::invalid_argument, "forward: need at least [CLS] x [SEP]");
  }

  ForwardCache cache;
  cache.tokens = std::move(tokens);
  cache.n_res = t_len - 2;
  cache.embedding = std::move(embedding);

  Tensor current = cache.embedding;
  cache.layers.reserve(config.n_layers);
  for (std::size_t l = 0; l < config.n_layers; ++l) {
    cache.layers.push_back(run_layer(weights.layers[l], config, std::move(current)));
    current = cache.layers.back().out;
  }
  run_head(weights, config, cache, dropout_rng);
  return cache;
}

}  // namespace

ForwardCache forward(const ModelWeights& weights, const ModelConfig& config,
                     const std::vector<int>& tokens, Rng* dropout_rng) {
  Tensor e = embed_tokens(weights, config, tokens);
  return run_model(weights, config, tokens, std::move(e), dropout_rng);
}

ForwardCache forward_from_embedding(const ModelWeights& weights, const ModelConfig& config,
                                    const Tensor& embedding) {
  if (embedding.rank() != 2 || embedding.cols() != config.d_model) {
    throw Error(ErrorCode::dimension_mismatch,
                "forward_from_embedding: embedding shape " + embedding.shape_string());
  }
  return run_model(weights, config, {}, embedding, nullptr);
}

Tensor forward_downstream_from_cut(const ModelWeights& weights, const ModelConfig& config,
                                   std::size_t layer, const Tensor& s, const Tensor& c) {
  if (layer >= config.n_layers) {
    throw Error(ErrorCode::invalid_argument, "forward_downstream_from_cut: layer out of range");
  }
  if (!s.same_shape(c) || s.rank() != 2 || s.cols() != config.d_model) {
    throw Error(ErrorCode::dimension_mismatch,
                "forward_downstream_from_cut: s " + s.shape_string() + " vs c " + c.shape_string());
  }
  ForwardCache cache;
  cache.n_res = s.rows() - 2;
  LayerCache cut;
  cut.s = s;
  cut.c = c;
  finish_layer(weights.layers[layer], cut);
  cache.layers.push_back(std::move(cut));
  for (std::size_t l = layer + 1; l < config.n_layers; ++l) {
    cache.layers.push_back(run_layer(weights.layers[l], config, cache.layers.back().out));
  }
  run_head(weights, config, cache, nullptr);
  return cache.logits;
}

BackwardResult backward(const ModelWeights& weights, const ModelConfig& config,
                        const ForwardCache& cache, const Tensor& d_logits,
                        ModelWeights* param_grads) {
  const std::size_t d = config.d_model;
  const std::size_t t_len = cache.embedding.rows();
  const std::size_t n_heads = config.n_heads;
  const std::size_t dh = config.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const ClassifierWeights& cw = weights.classifier;

  if (d_logits.size() != config.n_classes) {
    throw Error(ErrorCode::dimension_mismatch, "backward: d_logits shape " + d_logits.shape_string());
  }

  // Classifier.
  Tensor head_in = cache.cls_ln;
  if (cache.dropout_mask.size() == head_in.size() && cache.dropout_mask.rank() == 1) {
    head_in.mul(cache.dropout_mask);
  }
  Tensor d_head_in = ops::mat_vec(cw.w_out, d_logits);
  if (param_grads) {
    param_grads->classifier.w_out.add(ops::outer(head_in, d_logits));
    param_grads->classifier.b_out.add(d_logits);
  }
  Tensor d_ln = d_head_in;
  if (cache.dropout_mask.size() == d_ln.size() && cache.dropout_mask.rank() == 1) {
    d_ln.mul(cache.dropout_mask);
  }
  ops::LayerNormGrad ln_grad = ops::layer_norm_backward(d_ln, cache.cls_relu, cw.ln_g);
  if (param_grads) {
    param_grads->classifier.ln_g.add(ln_grad.d_gain);
    param_grads->classifier.ln_b.add(ln_grad.d_bias);
  }
  Tensor d_z1 = ln_grad.dx;
  for (std::size_t i = 0; i < d_z1.size(); ++i) {
    if (cache.cls_z1[i] <= 0.0) d_z1[i] = 0.0;
  }
  if (param_grads) {
    param_grads->classifier.w_hidden.add(ops::outer(cache.pooled, d_z1));
    param_grads->classifier.b_hidden.add(d_z1);
  }
  Tensor d_pooled = ops::mat_vec(cw.w_hidden, d_z1);

  // Pooling.
  const double n_res = static_cast<double>(cache.n_res);
  const double inv_sqrt = 1.0 / std::sqrt(n_res);
  Tensor d_features({t_len, d});
  for (std::size_t ch = 0; ch < d; ++ch) {
    d_features(0, ch) += d_pooled[ch];
    d_features(cache.max_index[ch], ch) += d_pooled[d + ch];
    const double per_row = d_pooled[2 * d + ch] / n_res + d_pooled[3 * d + ch] * inv_sqrt;
    for (std::size_t r = 1; r + 1 < t_len; ++r) d_features(r, ch) += per_row;
  }

  // Layers, top down.
  BackwardResult result;
  result.cuts.resize(config.n_layers);
  Tensor d_out = std::move(d_features);
  for (std::size_t li = config.n_layers; li > 0; --li) {
    const std::size_t l = li - 1;
    const LayerCache& lc = cache.layers[l];
    const LayerWeights& lw = weights.layers[l];
    LayerWeights* pg = param_grads ? &param_grads->layers[l] : nullptr;

    ops::LayerNormGrad ln2 = ops::layer_norm_backward(d_out, lc.r2, lw.ln2_g);
    if (pg) {
      pg->ln2_g.add(ln2.d_gain);
      pg->ln2_b.add(ln2.d_bias);
    }
    Tensor d_h1 = ln2.dx;          // via the residual branch
    const Tensor& d_f2 = ln2.dx;   // via the feed-forward branch
    Tensor d_g = matmul_nt(d_f2, lw.w_ff2);
    if (pg) {
      pg->w_ff2.add(matmul_tn(lc.gelu, d_f2));
      pg->b_ff2.add(ops::col_sum(d_f2));
    }
    Tensor d_f1 = d_g;
    d_f1.mul(ops::gelu_grad(lc.f1));
    d_h1.add(matmul_nt(d_f1, lw.w_ff1));
    if (pg) {
      pg->w_ff1.add(matmul_tn(lc.h1, d_f1));
      pg->b_ff1.add(ops::col_sum(d_f1));
    }

    ops::LayerNormGrad ln1 = ops::layer_norm_backward(d_h1, lc.r1, lw.ln1_g);
    if (pg) {
      pg->ln1_g.add(ln1.d_gain);
      pg->ln1_b.add(ln1.d_bias);
    }
    const Tensor& d_r1 = ln1.dx;
    auto [g_c, g_s] = ops::head_cut_from_residual_grad(d_r1, lw.wo);
    if (pg) {
      pg->wo.add(matmul_tn(lc.c, d_r1));
      pg->bo.add(ops::col_sum(d_r1));
    }
    result.cuts[l].g_c = g_c;
    result.cuts[l].g_s = g_s;

    Tensor d_q({t_len, d}), d_k({t_len, d}), d_v({t_len, d});
    for (std::size_t h = 0; h < n_heads; ++h) {
      const Tensor d_oh = ops::slice_cols(g_c, h * dh, dh);
      Tensor probs({t_len, t_len});
      std::copy(cache.layers[l].probs.data() + h * t_len * t_len,
                cache.layers[l].probs.data() + (h + 1) * t_len * t_len, probs.data());
      const Tensor qh = ops::slice_cols(lc.q, h * dh, dh);
      const Tensor kh = ops::slice_cols(lc.k, h * dh, dh);
      const Tensor vh = ops::slice_cols(lc.v, h * dh, dh);

      const Tensor d_probs = matmul_nt(d_oh, vh);
      Tensor d_vh = matmul_tn(probs, d_oh);
      Tensor d_scores = ops::softmax_rows_backward(d_probs, probs);
      d_scores.scale(scale);
      Tensor d_qh = matmul(d_scores, kh);
      Tensor d_kh = matmul_tn(d_scores, qh);
      ops::paste_cols(d_q, d_qh, h * dh);
      ops::paste_cols(d_k, d_kh, h * dh);
      ops::paste_cols(d_v, d_vh, h * dh);
    }

    Tensor d_s = g_s;  // skip branch
    d_s.add(matmul_nt(d_q, lw.wq));
    d_s.add(matmul_nt(d_k, lw.wk));
    d_s.add(matmul_nt(d_v, lw.wv));
    if (pg) {
      pg->wq.add(matmul_tn(lc.s, d_q));
      pg->bq.add(ops::col_sum(d_q));
      pg->wk.add(matmul_tn(lc.s, d_k));
      pg->bk.add(ops::col_sum(d_k));
      pg->wv.add(matmul_tn(lc.s, d_v));
      pg->bv.add(ops::col_sum(d_v));
    }
    d_out = std::move(d_s);
  }

  result.d_embedding = std::move(d_out);
  if (param_grads && !cache.tokens.empty()) {
    for (std::size_t t = 0; t < t_len; ++t) {
      const std::size_t id = static_cast<std::size_t>(cache.tokens[t]);
      for (std::size_t j = 0; j < d; ++j) {
        param_grads->token_embedding(id, j) += result.d_embedding(t, j);
        param_grads->position_embedding(t, j) += result.d_embedding(t, j);
      }
    }
  }
  return result;
}

Tensor grad_embedding(const ModelWeights& weights, const ModelConfig& config,
                      const ForwardCache& cache, std::size_t class_index) {
  if (class_index >= config.n_classes) {
    throw Error(ErrorCode::invalid_argument, "grad_embedding: class index out of range");
  }
  Tensor d_logits({config.n_classes});
  d_logits[class_index] = 1.0;
  return backward(weights, config, cache, d_logits).d_embedding;
}

CutGrads grad_head_cut(const ModelWeights& weights, const ModelConfig& config,
                       const ForwardCache& cache, std::size_t layer,
                       std::size_t class_index) {
  if (layer >= config.n_layers) {
    throw Error(ErrorCode::invalid_argument,
                "grad_head_cut: layer " + std::to_string(layer) + " out of range");
  }
  if (class_index >= config.n_classes) {
    throw Error(ErrorCode::invalid_argument, "grad_head_cut: class index out of range");
  }
  Tensor d_logits({config.n_classes});
  d_logits[class_index] = 1.0;
  BackwardResult r = backward(weights, config, cache, d_logits);
  return std::move(r.cuts[layer]);
}

}  // namespace xprot
