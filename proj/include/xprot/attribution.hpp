#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "xprot/model.hpp"
#include "xprot/tensor.hpp"

namespace xprot::attribution {

enum class BaselineKind { zero, pad_token };

// The default baseline is the PAD-token embedding: with a post-LN encoder
// the all-zero embedding sits in layer norm's scale-invariant singularity,
// so the logit traverses an unresolvable boundary layer near alpha = 0 and
// completeness cannot converge there. The pad frame keeps every path point
// at O(1) activation norm. The zero baseline stays available; it is exact
// for linear stubs.
struct PathSpec {
  BaselineKind baseline = BaselineKind::pad_token;
  std::size_t steps = 64;  // quadrature segments m; m+1 path points

  void validate() const;
};

struct AttributionMap {
  enum class Kind { embedding, head_level };
  Kind kind = Kind::embedding;
  std::size_t layer = 0;  // meaningful for head_level
  Tensor values;          // [T x d_model] (embedding) or [T x n_heads] (head_level)
  std::string protein_id;
  std::size_t class_index = 0;
  std::vector<std::uint8_t> special_token;  // per row: 1 for CLS/SEP
  std::size_t steps = 0;
  BaselineKind baseline = BaselineKind::zero;
  double completeness_gap = 0.0;
};

struct SummedMap {
  Tensor values;  // [n_layers x n_heads]
  std::string protein_id;
  std::size_t class_index = 0;
};

// Straight-line interpolation in embedding space: point k is
// baseline + (k/m)(sample - baseline); endpoints are exact.
std::vector<Tensor> embedding_path(const Tensor& sample, const Tensor& baseline, std::size_t m);

Tensor baseline_embedding(const ModelWeights& weights, const ModelConfig& config,
                          const std::vector<int>& tokens, BaselineKind kind);

// |total - (F(x) - F(x'))| / |F(x) - F(x')|; falls back to the absolute gap
// when the denominator is below 1e-9.
double completeness_gap(double attribution_total, double f_x, double f_baseline);

struct EmbeddingAttribution {
  AttributionMap map;     // [T x d_model]
  Tensor per_token;       // [T], signed channel sum
  double gap = 0.0;       // relative completeness gap
  double f_x = 0.0;
  double f_baseline = 0.0;
};

struct HeadLevelAttribution {
  AttributionMap head_map;  // [T x n_heads], block-summed over head channels
  Tensor skip_map;          // [T x d_model], attribution through the skip branch
  Tensor head_channels;     // [T x d_model], pre-reduction attribution of c_l
  double gap = 0.0;         // joint head+skip relative completeness gap
  double f_x = 0.0;
  double f_baseline = 0.0;
};

// Everything one path sweep produces: the trapezoid rule in the gradients is
// applied against the telescoping activation deltas along the encoded path.
struct FullAttribution {
  EmbeddingAttribution embedding;
  std::vector<HeadLevelAttribution> layers;
  SummedMap summed;
};

// Straight-path IG quadrature over an arbitrary scalar function of the
// input tensor (value and gradient per point). The embedding route is this
// applied to the class logit; stub networks exercise it directly in tests.
struct PointEval {
  double value = 0.0;
  Tensor gradient;
};
using EvalFn = std::function<PointEval(const Tensor&)>;

struct GenericIg {
  Tensor attribution;
  double f_x = 0.0;
  double f_baseline = 0.0;
  double gap = 0.0;
};

GenericIg ig_over_function(const EvalFn& eval, const Tensor& sample, const Tensor& baseline,
                           std::size_t m);

EmbeddingAttribution ig_embedding(const ModelWeights& weights, const ModelConfig& config,
                                  const std::vector<int>& tokens, std::size_t class_index,
                                  const PathSpec& spec);

HeadLevelAttribution ig_head_level(const ModelWeights& weights, const ModelConfig& config,
                                   const std::vector<int>& tokens, std::size_t class_index,
                                   std::size_t layer, const PathSpec& spec);

FullAttribution attribute_all(const ModelWeights& weights, const ModelConfig& config,
                              const std::vector<int>& tokens, std::size_t class_index,
                              const PathSpec& spec);

// Per-head sequence sums and the [n_layers x n_heads] summed map.
Tensor sum_over_sequence(const AttributionMap& head_map);
SummedMap assemble_summed_map(const std::vector<AttributionMap>& head_maps_by_layer);

// Reduces a [T x d_model] cut attribution to [T x n_heads] by summing each
// contiguous block of d_model/n_heads channels.
Tensor reduce_head_blocks(const Tensor& channel_map, std::size_t n_heads);

std::string attribution_map_to_json(const AttributionMap& map);
AttributionMap attribution_map_from_json(const std::string& text);
std::string summed_map_to_json(const SummedMap& map);
SummedMap summed_map_from_json(const std::string& text);

const char* baseline_kind_name(BaselineKind kind);
BaselineKind baseline_kind_from_name(const std::string& name);

}  // namespace xprot::attribution
