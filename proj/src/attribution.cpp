#include "xprot/attribution.hpp"

#include <cmath>
#include <utility>

#include <json.hpp>

#include "xprot/error.hpp"

namespace xprot::attribution {

namespace {

using json = nlohmann::ordered_json;

std::vector<std::uint8_t> special_token_flags(std::size_t t_len) {
  std::vector<std::uint8_t> flags(t_len, 0);
  flags.front() = 1;
  flags.back() = 1;
  return flags;
}

}  // namespace

void PathSpec::validate() const {
  if (steps < 1) {
    throw Error(ErrorCode::invalid_argument, "path spec: steps must be >= 1");
  }
}

const char* baseline_kind_name(BaselineKind kind) {
  return kind == BaselineKind::zero ? "zero" : "pad";
}

BaselineKind baseline_kind_from_name(const std::string& name) {
  if (name == "zero") return BaselineKind::zero;
  if (name == "pad") return BaselineKind::pad_token;
  throw Error(ErrorCode::invalid_argument, "unknown baseline kind '" + name + "'");
}

std::vector<Tensor> embedding_path(const Tensor& sample, const Tensor& baseline, std::size_t m) {
  if (!sample.same_shape(baseline)) {
    throw Error(ErrorCode::dimension_mismatch,
                "embedding_path: sample " + sample.shape_string() + " vs baseline " +
                    baseline.shape_string());
  }
  if (m < 1) {
    throw Error(ErrorCode::invalid_argument, "embedding_path: m must be >= 1");
  }
  std::vector<Tensor> points;
  points.reserve(m + 1);
  for (std::size_t k = 0; k <= m; ++k) {
    if (k == 0) {
      points.push_back(baseline);
      continue;
    }
    if (k == m) {
      points.push_back(sample);
      continue;
    }
    const double alpha = static_cast<double>(k) / static_cast<double>(m);
    Tensor p(baseline.shape());
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] = baseline[i] + alpha * (sample[i] - baseline[i]);
    }
    points.push_back(std::move(p));
  }
  return points;
}

Tensor baseline_embedding(const ModelWeights& weights, const ModelConfig& config,
                          const std::vector<int>& tokens, BaselineKind kind) {
  if (kind == BaselineKind::zero) {
    return Tensor({tokens.size(), config.d_model});
  }
  // PAD baseline: keep CLS/SEP framing, replace every residue token with PAD,
  // then embed (position embeddings included).
  std::vector<int> padded = tokens;
  for (std::size_t i = 1; i + 1 < padded.size(); ++i) padded[i] = kPadToken;
  return embed_tokens(weights, config, padded);
}

double completeness_gap(double attribution_total, double f_x, double f_baseline) {
  const double delta = f_x - f_baseline;
  const double abs_gap = std::fabs(attribution_total - delta);
  if (std::fabs(delta) <= 1e-9) return abs_gap;
  return abs_gap / std::fabs(delta);
}

Tensor reduce_head_blocks(const Tensor& channel_map, std::size_t n_heads) {
  const std::size_t t_len = channel_map.rows(), d = channel_map.cols();
  if (n_heads == 0 || d % n_heads != 0) {
    throw Error(ErrorCode::dimension_mismatch,
                "reduce_head_blocks: " + std::to_string(d) + " channels not divisible by " +
                    std::to_string(n_heads) + " heads");
  }
  const std::size_t dh = d / n_heads;
  Tensor out({t_len, n_heads});
  for (std::size_t t = 0; t < t_len; ++t) {
    for (std::size_t h = 0; h < n_heads; ++h) {
      double acc = 0.0;
      for (std::size_t j = 0; j < dh; ++j) acc += channel_map(t, h * dh + j);
      out(t, h) = acc;
    }
  }
  return out;
}

GenericIg ig_over_function(const EvalFn& eval, const Tensor& sample, const Tensor& baseline,
                           std::size_t m) {
  if (!sample.same_shape(baseline)) {
    throw Error(ErrorCode::dimension_mismatch,
                "ig_over_function: sample " + sample.shape_string() + " vs baseline " +
                    baseline.shape_string());
  }
  if (m < 1) {
    throw Error(ErrorCode::invalid_argument, "ig_over_function: m must be >= 1");
  }
  GenericIg out;
  out.attribution = Tensor(sample.shape());
  Tensor prev_point, prev_grad;
  for (std::size_t k = 0; k <= m; ++k) {
    Tensor point;
    if (k == 0) {
      point = baseline;
    } else if (k == m) {
      point = sample;
    } else {
      const double alpha = static_cast<double>(k) / static_cast<double>(m);
      point = Tensor(sample.shape());
      for (std::size_t i = 0; i < point.size(); ++i) {
        point[i] = baseline[i] + alpha * (sample[i] - baseline[i]);
      }
    }
    PointEval e = eval(point);
    if (!e.gradient.all_finite()) {
      throw Error(ErrorCode::numeric_failure,
                  "ig_over_function: non-finite gradient at path index " + std::to_string(k));
    }
    if (k == 0) {
      out.f_baseline = e.value;
    } else {
      for (std::size_t i = 0; i < out.attribution.size(); ++i) {
        out.attribution[i] += 0.5 * (prev_grad[i] + e.gradient[i]) * (point[i] - prev_point[i]);
      }
    }
    if (k == m) out.f_x = e.value;
    prev_point = std::move(point);
    prev_grad = std::move(e.gradient);
  }
  out.gap = completeness_gap(sum_all(out.attribution), out.f_x, out.f_baseline);
  return out;
}

namespace {

struct SweepState {
  double f_prev = 0.0;
  Tensor e_prev;
  Tensor ge_prev;
  std::vector<Tensor> c_prev, s_prev;
  std::vector<Tensor> gc_prev, gs_prev;
};

}  // namespace

FullAttribution attribute_all(const ModelWeights& weights, const ModelConfig& config,
                              const std::vector<int>& tokens, std::size_t class_index,
                              const PathSpec& spec) {
  spec.validate();
  if (class_index >= config.n_classes) {
    throw Error(ErrorCode::invalid_argument, "attribute_all: class index out of range");
  }
  const std::size_t m = spec.steps;
  const std::size_t n_layers = config.n_layers;
  const Tensor sample_e = embed_tokens(weights, config, tokens);
  const Tensor baseline_e = baseline_embedding(weights, config, tokens, spec.baseline);
  const std::size_t t_len = sample_e.rows();
  const std::size_t d = config.d_model;

  Tensor d_logits({config.n_classes});
  d_logits[class_index] = 1.0;

  Tensor embed_attr({t_len, d});
  std::vector<Tensor> head_attr(n_layers, Tensor({t_len, d}));
  std::vector<Tensor> skip_attr(n_layers, Tensor({t_len, d}));

  SweepState prev;
  double f_x = 0.0, f_baseline = 0.0;

  for (std::size_t k = 0; k <= m; ++k) {
    Tensor point;
    if (k == 0) {
      point = baseline_e;
    } else if (k == m) {
      point = sample_e;
    } else {
      const double alpha = static_cast<double>(k) / static_cast<double>(m);
      point = Tensor(sample_e.shape());
      for (std::size_t i = 0; i < point.size(); ++i) {
        point[i] = baseline_e[i] + alpha * (sample_e[i] - baseline_e[i]);
      }
    }

    ForwardCache cache = forward_from_embedding(weights, config, point);
    BackwardResult back = backward(weights, config, cache, d_logits);
    const double f = cache.logits[class_index];
    if (!back.d_embedding.all_finite()) {
      throw Error(ErrorCode::numeric_failure,
                  "attribute_all: non-finite gradient at path index " + std::to_string(k));
    }

    if (k == 0) {
      f_baseline = f;
    } else {
      // Trapezoid in the gradients against telescoping activation deltas:
      // A_i += 0.5 (g_i(k-1) + g_i(k)) (x_i(k) - x_i(k-1)).
      for (std::size_t i = 0; i < embed_attr.size(); ++i) {
        embed_attr[i] += 0.5 * (prev.ge_prev[i] + back.d_embedding[i]) * (point[i] - prev.e_prev[i]);
      }
      for (std::size_t l = 0; l < n_layers; ++l) {
        const Tensor& c_now = cache.layers[l].c;
        const Tensor& s_now = cache.layers[l].s;
        const Tensor& gc_now = back.cuts[l].g_c;
        const Tensor& gs_now = back.cuts[l].g_s;
        Tensor& ha = head_attr[l];
        Tensor& sa = skip_attr[l];
        for (std::size_t i = 0; i < ha.size(); ++i) {
          ha[i] += 0.5 * (prev.gc_prev[l][i] + gc_now[i]) * (c_now[i] - prev.c_prev[l][i]);
          sa[i] += 0.5 * (prev.gs_prev[l][i] + gs_now[i]) * (s_now[i] - prev.s_prev[l][i]);
        }
      }
    }
    if (k == m) f_x = f;

    prev.f_prev = f;
    prev.e_prev = std::move(point);
    prev.ge_prev = std::move(back.d_embedding);
    prev.c_prev.clear();
    prev.s_prev.clear();
    prev.gc_prev.clear();
    prev.gs_prev.clear();
    for (std::size_t l = 0; l < n_layers; ++l) {
      prev.c_prev.push_back(std::move(cache.layers[l].c));
      prev.s_prev.push_back(std::move(cache.layers[l].s));
      prev.gc_prev.push_back(std::move(back.cuts[l].g_c));
      prev.gs_prev.push_back(std::move(back.cuts[l].g_s));
    }
  }

  FullAttribution out;
  const auto flags = special_token_flags(t_len);

  out.embedding.f_x = f_x;
  out.embedding.f_baseline = f_baseline;
  out.embedding.gap = completeness_gap(sum_all(embed_attr), f_x, f_baseline);
  out.embedding.map.kind = AttributionMap::Kind::embedding;
  out.embedding.map.values = std::move(embed_attr);
  out.embedding.map.class_index = class_index;
  out.embedding.map.special_token = flags;
  out.embedding.map.steps = m;
  out.embedding.map.baseline = spec.baseline;
  out.embedding.map.completeness_gap = out.embedding.gap;
  out.embedding.per_token = reduce(out.embedding.map.values, 1, Reduce::sum);

  out.summed.values = Tensor({n_layers, config.n_heads});
  out.summed.class_index = class_index;
  out.layers.resize(n_layers);
  for (std::size_t l = 0; l < n_layers; ++l) {
    HeadLevelAttribution& h = out.layers[l];
    h.f_x = f_x;
    h.f_baseline = f_baseline;
    h.gap = completeness_gap(sum_all(head_attr[l]) + sum_all(skip_attr[l]), f_x, f_baseline);
    h.head_channels = head_attr[l];
    h.skip_map = std::move(skip_attr[l]);
    h.head_map.kind = AttributionMap::Kind::head_level;
    h.head_map.layer = l;
    h.head_map.values = reduce_head_blocks(h.head_channels, config.n_heads);
    h.head_map.class_index = class_index;
    h.head_map.special_token = flags;
    h.head_map.steps = m;
    h.head_map.baseline = spec.baseline;
    h.head_map.completeness_gap = h.gap;
    for (std::size_t hd = 0; hd < config.n_heads; ++hd) {
      double acc = 0.0;
      for (std::size_t t = 0; t < t_len; ++t) acc += h.head_map.values(t, hd);
      out.summed.values(l, hd) = acc;
    }
  }
  return out;
}

EmbeddingAttribution ig_embedding(const ModelWeights& weights, const ModelConfig& config,
                                  const std::vector<int>& tokens, std::size_t class_index,
                                  const PathSpec& spec) {
  return attribute_all(weights, config, tokens, class_index, spec).embedding;
}

HeadLevelAttribution ig_head_level(const ModelWeights& weights, const ModelConfig& config,
                                   const std::vector<int>& tokens, std::size_t class_index,
                                   std::size_t layer, const PathSpec& spec) {
  if (layer >= config.n_layers) {
    throw Error(ErrorCode::invalid_argument,
                "ig_head_level: layer " + std::to_string(layer) + " out of range");
  }
  FullAttribution full = attribute_all(weights, config, tokens, class_index, spec);
  return std::move(full.layers[layer]);
}

Tensor sum_over_sequence(const AttributionMap& head_map) {
  if (head_map.kind != AttributionMap::Kind::head_level) {
    throw Error(ErrorCode::invalid_argument, "sum_over_sequence: expected a head-level map");
  }
  return reduce(head_map.values, 0, Reduce::sum);
}

SummedMap assemble_summed_map(const std::vector<AttributionMap>& head_maps_by_layer) {
  if (head_maps_by_layer.empty()) {
    throw Error(ErrorCode::invalid_argument, "assemble_summed_map: no maps given");
  }
  const std::size_t n_layers = head_maps_by_layer.size();
  const std::size_t n_heads = head_maps_by_layer.front().values.cols();
  SummedMap out;
  out.protein_id = head_maps_by_layer.front().protein_id;
  out.class_index = head_maps_by_layer.front().class_index;
  out.values = Tensor({n_layers, n_heads});
  for (std::size_t l = 0; l < n_layers; ++l) {
    const AttributionMap& map = head_maps_by_layer[l];
    if (map.kind != AttributionMap::Kind::head_level || map.layer != l) {
      throw Error(ErrorCode::invalid_argument,
                  "assemble_summed_map: missing or out-of-order map for layer " + std::to_string(l));
    }
    const Tensor sums = sum_over_sequence(map);
    for (std::size_t h = 0; h < n_heads; ++h) out.values(l, h) = sums[h];
  }
  return out;
}

namespace {

json values_to_json(const Tensor& values) {
  json rows = json::array();
  for (std::size_t i = 0; i < values.rows(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < values.cols(); ++j) row.push_back(values(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Tensor values_from_json(const json& rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.at(0).size();
  Tensor out({r, c});
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out(i, j) = rows.at(i).at(j).get<double>();
  }
  return out;
}

}  // namespace

std::string attribution_map_to_json(const AttributionMap& map) {
  json j;
  j["protein_id"] = map.protein_id;
  j["class"] = map.class_index;
  j["kind"] = map.kind == AttributionMap::Kind::embedding ? "embedding" : "head_level";
  if (map.kind == AttributionMap::Kind::head_level) j["layer"] = map.layer;
  j["steps"] = map.steps;
  j["baseline"] = baseline_kind_name(map.baseline);
  j["completeness_gap"] = map.completeness_gap;
  j["values"] = values_to_json(map.values);
  json flags = json::array();
  for (std::uint8_t f : map.special_token) flags.push_back(static_cast<int>(f));
  j["token_flags"] = flags;
  return j.dump();
}

AttributionMap attribution_map_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("attribution map: ") + e.what());
  }
  AttributionMap map;
  try {
    map.protein_id = j.at("protein_id").get<std::string>();
    map.class_index = j.at("class").get<std::size_t>();
    const std::string kind = j.at("kind").get<std::string>();
    map.kind = kind == "embedding" ? AttributionMap::Kind::embedding : AttributionMap::Kind::head_level;
    map.layer = j.value("layer", std::size_t{0});
    map.steps = j.at("steps").get<std::size_t>();
    map.baseline = baseline_kind_from_name(j.at("baseline").get<std::string>());
    map.completeness_gap = j.at("completeness_gap").get<double>();
    map.values = values_from_json(j.at("values"));
    for (const auto& f : j.at("token_flags")) {
      map.special_token.push_back(static_cast<std::uint8_t>(f.get<int>()));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("attribution map: ") + e.what());
  }
  return map;
}

std::string summed_map_to_json(const SummedMap& map) {
  json j;
  j["protein_id"] = map.protein_id;
  j["class"] = map.class_index;
  j["n_layers"] = map.values.rows();
  j["n_heads"] = map.values.cols();
  j["values"] = values_to_json(map.values);
  return j.dump();
}

SummedMap summed_map_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("summed map: ") + e.what());
  }
  SummedMap map;
  try {
    map.protein_id = j.at("protein_id").get<std::string>();
    map.class_index = j.at("class").get<std::size_t>();
    map.values = values_from_json(j.at("values"));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("summed map: ") + e.what());
  }
  return map;
}

}  // namespace xprot::attribution
