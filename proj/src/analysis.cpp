#include "xprot/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "xprot/error.hpp"
#include "xprot/stats.hpp"

namespace xprot::analysis {

namespace {

using json = nlohmann::ordered_json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Residue-row relevance sequence for one head: rows 1..T-2 of the map.
std::vector<double> residue_column(const Tensor& values, std::size_t column) {
  std::vector<double> out;
  out.reserve(values.rows() - 2);
  for (std::size_t t = 1; t + 1 < values.rows(); ++t) out.push_back(values(t, column));
  return out;
}

}  // namespace

CorrelationMatrix correlate_protein(const std::vector<attribution::AttributionMap>& head_maps,
                                    const std::vector<std::uint8_t>& annotation_mask,
                                    const std::string& annotation_type) {
  if (head_maps.empty()) {
    throw Error(ErrorCode::invalid_argument, "correlate_protein: no head maps");
  }
  const std::size_t n_layers = head_maps.size();
  const std::size_t n_heads = head_maps.front().values.cols();
  const std::size_t n_res = head_maps.front().values.rows() - 2;
  if (annotation_mask.size() < n_res) {
    throw Error(ErrorCode::dimension_mismatch,
                "correlate_protein: mask length " + std::to_string(annotation_mask.size()) +
                    " shorter than " + std::to_string(n_res) + " residue tokens");
  }
  // Crop reconciliation: the tokenizer kept the first n_res residues.
  const std::vector<std::uint8_t> mask(annotation_mask.begin(), annotation_mask.begin() + n_res);

  CorrelationMatrix out;
  out.protein_id = head_maps.front().protein_id;
  out.annotation_type = annotation_type;
  out.r = Tensor({n_layers, n_heads});
  out.valid.assign(n_layers * n_heads, 0);
  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto& map = head_maps[l];
    if (map.values.rows() != n_res + 2 || map.values.cols() != n_heads) {
      throw Error(ErrorCode::dimension_mismatch, "correlate_protein: inconsistent map shapes");
    }
    for (std::size_t h = 0; h < n_heads; ++h) {
      const auto r = stats::point_biserial(residue_column(map.values, h), mask);
      if (r.has_value()) {
        out.r(l, h) = *r;
        out.valid[l * n_heads + h] = 1;
      } else {
        out.r(l, h) = kNaN;
      }
    }
  }
  return out;
}

namespace {

SignificanceMatrix finish_significance(Tensor p_raw, std::vector<std::uint8_t> tested,
                                       std::vector<std::size_t> cell_n, double alpha) {
  SignificanceMatrix out;
  const std::size_t cells = p_raw.size();
  std::vector<double> tested_p;
  std::vector<std::size_t> tested_idx;
  for (std::size_t i = 0; i < cells; ++i) {
    if (tested[i]) {
      tested_p.push_back(p_raw[i]);
      tested_idx.push_back(i);
    }
  }
  if (tested_p.empty()) {
    throw Error(ErrorCode::empty_result, "significance: no testable cells");
  }
  const std::vector<double> adjusted = stats::bh_adjust(tested_p);
  out.p_adjusted = Tensor(p_raw.shape(), kNaN);
  for (std::size_t k = 0; k < tested_idx.size(); ++k) {
    out.p_adjusted[tested_idx[k]] = adjusted[k];
  }
  out.display = Tensor(p_raw.shape(), kNaN);
  out.mask.assign(cells, 0);
  for (std::size_t i = 0; i < cells; ++i) {
    if (tested[i] && out.p_adjusted[i] < alpha) {
      out.mask[i] = 1;
      out.display[i] = -std::log10(out.p_adjusted[i]);
    }
  }
  out.p_raw = std::move(p_raw);
  out.tested = std::move(tested);
  out.cell_n = std::move(cell_n);
  out.bh_family_size = tested_p.size();
  out.alpha = alpha;
  return out;
}

}  // namespace

SignificanceMatrix population_correlation_significance(
    const std::vector<CorrelationMatrix>& matrices, double alpha, std::size_t min_n) {
  if (matrices.empty()) {
    throw Error(ErrorCode::empty_result, "population_correlation_significance: no matrices");
  }
  const std::size_t n_layers = matrices.front().r.rows();
  const std::size_t n_heads = matrices.front().r.cols();
  Tensor p_raw({n_layers, n_heads}, kNaN);
  std::vector<std::uint8_t> tested(n_layers * n_heads, 0);
  std::vector<std::size_t> cell_n(n_layers * n_heads, 0);

  for (std::size_t l = 0; l < n_layers; ++l) {
    for (std::size_t h = 0; h < n_heads; ++h) {
      std::vector<double> rs;
      for (const auto& m : matrices) {
        if (m.r.rows() != n_layers || m.r.cols() != n_heads) {
          throw Error(ErrorCode::dimension_mismatch,
                      "population_correlation_significance: inconsistent matrix shapes");
        }
        if (m.valid[l * n_heads + h]) rs.push_back(m.r(l, h));
      }
      cell_n[l * n_heads + h] = rs.size();
      if (rs.size() < min_n) continue;  // flagged untested
      try {
        const auto t = stats::t_test_one_sample(rs, 0.0, stats::Alternative::greater);
        p_raw(l, h) = t.p_value;
        tested[l * n_heads + h] = 1;
      } catch (const Error&) {
        // zero variance: surfaced as untested, never silently significant
      }
    }
  }
  SignificanceMatrix out = finish_significance(std::move(p_raw), std::move(tested),
                                               std::move(cell_n), alpha);
  out.test_kind = "t";
  out.n_proteins = matrices.size();
  return out;
}

SignificanceMatrix population_relevance_significance(
    const std::vector<attribution::SummedMap>& maps, double alpha) {
  if (maps.empty()) {
    throw Error(ErrorCode::empty_result, "population_relevance_significance: no maps");
  }
  const std::size_t n_layers = maps.front().values.rows();
  const std::size_t n_heads = maps.front().values.cols();
  Tensor p_raw({n_layers, n_heads}, kNaN);
  std::vector<std::uint8_t> tested(n_layers * n_heads, 0);
  std::vector<std::size_t> cell_n(n_layers * n_heads, 0);

  for (std::size_t l = 0; l < n_layers; ++l) {
    for (std::size_t h = 0; h < n_heads; ++h) {
      std::vector<double> values;
      for (const auto& m : maps) {
        if (m.values.rows() != n_layers || m.values.cols() != n_heads) {
          throw Error(ErrorCode::dimension_mismatch,
                      "population_relevance_significance: inconsistent map shapes");
        }
        values.push_back(m.values(l, h));
      }
      cell_n[l * n_heads + h] = values.size();
      try {
        const auto w = stats::wilcoxon_signed_rank(values, stats::Alternative::greater);
        p_raw(l, h) = w.p_value;
        tested[l * n_heads + h] = 1;
      } catch (const Error&) {
        // all-zero cell: untested
      }
    }
  }
  SignificanceMatrix out = finish_significance(std::move(p_raw), std::move(tested),
                                               std::move(cell_n), alpha);
  out.test_kind = "wilcoxon";
  out.n_proteins = maps.size();
  return out;
}

OverlayMatrix overlay(const SignificanceMatrix& correlation_sig,
                      const SignificanceMatrix& relevance_sig) {
  if (!correlation_sig.display.same_shape(relevance_sig.display)) {
    throw Error(ErrorCode::dimension_mismatch,
                "overlay: correlation " + correlation_sig.display.shape_string() +
                    " vs relevance " + relevance_sig.display.shape_string());
  }
  OverlayMatrix out;
  out.display = Tensor(correlation_sig.display.shape(), kNaN);
  out.mask.assign(correlation_sig.mask.size(), 0);
  for (std::size_t i = 0; i < out.mask.size(); ++i) {
    if (correlation_sig.mask[i] && relevance_sig.mask[i]) {
      out.mask[i] = 1;
      out.display[i] = correlation_sig.display[i];
    }
  }
  return out;
}

std::vector<std::uint8_t> rotate_mask(const std::vector<std::uint8_t>& mask, std::size_t offset) {
  if (mask.empty()) return mask;
  std::vector<std::uint8_t> out(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    out[(i + offset) % mask.size()] = mask[i];
  }
  return out;
}

std::vector<std::size_t> eligible_proteins(const data::Dataset& dataset,
                                           const std::string& class_name,
                                           const std::vector<std::string>& annotation_types) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < dataset.records.size(); ++i) {
    const auto& record = dataset.records[i];
    if (record.split != data::Split::test) continue;
    if (!record.labels.count(class_name)) continue;
    const std::size_t cropped = std::min(record.sequence.size(), kMaxResidues);
    bool annotated = false;
    for (const auto& type : annotation_types) {
      const auto it = record.annotations.find(type);
      if (it == record.annotations.end()) continue;
      for (std::size_t p = 0; p < cropped && p < it->second.size(); ++p) {
        if (it->second[p]) {
          annotated = true;
          break;
        }
      }
      if (annotated) break;
    }
    if (annotated) out.push_back(i);
  }
  return out;
}

AnalysisReport analyze_attributions(
    const std::vector<ProteinAttribution>& attributions, const data::Dataset& dataset,
    const std::string& class_name, const std::vector<std::string>& annotation_types,
    double alpha, std::size_t min_n) {
  if (attributions.empty()) {
    throw Error(ErrorCode::empty_result, "analyze_attributions: no attributions");
  }
  AnalysisReport report;
  report.class_name = class_name;
  report.alpha = alpha;
  report.n_layers = attributions.front().head_maps.size();
  report.n_heads = attributions.front().head_maps.front().values.cols();
  report.class_index = attributions.front().summed.class_index;
  report.steps = attributions.front().head_maps.front().steps;
  report.baseline = attribution::baseline_kind_name(attributions.front().head_maps.front().baseline);

  // Relevance track: one Wilcoxon matrix per class over all attributed proteins.
  std::vector<attribution::SummedMap> summed;
  summed.reserve(attributions.size());
  for (const auto& a : attributions) summed.push_back(a.summed);
  report.relevance_sig = population_relevance_significance(summed, alpha);
  report.relevance_sig.class_name = class_name;

  // Correlation track, per annotation type over the annotated subset.
  std::vector<double> embedding_p;
  std::vector<std::size_t> embedding_test_idx;
  for (const auto& type : annotation_types) {
    std::vector<CorrelationMatrix> matrices;
    std::vector<double> embedding_rs;
    for (const auto& a : attributions) {
      const auto* record = dataset.find(a.protein_id);
      if (!record) {
        throw Error(ErrorCode::invalid_argument,
                    "analyze_attributions: protein '" + a.protein_id + "' not in dataset");
      }
      const auto it = record->annotations.find(type);
      if (it == record->annotations.end()) continue;
      const std::size_t n_res = a.head_maps.front().values.rows() - 2;
      if (it->second.size() < n_res) {
        throw Error(ErrorCode::dimension_mismatch,
                    "analyze_attributions: mask shorter than residue tokens for '" +
                        a.protein_id + "'");
      }
      const std::vector<std::uint8_t> mask(it->second.begin(), it->second.begin() + n_res);
      bool any = false, all = true;
      for (auto b : mask) {
        any = any || b;
        all = all && b;
      }
      if (!any) continue;  // annotations entirely beyond the crop
      matrices.push_back(correlate_protein(a.head_maps, mask, type));
      // Embedding level: residue-token relevance against the same mask.
      std::vector<double> per_token;
      for (std::size_t t = 1; t + 1 < a.per_token_embedding.size(); ++t) {
        per_token.push_back(a.per_token_embedding[t]);
      }
      if (!all) {
        const auto r = stats::point_biserial(per_token, mask);
        if (r.has_value()) embedding_rs.push_back(*r);
      }
    }

    EmbeddingLevelTest test;
    test.annotation_type = type;
    test.n_proteins = matrices.size();
    if (matrices.empty()) {
      report.skipped_types.push_back(type);
      report.warnings.push_back("annotation type '" + type + "' skipped: no qualifying proteins");
      continue;
    }
    report.sample_counts[type] = matrices.size();
    try {
      SignificanceMatrix corr = population_correlation_significance(matrices, alpha, min_n);
      corr.class_name = class_name;
      corr.annotation_type = type;
      report.overlays[type] = overlay(corr, report.relevance_sig);
      report.correlation_sig[type] = std::move(corr);
    } catch (const Error& e) {
      report.warnings.push_back("correlation significance for '" + type + "' failed: " + e.what());
    }
    if (embedding_rs.size() >= 2) {
      try {
        const auto t = stats::t_test_one_sample(embedding_rs, 0.0, stats::Alternative::greater);
        test.tested = true;
        test.t_statistic = t.statistic;
        test.p_raw = t.p_value;
        test.n_proteins = embedding_rs.size();
      } catch (const Error&) {
        report.warnings.push_back("embedding-level t-test for '" + type + "' skipped: zero variance");
      }
    }
    report.embedding_level.push_back(test);
    if (test.tested) {
      embedding_p.push_back(test.p_raw);
      embedding_test_idx.push_back(report.embedding_level.size() - 1);
    }
  }

  // BH across the annotation types actually tested at the embedding level.
  if (!embedding_p.empty()) {
    const auto adjusted = stats::bh_adjust(embedding_p);
    for (std::size_t i = 0; i < adjusted.size(); ++i) {
      auto& t = report.embedding_level[embedding_test_idx[i]];
      t.p_adjusted = adjusted[i];
      t.significant = adjusted[i] < alpha;
    }
  }
  return report;
}

namespace {

ProteinAttribution attribute_protein(const ModelWeights& weights, const ModelConfig& config,
                                     const data::ProteinRecord& record, std::size_t class_index,
                                     const attribution::PathSpec& spec) {
  const auto tokens = tokenize(record.sequence);
  attribution::FullAttribution full =
      attribution::attribute_all(weights, config, tokens, class_index, spec);
  ProteinAttribution out;
  out.protein_id = record.id;
  out.per_token_embedding = full.embedding.per_token;
  for (auto& layer : full.layers) {
    layer.head_map.protein_id = record.id;
    out.head_maps.push_back(std::move(layer.head_map));
  }
  full.summed.protein_id = record.id;
  out.summed = std::move(full.summed);
  return out;
}

}  // namespace

std::vector<ProteinAttribution> compute_attributions(
    const ModelWeights& weights, const ModelConfig& config, const data::Dataset& dataset,
    const std::vector<std::size_t>& record_indices, std::size_t class_index,
    const attribution::PathSpec& spec, std::size_t jobs) {
  std::vector<ProteinAttribution> attributions(record_indices.size());
  if (jobs <= 1) {
    for (std::size_t i = 0; i < record_indices.size(); ++i) {
      attributions[i] =
          attribute_protein(weights, config, dataset.records[record_indices[i]], class_index, spec);
    }
    return attributions;
  }
  std::vector<std::thread> workers;
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(jobs);
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&, w]() {
      try {
        for (std::size_t i = next.fetch_add(1); i < record_indices.size();
             i = next.fetch_add(1)) {
          attributions[i] = attribute_protein(weights, config, dataset.records[record_indices[i]],
                                              class_index, spec);
        }
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : workers) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return attributions;
}

AnalysisReport run_class_analysis(const ModelWeights& weights, const ModelConfig& config,
                                  const data::Dataset& dataset, const std::string& class_name,
                                  const std::vector<std::string>& annotation_types,
                                  const attribution::PathSpec& spec, double alpha,
                                  std::size_t jobs) {
  const std::size_t class_index = dataset.class_index(class_name);
  std::vector<std::size_t> selected = eligible_proteins(dataset, class_name, annotation_types);
  if (selected.empty()) {
    throw Error(ErrorCode::empty_result,
                "run_class_analysis: no test-split proteins labeled '" + class_name +
                    "' with annotated residues");
  }
  // Deterministic order regardless of worker count.
  std::sort(selected.begin(), selected.end(), [&](std::size_t a, std::size_t b) {
    return dataset.records[a].id < dataset.records[b].id;
  });

  const std::vector<ProteinAttribution> attributions =
      compute_attributions(weights, config, dataset, selected, class_index, spec, jobs);

  AnalysisReport report =
      analyze_attributions(attributions, dataset, class_name, annotation_types, alpha);
  report.class_index = class_index;
  return report;
}

namespace {

json matrix_to_json(const Tensor& values) {
  json rows = json::array();
  for (std::size_t i = 0; i < values.rows(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < values.cols(); ++j) {
      const double v = values(i, j);
      if (std::isnan(v)) {
        row.push_back(nullptr);
      } else {
        row.push_back(v);
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

json significance_to_json(const SignificanceMatrix& m) {
  json j;
  j["test_kind"] = m.test_kind;
  j["class"] = m.class_name;
  if (!m.annotation_type.empty()) j["annotation_type"] = m.annotation_type;
  j["n_proteins"] = m.n_proteins;
  j["alpha"] = m.alpha;
  j["bh_family_size"] = m.bh_family_size;
  j["p_raw"] = matrix_to_json(m.p_raw);
  j["p_adjusted"] = matrix_to_json(m.p_adjusted);
  j["display"] = matrix_to_json(m.display);
  j["mask"] = m.mask;
  j["tested"] = m.tested;
  j["cell_n"] = m.cell_n;
  return j;
}

}  // namespace

std::string report_to_json(const AnalysisReport& report) {
  json j;
  j["class"] = report.class_name;
  j["class_index"] = report.class_index;
  j["alpha"] = report.alpha;
  j["n_layers"] = report.n_layers;
  j["n_heads"] = report.n_heads;
  j["steps"] = report.steps;
  j["baseline"] = report.baseline;

  json embedding = json::array();
  for (const auto& t : report.embedding_level) {
    json e;
    e["annotation_type"] = t.annotation_type;
    e["n_proteins"] = t.n_proteins;
    e["tested"] = t.tested;
    if (t.tested) {
      e["t_statistic"] = t.t_statistic;
      e["p_raw"] = t.p_raw;
      e["p_adjusted"] = t.p_adjusted;
      e["significant"] = t.significant;
    }
    embedding.push_back(std::move(e));
  }
  j["embedding_level"] = embedding;
  j["relevance_significance"] = significance_to_json(report.relevance_sig);

  json per_type = json::object();
  for (const auto& [type, corr] : report.correlation_sig) {
    json entry;
    entry["n_proteins"] = report.sample_counts.count(type) ? report.sample_counts.at(type) : 0;
    entry["correlation_significance"] = significance_to_json(corr);
    const auto ov = report.overlays.find(type);
    if (ov != report.overlays.end()) {
      entry["overlay_display"] = matrix_to_json(ov->second.display);
      entry["overlay_mask"] = ov->second.mask;
    }
    per_type[type] = std::move(entry);
  }
  j["per_type"] = per_type;
  j["skipped_types"] = report.skipped_types;
  j["warnings"] = report.warnings;
  return j.dump(2);
}

namespace {

std::string matrix_csv(const Tensor& display) {
  std::ostringstream out;
  out << "layer";
  for (std::size_t h = 0; h < display.cols(); ++h) out << ",head" << h;
  out << "\n";
  for (std::size_t l = 0; l < display.rows(); ++l) {
    out << l;
    for (std::size_t h = 0; h < display.cols(); ++h) {
      out << ",";
      const double v = display(l, h);
      if (!std::isnan(v)) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        out << buf;
      }
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace

std::string significance_matrix_to_csv(const SignificanceMatrix& matrix) {
  return matrix_csv(matrix.display);
}

std::string overlay_to_csv(const OverlayMatrix& matrix) { return matrix_csv(matrix.display); }

}  // namespace xprot::analysis
