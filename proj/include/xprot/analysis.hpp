#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "xprot/attribution.hpp"
#include "xprot/data.hpp"
#include "xprot/model.hpp"
#include "xprot/tensor.hpp"

namespace xprot::analysis {

struct CorrelationMatrix {
  std::string protein_id;
  std::string annotation_type;
  Tensor r;                         // [n_layers x n_heads]
  std::vector<std::uint8_t> valid;  // 0 where the correlation is undefined
};

struct SignificanceMatrix {
  Tensor p_raw;                      // [L x H]; NaN where untested
  Tensor p_adjusted;                 // BH-adjusted; NaN where untested
  Tensor display;                    // -log10(p_adj) where significant, NaN elsewhere
  std::vector<std::uint8_t> mask;    // 1 where p_adj < alpha
  std::vector<std::uint8_t> tested;  // 1 where a test ran
  std::vector<std::size_t> cell_n;   // per-cell sample count
  std::string test_kind;             // "t" or "wilcoxon"
  std::string class_name;
  std::string annotation_type;       // empty for the relevance matrix
  std::size_t n_proteins = 0;
  std::size_t bh_family_size = 0;    // p-values entering the BH adjustment
  double alpha = 0.05;
};

struct OverlayMatrix {
  Tensor display;                  // correlation display masked by relevance
  std::vector<std::uint8_t> mask;  // corr mask AND relevance mask
};

// Per-protein correlation of each head's relevance sequence (residue rows
// only) against the annotation mask truncated to the cropped length.
CorrelationMatrix correlate_protein(const std::vector<attribution::AttributionMap>& head_maps,
                                    const std::vector<std::uint8_t>& annotation_mask,
                                    const std::string& annotation_type);

// One-sided t-test (greater, mu0 = 0) per cell over defined correlations;
// cells with fewer than min_n defined values (or zero variance) are flagged
// untested. BH runs over the tested cells of the condition.
SignificanceMatrix population_correlation_significance(
    const std::vector<CorrelationMatrix>& matrices, double alpha = 0.05, std::size_t min_n = 3);

// One-sided Wilcoxon (greater) per cell over per-protein summed relevances.
SignificanceMatrix population_relevance_significance(
    const std::vector<attribution::SummedMap>& maps, double alpha = 0.05);

OverlayMatrix overlay(const SignificanceMatrix& correlation_sig,
                      const SignificanceMatrix& relevance_sig);

// Embedding-level population test for one annotation type: one point-biserial
// correlation per protein (per-token relevance vs mask), then a one-sided
// t-test across proteins.
struct EmbeddingLevelTest {
  std::string annotation_type;
  std::size_t n_proteins = 0;
  double t_statistic = 0.0;
  double p_raw = 1.0;
  double p_adjusted = 1.0;  // BH across the annotation types of the report
  bool significant = false;
  bool tested = false;
};

// Attribution inputs for one protein, as produced by attribute_all or loaded
// back from attribution JSON files.
struct ProteinAttribution {
  std::string protein_id;
  Tensor per_token_embedding;  // [T] channel-summed embedding relevance
  std::vector<attribution::AttributionMap> head_maps;  // one per layer
  attribution::SummedMap summed;
};

struct AnalysisReport {
  std::string class_name;
  std::size_t class_index = 0;
  double alpha = 0.05;
  std::size_t n_layers = 0;
  std::size_t n_heads = 0;
  std::size_t steps = 0;
  std::string baseline;
  std::vector<EmbeddingLevelTest> embedding_level;  // one per annotation type
  SignificanceMatrix relevance_sig;                 // shared across types
  std::map<std::string, SignificanceMatrix> correlation_sig;  // per type
  std::map<std::string, OverlayMatrix> overlays;              // per type
  std::map<std::string, std::size_t> sample_counts;           // per type
  std::vector<std::string> skipped_types;
  std::vector<std::string> warnings;
};

// Core of the pipeline, decoupled from where attributions come from.
AnalysisReport analyze_attributions(
    const std::vector<ProteinAttribution>& attributions, const data::Dataset& dataset,
    const std::string& class_name, const std::vector<std::string>& annotation_types,
    double alpha, std::size_t min_n = 3);

// Full attribution for a set of dataset records. jobs > 1 fans the work out
// over a thread pool sharing the immutable weights; the output order always
// follows the (sorted) input order.
std::vector<ProteinAttribution> compute_attributions(
    const ModelWeights& weights, const ModelConfig& config, const data::Dataset& dataset,
    const std::vector<std::size_t>& record_indices, std::size_t class_index,
    const attribution::PathSpec& spec, std::size_t jobs = 1);

// Convenience end-to-end path: selects eligible test-split proteins, runs
// attribution, then analyzes. jobs > 1 fans protein attribution out over a
// worker pool; results are merged in sorted protein-id order.
AnalysisReport run_class_analysis(const ModelWeights& weights, const ModelConfig& config,
                                  const data::Dataset& dataset, const std::string& class_name,
                                  const std::vector<std::string>& annotation_types,
                                  const attribution::PathSpec& spec, double alpha,
                                  std::size_t jobs = 1);

// Eligibility: test split, labeled with the class, and at least one annotated
// residue of at least one requested type within the cropped window.
std::vector<std::size_t> eligible_proteins(const data::Dataset& dataset,
                                           const std::string& class_name,
                                           const std::vector<std::string>& annotation_types);

// Cyclic rotation of an annotation mask; the negative-control transform.
std::vector<std::uint8_t> rotate_mask(const std::vector<std::uint8_t>& mask, std::size_t offset);

std::string report_to_json(const AnalysisReport& report);
std::string significance_matrix_to_csv(const SignificanceMatrix& matrix);
std::string overlay_to_csv(const OverlayMatrix& matrix);

}  // namespace xprot::analysis
