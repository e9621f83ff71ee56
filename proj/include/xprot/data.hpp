#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "xprot/rng.hpp"

namespace xprot::data {

enum class Split { train, valid, test };

inline const std::vector<std::string>& annotation_types() {
  static const std::vector<std::string> types = {
      "active_site", "binding_site", "transmembrane", "motif", "prosite_pattern"};
  return types;
}

bool is_annotation_type(const std::string& name);

struct ProteinRecord {
  std::string id;
  std::string sequence;
  std::set<std::string> labels;
  std::map<std::string, std::vector<std::uint8_t>> annotations;  // type -> per-residue mask
  Split split = Split::train;
};

struct Dataset {
  std::vector<ProteinRecord> records;
  std::vector<std::string> class_vocab;  // sorted, deterministic
  std::vector<std::string> warnings;

  const ProteinRecord* find(const std::string& id) const;
  std::size_t class_index(const std::string& class_id) const;  // throws if unknown
  std::vector<std::size_t> split_indices(Split split) const;
  void rebuild_class_vocab();
};

// FASTA: ">" header lines (id = first whitespace-delimited token), wrapped
// sequence lines; sequences are uppercased.
std::vector<ProteinRecord> parse_fasta(const std::string& text);

// Annotations TSV: protein_id, annotation_type, start, end with 1-based
// inclusive coordinates; overlapping ranges union into the mask.
void parse_annotations(const std::string& text, Dataset& dataset);

// Labels TSV: protein_id, class_id; duplicates deduplicate.
void parse_labels(const std::string& text, Dataset& dataset);

// Splits TSV: protein_id, split (train|valid|test).
void parse_splits(const std::string& text, Dataset& dataset);

std::string serialize_fasta(const Dataset& dataset);
std::string serialize_labels(const Dataset& dataset);
std::string serialize_annotations(const Dataset& dataset);
std::string serialize_splits(const Dataset& dataset);

// Directory layout: sequences.fasta, labels.tsv, annotations.tsv, splits.tsv.
Dataset load_dataset(const std::string& dir);
void save_dataset(const Dataset& dataset, const std::string& dir);

struct MotifSpec {
  std::string class_id;
  std::string motif;
  double probability = 0.5;
};

struct SynthConfig {
  std::size_t n_proteins = 2000;
  std::size_t min_length = 30;
  std::size_t max_length = 60;
  std::vector<MotifSpec> motifs;
  std::uint64_t seed = 0;
  double train_fraction = 0.8;
  double valid_fraction = 0.1;
  double test_fraction = 0.1;
  std::string negative_class = "none";

  void validate() const;
};

std::string synth_config_to_json(const SynthConfig& config);
SynthConfig synth_config_from_json(const std::string& text);

// Planted-motif corpus: uniform random sequences; at most one motif is
// inserted per protein (first spec whose probability fires); the inserted
// span becomes a "motif" annotation mask. Sequences are rejection-sampled so
// no configured motif occurs anywhere except the planted span.
Dataset generate_synthetic(const SynthConfig& config);

}  // namespace xprot::data
