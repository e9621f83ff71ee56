#include "xprot/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "xprot/error.hpp"

namespace xprot::data {

namespace {

constexpr const char* kAlphabet = "ACDEFGHIKLMNPQRSTVWY";
constexpr std::size_t kAlphabetSize = 20;

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::string current;
  for (char c : text) {
    if (c == '\n') {
      if (!current.empty() && current.back() == '\r') current.pop_back();
      lines.push_back(current);
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) {
    if (current.back() == '\r') current.pop_back();
    lines.push_back(current);
  }
  return lines;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  for (char c : line) {
    if (c == '\t') {
      fields.push_back(current);
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  fields.push_back(current);
  return fields;
}

[[noreturn]] void row_error(const std::string& what, std::size_t line_no) {
  throw Error(ErrorCode::parse_error, what + " (line " + std::to_string(line_no) + ")");
}

// Iterates data rows of a TSV: skips blank and "#" lines, validates the
// header, and passes 1-based line numbers through.
template <typename F>
void for_each_tsv_row(const std::string& text, const std::vector<std::string>& expected_header,
                      F&& fn) {
  const auto lines = split_lines(text);
  bool header_seen = false;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    if (line.empty() || line[0] == '#') continue;
    const auto fields = split_tabs(line);
    if (!header_seen) {
      if (fields != expected_header) {
        row_error("expected header " + expected_header[0] + "...", i + 1);
      }
      header_seen = true;
      continue;
    }
    if (fields.size() != expected_header.size()) {
      row_error("expected " + std::to_string(expected_header.size()) + " columns", i + 1);
    }
    fn(fields, i + 1);
  }
  if (!header_seen && !lines.empty()) {
    bool any_content = false;
    for (const auto& l : lines) {
      if (!l.empty() && l[0] != '#') any_content = true;
    }
    if (any_content) {
      throw Error(ErrorCode::parse_error, "missing header row");
    }
  }
}

std::size_t parse_position(const std::string& field, std::size_t line_no) {
  if (field.empty() || !std::all_of(field.begin(), field.end(),
                                    [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
    row_error("expected a positive integer, got '" + field + "'", line_no);
  }
  return static_cast<std::size_t>(std::stoull(field));
}

ProteinRecord* find_mutable(Dataset& dataset, const std::string& id) {
  for (auto& r : dataset.records) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::io_error, "cannot open " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::io_error, "cannot write " + path);
  }
  out << content;
}

}  // namespace

bool is_annotation_type(const std::string& name) {
  const auto& types = annotation_types();
  return std::find(types.begin(), types.end(), name) != types.end();
}

const ProteinRecord* Dataset::find(const std::string& id) const {
  for (const auto& r : records) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

std::size_t Dataset::class_index(const std::string& class_id) const {
  const auto it = std::find(class_vocab.begin(), class_vocab.end(), class_id);
  if (it == class_vocab.end()) {
    throw Error(ErrorCode::invalid_argument, "unknown class id '" + class_id + "'");
  }
  return static_cast<std::size_t>(it - class_vocab.begin());
}

std::vector<std::size_t> Dataset::split_indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].split == split) out.push_back(i);
  }
  return out;
}

void Dataset::rebuild_class_vocab() {
  std::set<std::string> all;
  for (const auto& r : records) all.insert(r.labels.begin(), r.labels.end());
  class_vocab.assign(all.begin(), all.end());
}

std::vector<ProteinRecord> parse_fasta(const std::string& text) {
  std::vector<ProteinRecord> records;
  const auto lines = split_lines(text);
  std::size_t header_line = 0;
  bool in_record = false;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    if (line.empty()) continue;
    if (line[0] == '>') {
      if (in_record && records.back().sequence.empty()) {
        row_error("empty sequence for record '" + records.back().id + "'", header_line);
      }
      std::string id;
      for (std::size_t j = 1; j < line.size() && !std::isspace(static_cast<unsigned char>(line[j])); ++j) {
        id.push_back(line[j]);
      }
      if (id.empty()) {
        row_error("FASTA header without an id", i + 1);
      }
      records.push_back(ProteinRecord{});
      records.back().id = id;
      header_line = i + 1;
      in_record = true;
    } else {
      if (!in_record) {
        row_error("sequence data before any FASTA header", i + 1);
      }
      for (char c : line) {
        if (std::isspace(static_cast<unsigned char>(c))) continue;
        records.back().sequence.push_back(
            static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
      }
    }
  }
  if (in_record && records.back().sequence.empty()) {
    row_error("empty sequence for record '" + records.back().id + "'", header_line);
  }
  return records;
}

void parse_annotations(const std::string& text, Dataset& dataset) {
  for_each_tsv_row(text, {"protein_id", "annotation_type", "start", "end"},
                   [&](const std::vector<std::string>& f, std::size_t line_no) {
    ProteinRecord* record = find_mutable(dataset, f[0]);
    if (!record) {
      row_error("unknown protein id '" + f[0] + "'", line_no);
    }
    if (!is_annotation_type(f[1])) {
      row_error("unknown annotation type '" + f[1] + "'", line_no);
    }
    const std::size_t start = parse_position(f[2], line_no);
    const std::size_t end = parse_position(f[3], line_no);
    if (start == 0 || end == 0 || end < start) {
      row_error("invalid range [" + f[2] + "," + f[3] + "]", line_no);
    }
    if (end > record->sequence.size()) {
      row_error("range end " + f[3] + " exceeds sequence length " +
                    std::to_string(record->sequence.size()) + " of '" + f[0] + "'",
                line_no);
    }
    auto& mask = record->annotations[f[1]];
    mask.resize(record->sequence.size(), 0);
    for (std::size_t p = start - 1; p < end; ++p) mask[p] = 1;  // 1-based inclusive
  });
}

void parse_labels(const std::string& text, Dataset& dataset) {
  bool any = false;
  for_each_tsv_row(text, {"protein_id", "class_id"},
                   [&](const std::vector<std::string>& f, std::size_t line_no) {
    any = true;
    ProteinRecord* record = find_mutable(dataset, f[0]);
    if (!record) {
      row_error("unknown protein id '" + f[0] + "'", line_no);
    }
    if (f[1].empty()) {
      row_error("empty class id", line_no);
    }
    record->labels.insert(f[1]);
  });
  if (!any) {
    dataset.warnings.push_back("labels file contains no rows");
  }
  dataset.rebuild_class_vocab();
}

void parse_splits(const std::string& text, Dataset& dataset) {
  for_each_tsv_row(text, {"protein_id", "split"},
                   [&](const std::vector<std::string>& f, std::size_t line_no) {
    ProteinRecord* record = find_mutable(dataset, f[0]);
    if (!record) {
      row_error("unknown protein id '" + f[0] + "'", line_no);
    }
    if (f[1] == "train") {
      record->split = Split::train;
    } else if (f[1] == "valid") {
      record->split = Split::valid;
    } else if (f[1] == "test") {
      record->split = Split::test;
    } else {
      row_error("unknown split '" + f[1] + "'", line_no);
    }
  });
}

std::string serialize_fasta(const Dataset& dataset) {
  std::ostringstream out;
  for (const auto& r : dataset.records) {
    out << ">" << r.id << "\n";
    for (std::size_t i = 0; i < r.sequence.size(); i += 60) {
      out << r.sequence.substr(i, 60) << "\n";
    }
  }
  return out.str();
}

std::string serialize_labels(const Dataset& dataset) {
  std::ostringstream out;
  out << "protein_id\tclass_id\n";
  for (const auto& r : dataset.records) {
    for (const auto& label : r.labels) {
      out << r.id << "\t" << label << "\n";
    }
  }
  return out.str();
}

std::string serialize_annotations(const Dataset& dataset) {
  std::ostringstream out;
  out << "protein_id\tannotation_type\tstart\tend\n";
  for (const auto& r : dataset.records) {
    for (const auto& [type, mask] : r.annotations) {
      std::size_t i = 0;
      while (i < mask.size()) {
        if (!mask[i]) {
          ++i;
          continue;
        }
        std::size_t j = i;
        while (j + 1 < mask.size() && mask[j + 1]) ++j;
        out << r.id << "\t" << type << "\t" << (i + 1) << "\t" << (j + 1) << "\n";
        i = j + 1;
      }
    }
  }
  return out.str();
}

std::string serialize_splits(const Dataset& dataset) {
  std::ostringstream out;
  out << "protein_id\tsplit\n";
  for (const auto& r : dataset.records) {
    const char* name = r.split == Split::train ? "train" : r.split == Split::valid ? "valid" : "test";
    out << r.id << "\t" << name << "\n";
  }
  return out.str();
}

Dataset load_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  Dataset dataset;
  dataset.records = parse_fasta(read_file((fs::path(dir) / "sequences.fasta").string()));
  parse_labels(read_file((fs::path(dir) / "labels.tsv").string()), dataset);
  const fs::path ann = fs::path(dir) / "annotations.tsv";
  if (fs::exists(ann)) {
    parse_annotations(read_file(ann.string()), dataset);
  }
  const fs::path splits = fs::path(dir) / "splits.tsv";
  if (fs::exists(splits)) {
    parse_splits(read_file(splits.string()), dataset);
  }
  for (const auto& r : dataset.records) {
    for (const auto& [type, mask] : r.annotations) {
      if (mask.size() != r.sequence.size()) {
        throw Error(ErrorCode::parse_error,
                    "annotation mask length mismatch for '" + r.id + "' type " + type);
      }
    }
  }
  return dataset;
}

void save_dataset(const Dataset& dataset, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  write_file((fs::path(dir) / "sequences.fasta").string(), serialize_fasta(dataset));
  write_file((fs::path(dir) / "labels.tsv").string(), serialize_labels(dataset));
  write_file((fs::path(dir) / "annotations.tsv").string(), serialize_annotations(dataset));
  write_file((fs::path(dir) / "splits.tsv").string(), serialize_splits(dataset));
}

void SynthConfig::validate() const {
  if (n_proteins == 0) {
    throw Error(ErrorCode::invalid_argument, "synth config: n_proteins must be positive");
  }
  if (min_length == 0 || max_length < min_length) {
    throw Error(ErrorCode::invalid_argument, "synth config: invalid length range");
  }
  if (motifs.empty()) {
    throw Error(ErrorCode::invalid_argument, "synth config: at least one motif required");
  }
  for (const auto& m : motifs) {
    if (m.motif.empty() || m.class_id.empty()) {
      throw Error(ErrorCode::invalid_argument, "synth config: empty motif or class id");
    }
    if (m.motif.size() > min_length) {
      throw Error(ErrorCode::invalid_argument,
                  "synth config: motif '" + m.motif + "' longer than min_length");
    }
    if (m.probability < 0.0 || m.probability > 1.0) {
      throw Error(ErrorCode::invalid_argument, "synth config: probability outside [0,1]");
    }
    for (char c : m.motif) {
      if (std::string(kAlphabet).find(c) == std::string::npos) {
        throw Error(ErrorCode::invalid_argument,
                    "synth config: motif character '" + std::string(1, c) + "' not an amino acid");
      }
    }
  }
  const double total = train_fraction + valid_fraction + test_fraction;
  if (std::fabs(total - 1.0) > 1e-9) {
    throw Error(ErrorCode::invalid_argument, "synth config: split fractions must sum to 1");
  }
}

std::string synth_config_to_json(const SynthConfig& c) {
  nlohmann::ordered_json j;
  j["n_proteins"] = c.n_proteins;
  j["min_length"] = c.min_length;
  j["max_length"] = c.max_length;
  j["motifs"] = nlohmann::ordered_json::array();
  for (const auto& m : c.motifs) {
    j["motifs"].push_back({{"class_id", m.class_id}, {"motif", m.motif}, {"probability", m.probability}});
  }
  j["seed"] = c.seed;
  j["train_fraction"] = c.train_fraction;
  j["valid_fraction"] = c.valid_fraction;
  j["test_fraction"] = c.test_fraction;
  j["negative_class"] = c.negative_class;
  return j.dump(2);
}

SynthConfig synth_config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("synth config: ") + e.what());
  }
  SynthConfig c;
  try {
    c.n_proteins = j.at("n_proteins").get<std::size_t>();
    c.min_length = j.at("min_length").get<std::size_t>();
    c.max_length = j.at("max_length").get<std::size_t>();
    for (const auto& m : j.at("motifs")) {
      MotifSpec spec;
      spec.class_id = m.at("class_id").get<std::string>();
      spec.motif = m.at("motif").get<std::string>();
      spec.probability = m.at("probability").get<double>();
      c.motifs.push_back(spec);
    }
    c.seed = j.value("seed", std::uint64_t{0});
    c.train_fraction = j.value("train_fraction", 0.8);
    c.valid_fraction = j.value("valid_fraction", 0.1);
    c.test_fraction = j.value("test_fraction", 0.1);
    c.negative_class = j.value("negative_class", std::string("none"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("synth config: ") + e.what());
  }
  c.validate();
  return c;
}

namespace {

bool contains_any_motif(const std::string& sequence, const std::vector<MotifSpec>& motifs,
                        std::size_t skip_begin, std::size_t skip_end) {
  for (const auto& m : motifs) {
    std::size_t pos = sequence.find(m.motif);
    while (pos != std::string::npos) {
      if (!(pos == skip_begin && pos + m.motif.size() == skip_end)) return true;
      pos = sequence.find(m.motif, pos + 1);
    }
  }
  return false;
}

}  // namespace

Dataset generate_synthetic(const SynthConfig& config) {
  config.validate();
  Dataset dataset;
  dataset.records.reserve(config.n_proteins);
  Rng rng(config.seed);

  const std::size_t id_width = std::to_string(config.n_proteins).size();
  for (std::size_t i = 0; i < config.n_proteins; ++i) {
    ProteinRecord record;
    std::string idx = std::to_string(i);
    record.id = "synth" + std::string(id_width - idx.size(), '0') + idx;

    const std::size_t length =
        config.min_length + rng.below(config.max_length - config.min_length + 1);
    const MotifSpec* planted = nullptr;
    for (const auto& m : config.motifs) {
      if (rng.next_double() < m.probability) {
        planted = &m;
        break;
      }
    }

    for (int attempt = 0;; ++attempt) {
      if (attempt > 10000) {
        throw Error(ErrorCode::numeric_failure,
                    "generate_synthetic: rejection sampling failed; motifs too frequent");
      }
      std::string seq(length, 'A');
      for (auto& c : seq) c = kAlphabet[rng.below(kAlphabetSize)];
      std::size_t begin = 0, end = 0;
      if (planted) {
        begin = rng.below(length - planted->motif.size() + 1);
        end = begin + planted->motif.size();
        for (std::size_t p = 0; p < planted->motif.size(); ++p) seq[begin + p] = planted->motif[p];
      }
      if (contains_any_motif(seq, config.motifs, begin, planted ? end : 0)) continue;
      record.sequence = seq;
      if (planted) {
        record.labels.insert(planted->class_id);
        std::vector<std::uint8_t> mask(length, 0);
        for (std::size_t p = begin; p < end; ++p) mask[p] = 1;
        record.annotations["motif"] = mask;
      } else {
        record.labels.insert(config.negative_class);
      }
      break;
    }
    dataset.records.push_back(std::move(record));
  }

  // Split assignment: shuffle indices and cut by fractions.
  std::vector<std::size_t> order(config.n_proteins);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng split_rng = rng.child(1);
  split_rng.shuffle(order);
  const std::size_t n_train = static_cast<std::size_t>(
      std::llround(config.train_fraction * static_cast<double>(config.n_proteins)));
  const std::size_t n_valid = static_cast<std::size_t>(
      std::llround(config.valid_fraction * static_cast<double>(config.n_proteins)));
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    Split s = pos < n_train ? Split::train : pos < n_train + n_valid ? Split::valid : Split::test;
    dataset.records[order[pos]].split = s;
  }

  dataset.rebuild_class_vocab();
  return dataset;
}

}  // namespace xprot::data
