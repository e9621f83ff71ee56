#include <doctest.h>

#include <filesystem>
#include <string>

#include "xprot/data.hpp"
#include "xprot/error.hpp"

using namespace xprot;
using namespace xprot::data;

namespace {

Dataset two_protein_dataset() {
  Dataset d;
  d.records = parse_fasta(">p1\nMKLVHAAAAA\n>p2\nACDEFGHIKLMNPQRSTVWYACDEFGHIKLMNPQRSTVWYACDEFGHIKLMNPQRSTVWYACDEFGH\n");
  return d;
}

}  // namespace

TEST_CASE("fasta basic parsing with wrapped lines") {
  const auto records = parse_fasta(">p1\nMK\nLV\n");
  REQUIRE(records.size() == 1);
  CHECK(records[0].id == "p1");
  CHECK(records[0].sequence == "MKLV");
}

TEST_CASE("fasta preserves record order and uppercases") {
  const auto records = parse_fasta(">a desc ignored\nmklv\n>b\nACD\n");
  REQUIRE(records.size() == 2);
  CHECK(records[0].id == "a");
  CHECK(records[0].sequence == "MKLV");
  CHECK(records[1].id == "b");
}

TEST_CASE("fasta sequence before header errors with line number") {
  try {
    parse_fasta("MK\n>p1\nAC\n");
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line 1") != std::string::npos);
  }
}

TEST_CASE("fasta empty sequence errors") {
  CHECK_THROWS_AS(parse_fasta(">p1\n>p2\nAC\n"), Error);
  CHECK_THROWS_AS(parse_fasta(">p1\n"), Error);
}

TEST_CASE("annotations: single residue at position 65") {
  Dataset d;
  std::string seq(70, 'A');
  d.records = parse_fasta(">p1\n" + seq + "\n");
  parse_annotations("protein_id\tannotation_type\tstart\tend\np1\tactive_site\t65\t65\n", d);
  const auto& mask = d.records[0].annotations.at("active_site");
  REQUIRE(mask.size() == 70);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    CHECK(mask[i] == (i == 64 ? 1 : 0));
  }
}

TEST_CASE("annotations: overlapping ranges union") {
  Dataset d = two_protein_dataset();
  parse_annotations(
      "protein_id\tannotation_type\tstart\tend\n"
      "p1\tmotif\t3\t6\n"
      "p1\tmotif\t5\t9\n",
      d);
  const auto& mask = d.records[0].annotations.at("motif");
  for (std::size_t i = 0; i < mask.size(); ++i) {
    CHECK(mask[i] == ((i >= 2 && i <= 8) ? 1 : 0));
  }
}

TEST_CASE("annotations error cases") {
  Dataset d = two_protein_dataset();
  const std::string header = "protein_id\tannotation_type\tstart\tend\n";
  CHECK_THROWS_AS(parse_annotations(header + "p1\tmotif\t4\t0\n", d), Error);       // end 0
  CHECK_THROWS_AS(parse_annotations(header + "p1\tmotif\t6\t3\n", d), Error);       // end < start
  CHECK_THROWS_AS(parse_annotations(header + "p1\tmotif\t5\t9999\n", d), Error);    // beyond length
  CHECK_THROWS_AS(parse_annotations(header + "nope\tmotif\t1\t2\n", d), Error);     // unknown id
  CHECK_THROWS_AS(parse_annotations(header + "p1\tweird_type\t1\t2\n", d), Error);  // unknown type
}

TEST_CASE("labels parse, deduplicate, and build sorted vocabulary") {
  Dataset d = two_protein_dataset();
  parse_labels(
      "protein_id\tclass_id\n"
      "p1\tGO:0016020\n"
      "p1\tGO:0005488\n"
      "p1\tGO:0016020\n"
      "p2\tGO:0003824\n",
      d);
  CHECK(d.records[0].labels.size() == 2);
  CHECK(d.class_vocab == std::vector<std::string>{"GO:0003824", "GO:0005488", "GO:0016020"});
}

TEST_CASE("labels: unknown protein errors, empty file warns") {
  Dataset d = two_protein_dataset();
  CHECK_THROWS_AS(parse_labels("protein_id\tclass_id\nnope\tx\n", d), Error);
  Dataset d2 = two_protein_dataset();
  parse_labels("protein_id\tclass_id\n", d2);
  CHECK(!d2.warnings.empty());
}

TEST_CASE("tsv comment lines are skipped") {
  Dataset d = two_protein_dataset();
  parse_labels("# generated\nprotein_id\tclass_id\n# comment\np1\tc1\n", d);
  CHECK(d.records[0].labels.count("c1") == 1);
}

TEST_CASE("dataset save/load round trip is a fixed point") {
  namespace fs = std::filesystem;
  SynthConfig config;
  config.n_proteins = 40;
  config.min_length = 20;
  config.max_length = 30;
  config.motifs = {{"has_motif", "HDC", 0.5}};
  config.seed = 7;
  Dataset d = generate_synthetic(config);

  const std::string dir = (fs::temp_directory_path() / "xprot_test_ds").string();
  save_dataset(d, dir);
  Dataset loaded = load_dataset(dir);
  REQUIRE(loaded.records.size() == d.records.size());
  for (std::size_t i = 0; i < d.records.size(); ++i) {
    CHECK(loaded.records[i].id == d.records[i].id);
    CHECK(loaded.records[i].sequence == d.records[i].sequence);
    CHECK(loaded.records[i].labels == d.records[i].labels);
    CHECK(loaded.records[i].annotations == d.records[i].annotations);
    CHECK(loaded.records[i].split == d.records[i].split);
  }
  // serialize(parse(serialize(x))) == serialize(x)
  CHECK(serialize_fasta(loaded) == serialize_fasta(d));
  CHECK(serialize_labels(loaded) == serialize_labels(d));
  CHECK(serialize_annotations(loaded) == serialize_annotations(d));
  CHECK(serialize_splits(loaded) == serialize_splits(d));
  fs::remove_all(dir);
}

TEST_CASE("synthetic: positive proteins carry exact motif masks") {
  SynthConfig config;
  config.n_proteins = 60;
  config.min_length = 15;
  config.max_length = 25;
  config.motifs = {{"has_motif", "HDC", 0.5}};
  config.seed = 11;
  Dataset d = generate_synthetic(config);
  std::size_t positives = 0;
  for (const auto& r : d.records) {
    if (r.labels.count("has_motif")) {
      ++positives;
      const auto& mask = r.annotations.at("motif");
      std::size_t ones = 0, first = mask.size();
      for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i]) {
          ones++;
          first = std::min(first, i);
        }
      }
      CHECK(ones == 3);
      CHECK(r.sequence.substr(first, 3) == "HDC");
      // consecutive
      CHECK(mask[first + 1] == 1);
      CHECK(mask[first + 2] == 1);
    } else {
      CHECK(r.labels.count("none") == 1);
      CHECK(r.sequence.find("HDC") == std::string::npos);
    }
  }
  CHECK(positives > 0);
  CHECK(positives < d.records.size());
}

TEST_CASE("synthetic: same seed gives identical bytes, different seed differs") {
  SynthConfig config;
  config.n_proteins = 30;
  config.min_length = 12;
  config.max_length = 20;
  config.motifs = {{"m", "WWW", 0.4}};
  config.seed = 5;
  const Dataset a = generate_synthetic(config);
  const Dataset b = generate_synthetic(config);
  CHECK(serialize_fasta(a) == serialize_fasta(b));
  CHECK(serialize_splits(a) == serialize_splits(b));
  config.seed = 6;
  const Dataset c = generate_synthetic(config);
  CHECK(serialize_fasta(a) != serialize_fasta(c));
}

TEST_CASE("synthetic class balance within 2% at n=1000") {
  SynthConfig config;
  config.n_proteins = 1000;
  config.min_length = 12;
  config.max_length = 20;
  config.motifs = {{"pos", "HDCW", 0.5}};
  config.seed = 42;
  Dataset d = generate_synthetic(config);
  std::size_t positives = 0;
  for (const auto& r : d.records) positives += r.labels.count("pos");
  const double fraction = static_cast<double>(positives) / 1000.0;
  CHECK(fraction >= 0.48);
  CHECK(fraction <= 0.52);
}

TEST_CASE("synthetic split fractions are respected") {
  SynthConfig config;
  config.n_proteins = 200;
  config.min_length = 10;
  config.max_length = 14;
  config.motifs = {{"m", "AAA", 0.3}};
  config.seed = 3;
  Dataset d = generate_synthetic(config);
  CHECK(d.split_indices(Split::train).size() == 160);
  CHECK(d.split_indices(Split::valid).size() == 20);
  CHECK(d.split_indices(Split::test).size() == 20);
}

TEST_CASE("synthetic config validation") {
  SynthConfig config;
  config.n_proteins = 10;
  config.min_length = 4;
  config.max_length = 8;
  config.motifs = {{"m", "AAAAAAAAA", 0.5}};  // motif longer than min length
  CHECK_THROWS_AS(config.validate(), Error);
  config.motifs = {{"m", "AA", 0.5}};
  config.train_fraction = 0.5;  // fractions no longer sum to 1
  CHECK_THROWS_AS(config.validate(), Error);
}
