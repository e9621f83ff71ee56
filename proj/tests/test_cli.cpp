#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "xprot/data.hpp"
#include "xprot/run_manifest.hpp"

namespace fs = std::filesystem;

namespace {

struct CommandResult {
  int exit_code = -1;
  std::string stdout_text;
};

CommandResult run(const std::string& args) {
  const fs::path out = fs::temp_directory_path() / "xprot_cli_stdout.txt";
  const std::string cmd = std::string(XPROT_BIN) + " " + args + " > " + out.string() + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  CommandResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(out);
  std::ostringstream buf;
  buf << in.rdbuf();
  result.stdout_text = buf.str();
  return result;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
}

fs::path workdir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "xprot_cli_tests";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

const char* kSynthConfig = R"({
  "n_proteins": 48,
  "min_length": 10,
  "max_length": 16,
  "motifs": [{"class_id": "has_motif", "motif": "HDCW", "probability": 0.5}],
  "seed": 12,
  "train_fraction": 0.5,
  "valid_fraction": 0.2,
  "test_fraction": 0.3
})";

const char* kModelConfig = R"({
  "n_layers": 2, "n_heads": 2, "d_model": 8, "d_ff": 16,
  "n_classes": 2, "head_hidden": 6, "max_positions": 32,
  "task_kind": "multiclass"
})";

const char* kTrainConfig = R"({
  "lr_encoder": 5e-4, "lr_head": 1e-3,
  "warmup_steps": 5, "total_steps": 200, "accumulation": 4,
  "freeze_encoder_epochs": 1, "max_epochs": 2, "patience": 2, "seed": 9
})";

}  // namespace

TEST_CASE("no arguments prints usage and exits 1") {
  CommandResult r = run("");
  CHECK(r.exit_code == 1);
}

TEST_CASE("synth missing config file exits 2") {
  CommandResult r = run("synth --config /nonexistent/cfg.json --out " +
                        (workdir() / "nope").string());
  CHECK(r.exit_code == 2);
}

TEST_CASE("full pipeline: synth, train, attribute, analyze, embed") {
  const fs::path base = workdir();
  write(base / "synth.json", kSynthConfig);
  write(base / "model.json", kModelConfig);
  write(base / "train.json", kTrainConfig);

  // synth
  CommandResult synth = run("synth --config " + (base / "synth.json").string() + " --out " +
                            (base / "data").string());
  REQUIRE(synth.exit_code == 0);
  CHECK(fs::exists(base / "data" / "sequences.fasta"));
  CHECK(fs::exists(base / "data" / "run_manifest.json"));

  // synth rerun determinism (primary outputs byte-identical)
  CommandResult synth2 = run("synth --config " + (base / "synth.json").string() + " --out " +
                             (base / "data2").string());
  REQUIRE(synth2.exit_code == 0);
  CHECK(slurp(base / "data" / "sequences.fasta") == slurp(base / "data2" / "sequences.fasta"));
  CHECK(slurp(base / "data" / "labels.tsv") == slurp(base / "data2" / "labels.tsv"));
  CHECK(slurp(base / "data" / "annotations.tsv") == slurp(base / "data2" / "annotations.tsv"));
  CHECK(slurp(base / "data" / "splits.tsv") == slurp(base / "data2" / "splits.tsv"));

  // train
  CommandResult train = run("train --data " + (base / "data").string() + " --model-config " +
                            (base / "model.json").string() + " --train-config " +
                            (base / "train.json").string() + " --out " +
                            (base / "ckpt" / "model.xprotw").string());
  REQUIRE(train.exit_code == 0);
  CHECK(fs::exists(base / "ckpt" / "model.xprotw"));
  CHECK(fs::exists(base / "ckpt" / "model.xprotw.json"));
  CHECK(train.stdout_text.find("epoch=1") != std::string::npos);
  CHECK(train.stdout_text.find("best_epoch=") != std::string::npos);

  // invalid data dir exits 2
  CommandResult bad_data = run("train --data /nonexistent --model-config " +
                               (base / "model.json").string() + " --train-config " +
                               (base / "train.json").string() + " --out " +
                               (base / "ckpt2" / "m.xprotw").string());
  CHECK(bad_data.exit_code == 2);

  // attribute: embedding target on the test fasta
  CommandResult attr = run("attribute --model " + (base / "ckpt" / "model.xprotw").string() +
                           " --fasta " + (base / "data" / "sequences.fasta").string() +
                           " --class has_motif --target all-layers --steps 8 --out " +
                           (base / "attr").string());
  REQUIRE(attr.exit_code == 0);
  CHECK(attr.stdout_text.find("gap=") != std::string::npos);
  // every protein got embedding, per-layer, and summed files
  std::size_t embedding_files = 0, summed_files = 0;
  for (const auto& entry : fs::directory_iterator(base / "attr")) {
    const std::string name = entry.path().filename().string();
    if (name.ends_with(".embedding.json")) ++embedding_files;
    if (name.ends_with(".summed.json")) ++summed_files;
  }
  CHECK(embedding_files == 48);
  CHECK(summed_files == 48);

  // unknown class exits 2
  CommandResult bad_class = run("attribute --model " + (base / "ckpt" / "model.xprotw").string() +
                                " --fasta " + (base / "data" / "sequences.fasta").string() +
                                " --class nope --out " + (base / "attr2").string());
  CHECK(bad_class.exit_code == 2);

  // single-layer target writes head map with skip values
  CommandResult layer0 = run("attribute --model " + (base / "ckpt" / "model.xprotw").string() +
                             " --fasta " + (base / "data" / "sequences.fasta").string() +
                             " --class has_motif --target layer:0 --steps 4 --out " +
                             (base / "attr_l0").string());
  REQUIRE(layer0.exit_code == 0);
  bool found_skip = false;
  for (const auto& entry : fs::directory_iterator(base / "attr_l0")) {
    if (entry.path().filename().string().ends_with(".layer0.json")) {
      found_skip = slurp(entry.path()).find("skip_values") != std::string::npos;
      break;
    }
  }
  CHECK(found_skip);

  // jobs determinism: rerun with --jobs 2, outputs byte-identical
  CommandResult attr_j2 = run("attribute --model " + (base / "ckpt" / "model.xprotw").string() +
                              " --fasta " + (base / "data" / "sequences.fasta").string() +
                              " --class has_motif --target all-layers --steps 8 --jobs 2 --out " +
                              (base / "attr_j2").string());
  REQUIRE(attr_j2.exit_code == 0);
  for (const auto& entry : fs::directory_iterator(base / "attr")) {
    const std::string name = entry.path().filename().string();
    if (name == "run_manifest.json") continue;
    CHECK(slurp(entry.path()) == slurp(base / "attr_j2" / name));
  }

  // analyze
  CommandResult analyze = run("analyze --attr " + (base / "attr").string() + " --data " +
                              (base / "data").string() +
                              " --class has_motif --types motif --alpha 0.05 --out " +
                              (base / "report").string());
  REQUIRE(analyze.exit_code == 0);
  CHECK(fs::exists(base / "report" / "report.json"));
  CHECK(fs::exists(base / "report" / "relevance_significance.csv"));
  CHECK(analyze.stdout_text.find("proteins=") != std::string::npos);

  // unknown annotation type exits 2
  CommandResult bad_type = run("analyze --attr " + (base / "attr").string() + " --data " +
                               (base / "data").string() +
                               " --class has_motif --types bogus --out " +
                               (base / "report2").string());
  CHECK(bad_type.exit_code == 2);

  // unknown class in analyze: no qualifying proteins -> exit 4
  CommandResult no_qual = run("analyze --attr " + (base / "attr").string() + " --data " +
                              (base / "data").string() +
                              " --class missing_class --types motif --out " +
                              (base / "report3").string());
  CHECK(no_qual.exit_code == 4);

  // embed on the summed maps (perplexity must fit 48 maps)
  CommandResult embed = run("embed --maps " + (base / "attr").string() +
                            " --pca 4 --perplexity 10 --seed 42 --iterations 300 --out " +
                            (base / "viz").string());
  REQUIRE(embed.exit_code == 0);
  CHECK(fs::exists(base / "viz" / "scatter.csv"));
  CHECK(fs::exists(base / "viz" / "scatter.svg"));

  // same seed -> identical CSV
  CommandResult embed2 = run("embed --maps " + (base / "attr").string() +
                             " --pca 4 --perplexity 10 --seed 42 --iterations 300 --out " +
                             (base / "viz2").string());
  REQUIRE(embed2.exit_code == 0);
  CHECK(slurp(base / "viz" / "scatter.csv") == slurp(base / "viz2" / "scatter.csv"));

  // --pca above the rank bound exits 2
  CommandResult bad_pca = run("embed --maps " + (base / "attr").string() +
                              " --pca 40 --perplexity 10 --out " + (base / "viz3").string());
  CHECK(bad_pca.exit_code == 2);

  // perplexity too large for the map count exits 2 with the required minimum
  CommandResult bad_perp = run("embed --maps " + (base / "attr").string() +
                               " --pca 4 --perplexity 30 --out " + (base / "viz4").string());
  CHECK(bad_perp.exit_code == 2);
}

TEST_CASE("run manifest digests are stable") {
  const fs::path p = workdir() / "digest_probe.txt";
  write(p, "hello digest");
  const auto d1 = xprot::fnv1a64_file(p.string());
  const auto d2 = xprot::fnv1a64_file(p.string());
  CHECK(d1 == d2);
  CHECK(xprot::digest_hex(d1).size() == 16);
  write(p, "hello digest!");
  CHECK(xprot::fnv1a64_file(p.string()) != d1);
}
