// Acceptance suite: runs every criterion at its stated tolerance and prints
// one pass/fail line per criterion. Exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "xprot/analysis.hpp"
#include "xprot/attribution.hpp"
#include "xprot/data.hpp"
#include "xprot/embed.hpp"
#include "xprot/model.hpp"
#include "xprot/rng.hpp"
#include "xprot/stats.hpp"
#include "xprot/tensor.hpp"
#include "xprot/train.hpp"

namespace fs = std::filesystem;
using namespace xprot;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& details) {
  std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", criterion, details.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string random_sequence(std::size_t length, Rng& rng) {
  static const char* alphabet = "ACDEFGHIKLMNPQRSTVWY";
  std::string s(length, 'A');
  for (auto& c : s) c = alphabet[rng.below(20)];
  return s;
}

// ---------------------------------------------------------------------------
// Criterion 1: analytic gradients vs central finite differences on >= 20
// random configurations; max relative error <= 1e-5; runtime <= 2 min.
void criterion_1() {
  const auto start = Clock::now();
  const std::size_t layer_opts[] = {1, 2, 4};
  const std::size_t head_opts[] = {1, 2, 4};
  const std::size_t dim_opts[] = {16, 32, 64};
  Rng meta(20260810);
  double worst = 0.0;
  std::size_t configs = 0;
  for (int trial = 0; trial < 20; ++trial) {
    ModelConfig cfg;
    cfg.n_layers = layer_opts[meta.below(3)];
    cfg.n_heads = head_opts[meta.below(3)];
    cfg.d_model = dim_opts[meta.below(3)];
    cfg.d_ff = cfg.d_model * 2;
    cfg.head_hidden = 16;
    cfg.n_classes = 3;
    cfg.max_positions = 64;
    Rng rng = meta.child(trial);
    ModelWeights weights = ModelWeights::random_init(cfg, rng, 0.15);
    const auto tokens = tokenize(random_sequence(10 + meta.below(8), rng));
    const ForwardCache cache = forward(weights, cfg, tokens);
    const std::size_t cls = meta.below(cfg.n_classes);
    const Tensor grad = grad_embedding(weights, cfg, cache, cls);

    const double eps = 1e-4;
    for (int probe = 0; probe < 8; ++probe) {
      const std::size_t idx = rng.below(grad.size());
      Tensor e_plus = cache.embedding, e_minus = cache.embedding;
      e_plus[idx] += eps;
      e_minus[idx] -= eps;
      const double fd = (forward_from_embedding(weights, cfg, e_plus).logits[cls] -
                         forward_from_embedding(weights, cfg, e_minus).logits[cls]) /
                        (2.0 * eps);
      const double denom = std::max({std::fabs(fd), std::fabs(grad[idx]), 1e-8});
      worst = std::max(worst, std::fabs(fd - grad[idx]) / denom);
    }
    ++configs;
  }
  const double elapsed = seconds_since(start);
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "gradient vs finite differences: %zu configs, max rel err %.3g (<= 1e-5), %.1fs "
                "(<= 120s)",
                configs, worst, elapsed);
  report(1, configs >= 20 && worst <= 1e-5 && elapsed <= 120.0, buf);
}

// ---------------------------------------------------------------------------
// Criterion 2: embedding IG completeness, m=256 vs m=16 on 100 toy inputs.
void criterion_2() {
  const auto start = Clock::now();
  ModelConfig cfg;
  cfg.n_layers = 2;
  cfg.n_heads = 2;
  cfg.d_model = 32;
  cfg.d_ff = 64;
  cfg.head_hidden = 16;
  cfg.n_classes = 2;
  cfg.max_positions = 40;
  Rng rng(77);
  ModelWeights weights = ModelWeights::random_init(cfg, rng, 0.2);

  std::size_t within_tolerance = 0, refined = 0;
  const std::size_t n_inputs = 100;
  for (std::size_t i = 0; i < n_inputs; ++i) {
    Rng sample_rng = rng.child(i);
    const auto tokens = tokenize(random_sequence(14 + sample_rng.below(8), sample_rng));
    // Class with the larger |F(x) - F(baseline)| keeps the relative gap
    // denominator meaningful.
    const ForwardCache at_x = forward(weights, cfg, tokens);
    const ForwardCache at_0 =
        forward_from_embedding(weights, cfg, Tensor({tokens.size(), cfg.d_model}));
    std::size_t cls = 0;
    double best_delta = 0.0;
    for (std::size_t c = 0; c < cfg.n_classes; ++c) {
      const double delta = std::fabs(at_x.logits[c] - at_0.logits[c]);
      if (delta > best_delta) {
        best_delta = delta;
        cls = c;
      }
    }
    attribution::PathSpec coarse;
    coarse.steps = 16;
    attribution::PathSpec fine;
    fine.steps = 256;
    const double gap_fine = attribution::ig_embedding(weights, cfg, tokens, cls, fine).gap;
    const double gap_coarse = attribution::ig_embedding(weights, cfg, tokens, cls, coarse).gap;
    if (gap_fine <= 1e-3) ++within_tolerance;
    if (gap_fine < gap_coarse) ++refined;
  }
  const double elapsed = seconds_since(start);
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "embedding IG completeness: %zu/100 within 1e-3 at m=256 (>= 95), refinement "
                "%zu/100 (= 100), %.1fs (<= 300s)",
                within_tolerance, refined, elapsed);
  report(2, within_tolerance >= 95 && refined == n_inputs && elapsed <= 300.0, buf);
}

// ---------------------------------------------------------------------------
// Criterion 3: head/skip joint completeness at m=512 per layer; exact
// head-block reduction reassociation.
void criterion_3() {
  ModelConfig cfg;
  cfg.n_layers = 3;
  cfg.n_heads = 2;
  cfg.d_model = 16;
  cfg.d_ff = 32;
  cfg.head_hidden = 12;
  cfg.n_classes = 2;
  cfg.max_positions = 32;
  Rng rng(88);
  ModelWeights weights = ModelWeights::random_init(cfg, rng, 0.2);
  const auto tokens = tokenize(random_sequence(12, rng));

  attribution::PathSpec spec;
  spec.steps = 512;
  const attribution::FullAttribution full =
      attribution::attribute_all(weights, cfg, tokens, 0, spec);

  double worst_gap = 0.0, worst_reassoc = 0.0;
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    worst_gap = std::max(worst_gap, full.layers[l].gap);
    for (std::size_t t = 0; t < full.layers[l].head_map.values.rows(); ++t) {
      double by_heads = 0.0, by_channels = 0.0;
      for (std::size_t h = 0; h < cfg.n_heads; ++h) by_heads += full.layers[l].head_map.values(t, h);
      for (std::size_t ch = 0; ch < cfg.d_model; ++ch) {
        by_channels += full.layers[l].head_channels(t, ch);
      }
      worst_reassoc = std::max(worst_reassoc, std::fabs(by_heads - by_channels));
    }
  }
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "head/skip decomposition: max joint gap %.3g (<= 1e-2) at m=512, reduction "
                "reassociation %.3g (<= 1e-12)",
                worst_gap, worst_reassoc);
  report(3, worst_gap <= 1e-2 && worst_reassoc <= 1e-12, buf);
}

// ---------------------------------------------------------------------------
// Criterion 4: planted-motif end-to-end.
void criterion_4() {
  const auto start = Clock::now();
  data::SynthConfig synth;
  synth.n_proteins = 2000;
  synth.min_length = 24;
  synth.max_length = 48;
  synth.motifs = {{"has_motif", "HDCWK", 0.5}};
  synth.seed = 2024;
  const data::Dataset dataset = data::generate_synthetic(synth);

  ModelConfig cfg;
  cfg.n_layers = 4;
  cfg.n_heads = 4;
  cfg.d_model = 64;
  cfg.d_ff = 256;
  cfg.head_hidden = 50;
  cfg.n_classes = 2;
  cfg.class_vocab = dataset.class_vocab;
  cfg.max_positions = 64;

  train::TrainConfig tc = train::TrainConfig::toy_defaults();
  tc.max_epochs = 8;
  tc.patience = 3;
  tc.seed = 7;

  const train::Checkpoint ckpt = train::train(dataset, cfg, tc, &std::cout);
  const double train_seconds = seconds_since(start);
  const bool trained = ckpt.metric >= 0.95 && train_seconds <= 900.0;

  // Attribution for eligible test proteins.
  attribution::PathSpec spec;
  spec.steps = 64;
  std::vector<std::size_t> selected =
      analysis::eligible_proteins(dataset, "has_motif", {"motif"});
  std::sort(selected.begin(), selected.end(), [&](std::size_t a, std::size_t b) {
    return dataset.records[a].id < dataset.records[b].id;
  });
  const std::size_t class_index = dataset.class_index("has_motif");
  const auto attributions = analysis::compute_attributions(ckpt.weights, cfg, dataset, selected,
                                                           class_index, spec, 2);
  const analysis::AnalysisReport report_main =
      analysis::analyze_attributions(attributions, dataset, "has_motif", {"motif"}, 0.05);

  const bool enough_proteins = attributions.size() >= 50;
  const bool embedding_significant =
      !report_main.embedding_level.empty() && report_main.embedding_level[0].tested &&
      report_main.embedding_level[0].significant;
  std::size_t overlay_cells = 0;
  if (report_main.overlays.count("motif")) {
    for (auto m : report_main.overlays.at("motif").mask) overlay_cells += m;
  }

  // Rotated-annotation negative control: 10 seeded repetitions.
  std::size_t control_non_significant = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rot(40000 + seed);
    data::Dataset rotated = dataset;
    for (auto& record : rotated.records) {
      auto it = record.annotations.find("motif");
      if (it == record.annotations.end()) continue;
      const std::size_t n = it->second.size();
      it->second = analysis::rotate_mask(it->second, 5 + rot.below(n > 10 ? n - 10 : 1));
    }
    const analysis::AnalysisReport control =
        analysis::analyze_attributions(attributions, rotated, "has_motif", {"motif"}, 0.05);
    if (control.embedding_level.empty() || !control.embedding_level[0].tested ||
        !control.embedding_level[0].significant) {
      ++control_non_significant;
    }
  }
  const double elapsed = seconds_since(start);
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "planted motif end-to-end: val %s %.4f (>= 0.95) in %.0fs (<= 900s), %zu annotated "
                "test proteins (>= 50), embedding-level significant %d, overlay cells %zu (> 0), "
                "negative control %zu/10 (>= 9), total %.0fs",
                ckpt.metric_kind.c_str(), ckpt.metric, train_seconds, attributions.size(),
                embedding_significant ? 1 : 0, overlay_cells, control_non_significant, elapsed);
  report(4, trained && enough_proteins && embedding_significant && overlay_cells > 0 &&
             control_non_significant >= 9,
         buf);
}

// ---------------------------------------------------------------------------
// Criterion 5: statistics oracles.
void criterion_5() {
  bool ok = true;
  std::string detail;

  const auto r = stats::point_biserial({1, 2, 3, 4}, {0, 0, 1, 1});
  if (!r || std::fabs(*r - 2.0 / std::sqrt(5.0)) > 1e-12) {
    ok = false;
    detail += " point_biserial";
  }

  const auto bh = stats::bh_adjust({0.01, 0.04, 0.03, 0.005});
  const std::vector<double> bh_expected = {0.02, 0.04, 0.04, 0.02};
  for (std::size_t i = 0; i < 4; ++i) {
    if (std::fabs(bh[i] - bh_expected[i]) > 1e-15) {
      ok = false;
      detail += " bh";
      break;
    }
  }

  const auto w = stats::wilcoxon_signed_rank({1, 2, 3, -4}, stats::Alternative::greater);
  if (std::fabs(w.p_value - 7.0 / 16.0) > 1e-15) {
    ok = false;
    detail += " wilcoxon";
  }

  // KS distance of null t-test p-values from uniform over 1000 simulations.
  Rng rng(5500);
  std::vector<double> ps;
  for (int sim = 0; sim < 1000; ++sim) {
    std::vector<double> values(30);
    for (auto& x : values) x = rng.normal();
    ps.push_back(stats::t_test_one_sample(values).p_value);
  }
  std::sort(ps.begin(), ps.end());
  double ks = 0.0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    ks = std::max(ks, std::max(std::fabs(ps[i] - static_cast<double>(i) / ps.size()),
                               std::fabs(ps[i] - static_cast<double>(i + 1) / ps.size())));
  }
  if (ks > 0.06) {
    ok = false;
    detail += " ks";
  }

  // BH family size equals n_layers * n_heads per condition (480 for the
  // paper configuration).
  Rng family_rng(5600);
  std::vector<analysis::CorrelationMatrix> matrices;
  for (std::size_t i = 0; i < 5; ++i) {
    analysis::CorrelationMatrix m;
    m.protein_id = "p" + std::to_string(i);
    m.annotation_type = "motif";
    m.r = Tensor({30, 16});
    m.valid.assign(480, 1);
    for (std::size_t j = 0; j < 480; ++j) m.r[j] = 0.5 * family_rng.normal();
    matrices.push_back(std::move(m));
  }
  const auto sig = analysis::population_correlation_significance(matrices, 0.05);
  if (sig.bh_family_size != 480) {
    ok = false;
    detail += " family480";
  }

  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "statistics oracles: point-biserial 2/sqrt(5), BH hand case, Wilcoxon 7/16, KS %.4f "
                "(<= 0.06), BH family %zu (= 480)%s",
                ks, sig.bh_family_size, ok ? "" : (" FAILED:" + detail).c_str());
  report(5, ok, buf);
}

// ---------------------------------------------------------------------------
// Criterion 6: collective dynamics on synthetic summed maps.
void criterion_6() {
  // 90 maps, 30x16 each, three planted head-pattern classes.
  Rng gen(660);
  std::vector<attribution::SummedMap> maps;
  std::vector<std::string> classes;
  for (std::size_t i = 0; i < 90; ++i) {
    const std::size_t cls = i / 30;
    attribution::SummedMap m;
    m.protein_id = "m" + std::to_string(i);
    m.class_index = cls;
    m.values = Tensor({30, 16});
    for (std::size_t j = 0; j < m.values.size(); ++j) {
      m.values[j] = gen.normal();
      if (j % 3 == cls) m.values[j] += 2.0;  // class-specific head pattern
    }
    maps.push_back(std::move(m));
    classes.push_back("class" + std::to_string(cls));
  }
  const embed::FlatMaps flat = embed::flatten(maps, classes);
  const embed::PcaResult pca = embed::pca(flat.matrix, 50);

  std::vector<std::size_t> truth(90);
  for (std::size_t i = 0; i < 90; ++i) truth[i] = i / 30;

  std::size_t good_seeds = 0;
  bool kl_monotone = true;
  double worst_rand = 1.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    embed::TsneConfig config;
    config.perplexity = 25.0;  // invariant: perplexity < (N-1)/3 with N=90
    config.iterations = 1000;
    config.seed = seed;
    const embed::TsneResult tsne = embed::tsne(pca.scores, config);
    for (std::size_t i = 501; i < tsne.kl_history.size(); ++i) {
      if (tsne.kl_history[i] > tsne.kl_history[i - 1] + 1e-6) kl_monotone = false;
    }
    const auto clusters = embed::kmeans(tsne.points, 3, seed);
    const double rand = embed::rand_index(truth, clusters);
    worst_rand = std::min(worst_rand, rand);
    if (rand >= 0.9) ++good_seeds;
  }
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "collective dynamics: PCA(50)+t-SNE k-means Rand >= 0.9 on %zu/5 seeds (min %.3f), "
                "KL non-increasing over final 500 iterations: %s",
                good_seeds, worst_rand, kl_monotone ? "yes" : "NO");
  report(6, good_seeds == 5 && kl_monotone, buf);
}

// ---------------------------------------------------------------------------
// Criterion 7: training mechanics.
void criterion_7() {
  // Freeze epoch: encoder parameters bit-identical.
  data::SynthConfig synth;
  synth.n_proteins = 40;
  synth.min_length = 10;
  synth.max_length = 16;
  synth.motifs = {{"has_motif", "HDC", 0.5}};
  synth.seed = 77;
  const data::Dataset dataset = data::generate_synthetic(synth);

  ModelConfig cfg;
  cfg.n_layers = 2;
  cfg.n_heads = 2;
  cfg.d_model = 16;
  cfg.d_ff = 32;
  cfg.head_hidden = 8;
  cfg.n_classes = 2;
  cfg.class_vocab = dataset.class_vocab;
  cfg.max_positions = 32;

  Rng rng(71);
  const ModelWeights initial = ModelWeights::random_init(cfg, rng);
  train::TrainConfig tc = train::TrainConfig::toy_defaults();
  tc.max_epochs = 1;
  tc.freeze_encoder_epochs = 1;
  tc.seed = 5;
  const train::Checkpoint ckpt = train::train(dataset, cfg, tc, nullptr, &initial);

  bool frozen_ok = true;
  {
    std::vector<std::pair<const Tensor*, ParamGroup>> before, after;
    for_each_param(initial, [&](const std::string&, ParamGroup g, const Tensor& t) {
      before.emplace_back(&t, g);
    });
    for_each_param(ckpt.weights, [&](const std::string&, ParamGroup g, const Tensor& t) {
      after.emplace_back(&t, g);
    });
    for (std::size_t i = 0; i < before.size(); ++i) {
      if (before[i].second != ParamGroup::encoder) continue;
      const Tensor& a = *before[i].first;
      const Tensor& b = *after[i].first;
      for (std::size_t j = 0; j < a.size(); ++j) {
        if (a[j] != b[j]) frozen_ok = false;
      }
    }
  }

  // Gradient accumulation equivalence (exact): summing k unit micro-batches
  // then stepping equals one step on the summed gradient.
  bool accumulation_ok = true;
  {
    Rng wrng(72);
    ModelWeights weights = ModelWeights::random_init(cfg, wrng, 0.2);
    ModelWeights grads_a = ModelWeights::zeros(cfg);
    ModelWeights grads_b = ModelWeights::zeros(cfg);
    for (std::size_t i = 0; i < 4; ++i) {
      const auto& record = dataset.records[i];
      const auto tokens = tokenize(record.sequence);
      const ForwardCache cache = forward(weights, cfg, tokens);
      const std::size_t target =
          dataset.class_index(record.labels.count("has_motif") ? "has_motif" : "none");
      const Tensor d_logits = train::softmax_ce_grad(cache.logits, target);
      backward(weights, cfg, cache, d_logits, &grads_a);
      ModelWeights single = ModelWeights::zeros(cfg);
      backward(weights, cfg, cache, d_logits, &single);
      // accumulate manually
      std::vector<Tensor*> dst, src;
      for_each_param(grads_b, [&](const std::string&, ParamGroup, Tensor& t) { dst.push_back(&t); });
      for_each_param(single, [&](const std::string&, ParamGroup, Tensor& t) { src.push_back(&t); });
      for (std::size_t p = 0; p < dst.size(); ++p) dst[p]->add(*src[p]);
    }
    std::vector<const Tensor*> a_ptr, b_ptr;
    for_each_param(grads_a, [&](const std::string&, ParamGroup, const Tensor& t) { a_ptr.push_back(&t); });
    for_each_param(grads_b, [&](const std::string&, ParamGroup, const Tensor& t) { b_ptr.push_back(&t); });
    for (std::size_t p = 0; p < a_ptr.size(); ++p) {
      for (std::size_t j = 0; j < a_ptr[p]->size(); ++j) {
        if ((*a_ptr[p])[j] != (*b_ptr[p])[j]) accumulation_ok = false;
      }
    }
  }

  // Schedule boundary values.
  train::TrainConfig sched;
  sched.warmup_steps = 500;
  sched.total_steps = 20000;
  const double base = 3e-5;
  const bool schedule_ok =
      train::lr_schedule(0, base, sched) == 0.0 &&
      train::lr_schedule(500, base, sched) == base &&
      std::fabs(train::lr_schedule((500 + 20000) / 2, base, sched) - base / 2.0) <= 1e-12 * base;

  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "training mechanics: freeze-epoch encoder bitwise %s, accumulation equivalence "
                "%s, schedule boundaries %s",
                frozen_ok ? "identical" : "CHANGED", accumulation_ok ? "exact" : "BROKEN",
                schedule_ok ? "exact" : "BROKEN");
  report(7, frozen_ok && accumulation_ok && schedule_ok, buf);
}

// ---------------------------------------------------------------------------
// Criterion 8: CLI reproducibility (byte-identical primary outputs for
// identical inputs and seed, for any --jobs value).
int run_cli(const std::string& args) {
  const std::string cmd = std::string(XPROT_BIN) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

bool dirs_equal_excluding_manifest(const fs::path& a, const fs::path& b) {
  for (const auto& entry : fs::directory_iterator(a)) {
    const std::string name = entry.path().filename().string();
    if (name == "run_manifest.json") continue;
    if (!fs::exists(b / name)) return false;
    if (slurp(entry.path()) != slurp(b / name)) return false;
  }
  return true;
}

void criterion_8() {
  const fs::path base = fs::temp_directory_path() / "xprot_acceptance_cli";
  fs::remove_all(base);
  fs::create_directories(base);

  {
    std::ofstream f(base / "synth.json");
    f << R"({"n_proteins": 60, "min_length": 10, "max_length": 16,
            "motifs": [{"class_id": "has_motif", "motif": "HDCW", "probability": 0.5}],
            "seed": 31, "train_fraction": 0.5, "valid_fraction": 0.2, "test_fraction": 0.3})";
  }
  {
    std::ofstream f(base / "model.json");
    f << R"({"n_layers": 2, "n_heads": 2, "d_model": 8, "d_ff": 16, "n_classes": 2,
            "head_hidden": 6, "max_positions": 32, "task_kind": "multiclass"})";
  }
  {
    std::ofstream f(base / "train.json");
    f << R"({"lr_encoder": 5e-4, "lr_head": 1e-3, "warmup_steps": 5, "total_steps": 200,
            "accumulation": 4, "freeze_encoder_epochs": 1, "max_epochs": 2, "patience": 2,
            "seed": 13})";
  }

  bool ok = true;
  std::string detail;
  auto expect_zero = [&](const std::string& args, const char* what) {
    if (run_cli(args) != 0) {
      ok = false;
      detail += std::string(" ") + what;
    }
  };

  expect_zero("synth --config " + (base / "synth.json").string() + " --out " + (base / "d1").string(), "synth1");
  expect_zero("synth --config " + (base / "synth.json").string() + " --out " + (base / "d2").string(), "synth2");
  if (ok && !dirs_equal_excluding_manifest(base / "d1", base / "d2")) {
    ok = false;
    detail += " synth-mismatch";
  }

  expect_zero("train --data " + (base / "d1").string() + " --model-config " +
                  (base / "model.json").string() + " --train-config " + (base / "train.json").string() +
                  " --out " + (base / "c1" / "m.xprotw").string(),
              "train1");
  expect_zero("train --data " + (base / "d1").string() + " --model-config " +
                  (base / "model.json").string() + " --train-config " + (base / "train.json").string() +
                  " --out " + (base / "c2" / "m.xprotw").string(),
              "train2");
  if (ok && slurp(base / "c1" / "m.xprotw") != slurp(base / "c2" / "m.xprotw")) {
    ok = false;
    detail += " train-mismatch";
  }

  const std::string attr_common = " --fasta " + (base / "d1" / "sequences.fasta").string() +
                                  " --class has_motif --target all-layers --steps 8 --baseline zero";
  expect_zero("attribute --model " + (base / "c1" / "m.xprotw").string() + attr_common +
                  " --jobs 1 --out " + (base / "a1").string(),
              "attr1");
  expect_zero("attribute --model " + (base / "c1" / "m.xprotw").string() + attr_common +
                  " --jobs 2 --out " + (base / "a2").string(),
              "attr2");
  if (ok && !dirs_equal_excluding_manifest(base / "a1", base / "a2")) {
    ok = false;
    detail += " attr-jobs-mismatch";
  }

  const std::string analyze_common = " --data " + (base / "d1").string() +
                                     " --class has_motif --types motif --alpha 0.05";
  expect_zero("analyze --attr " + (base / "a1").string() + analyze_common + " --out " +
                  (base / "r1").string(),
              "analyze1");
  expect_zero("analyze --attr " + (base / "a2").string() + analyze_common + " --out " +
                  (base / "r2").string(),
              "analyze2");
  if (ok && !dirs_equal_excluding_manifest(base / "r1", base / "r2")) {
    ok = false;
    detail += " analyze-mismatch";
  }

  const std::string embed_common = " --pca 4 --perplexity 12 --seed 42 --iterations 250";
  expect_zero("embed --maps " + (base / "a1").string() + embed_common + " --out " +
                  (base / "v1").string(),
              "embed1");
  expect_zero("embed --maps " + (base / "a2").string() + embed_common + " --out " +
                  (base / "v2").string(),
              "embed2");
  if (ok && !dirs_equal_excluding_manifest(base / "v1", base / "v2")) {
    ok = false;
    detail += " embed-mismatch";
  }

  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "CLI reproducibility: byte-identical primary outputs across reruns and --jobs%s",
                ok ? "" : (" FAILED:" + detail).c_str());
  report(8, ok, buf);
}

}  // namespace

int main() {
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_5();  // fast ones before the heavy training run
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_4();
  if (g_failures > 0) {
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
  }
  std::printf("all acceptance criteria passed\n");
  return 0;
}
