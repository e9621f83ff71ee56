#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "xprot/data.hpp"
#include "xprot/error.hpp"
#include "xprot/model.hpp"
#include "xprot/rng.hpp"
#include "xprot/train.hpp"

using namespace xprot;
using namespace xprot::train;

namespace {

TrainConfig schedule_config() {
  TrainConfig c;
  c.warmup_steps = 500;
  c.total_steps = 20000;
  return c;
}

data::Dataset tiny_motif_dataset(std::size_t n, std::uint64_t seed) {
  data::SynthConfig config;
  config.n_proteins = n;
  config.min_length = 12;
  config.max_length = 20;
  config.motifs = {{"has_motif", "HDCW", 0.5}};
  config.seed = seed;
  return data::generate_synthetic(config);
}

ModelConfig small_model(std::size_t n_classes = 2) {
  ModelConfig cfg;
  cfg.n_layers = 2;
  cfg.n_heads = 2;
  cfg.d_model = 16;
  cfg.d_ff = 32;
  cfg.head_hidden = 12;
  cfg.n_classes = n_classes;
  cfg.max_positions = 64;
  return cfg;
}

}  // namespace

TEST_CASE("lr schedule boundary values") {
  TrainConfig c = schedule_config();
  const double base = 3e-5;
  CHECK(lr_schedule(0, base, c) == 0.0);
  CHECK(lr_schedule(c.warmup_steps, base, c) == base);  // cosine branch at progress 0
  const std::size_t midpoint = (c.warmup_steps + c.total_steps) / 2;
  CHECK(std::fabs(lr_schedule(midpoint, base, c) - base / 2.0) <= 1e-12 * base);
  CHECK(lr_schedule(c.total_steps, base, c) == 0.0);
  CHECK(lr_schedule(c.total_steps + 1000, base, c) == 0.0);
}

TEST_CASE("lr schedule continuity at the warmup boundary") {
  TrainConfig c = schedule_config();
  const double base = 1.0;
  const double left = lr_schedule(c.warmup_steps - 1, base, c);
  const double right = lr_schedule(c.warmup_steps, base, c);
  CHECK(std::fabs(right - left) <= base / static_cast<double>(c.warmup_steps) + 1e-12);
  CHECK(right == base);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  Tensor p({4}, 1.5);
  Tensor g({4}, 0.0);
  AdamState state;
  adam_step(p, g, state, 0.1, 0.9, 0.999, 1e-8);
  for (std::size_t i = 0; i < 4; ++i) CHECK(p[i] == 1.5);
}

TEST_CASE("adam: first step with unit gradient") {
  const double rate = 0.05, eps = 1e-8;
  Tensor p({1}, 2.0);
  Tensor g({1}, 1.0);
  AdamState state;
  adam_step(p, g, state, rate, 0.9, 0.999, eps);
  // m_hat = v_hat = 1 after bias correction, so the update is -rate/(1+eps).
  CHECK(std::fabs((p[0] - 2.0) + rate / (1.0 + eps)) <= 1e-15);
}

TEST_CASE("adam: two identical gradients match a scripted oracle") {
  const double rate = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8, g = 0.7;
  Tensor p({1}, 1.0);
  AdamState state;
  Tensor grad({1}, g);
  adam_step(p, grad, state, rate, b1, b2, eps);
  adam_step(p, grad, state, rate, b1, b2, eps);

  // Scripted two-step Adam, written independently.
  double m = 0.0, v = 0.0, x = 1.0;
  for (int t = 1; t <= 2; ++t) {
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t));
    const double vh = v / (1 - std::pow(b2, t));
    x -= rate * mh / (std::sqrt(vh) + eps);
  }
  CHECK(std::fabs(p[0] - x) <= 1e-12);
}

TEST_CASE("adam rejects non-finite gradients") {
  Tensor p({2}, 0.0);
  Tensor g({2}, 0.0);
  g[1] = std::nan("");
  AdamState state;
  CHECK_THROWS_AS(adam_step(p, g, state, 0.1, 0.9, 0.999, 1e-8), Error);
}

TEST_CASE("bce with logits hand values") {
  Tensor logits({1}, 0.0);
  CHECK(bce_with_logits(logits, {1}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  Tensor logits4({4}, 0.0);
  CHECK(bce_with_logits(logits4, {1, 0, 1, 0}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("softmax ce with uniform logits is ln k") {
  for (std::size_t k = 2; k <= 6; ++k) {
    Tensor logits({k}, 0.37);
    CHECK(softmax_ce(logits, 0) == doctest::Approx(std::log(static_cast<double>(k))).epsilon(1e-12));
  }
}

TEST_CASE("loss gradients match finite differences") {
  Rng rng(3);
  const double eps = 1e-6;
  for (int trial = 0; trial < 5; ++trial) {
    Tensor logits({5});
    for (std::size_t i = 0; i < 5; ++i) logits[i] = rng.normal();
    std::vector<std::uint8_t> targets = {1, 0, 1, 1, 0};

    const Tensor g_bce = bce_with_logits_grad(logits, targets);
    const Tensor g_ce = softmax_ce_grad(logits, 2);
    for (std::size_t i = 0; i < 5; ++i) {
      Tensor lp = logits, lm = logits;
      lp[i] += eps;
      lm[i] -= eps;
      const double fd_bce = (bce_with_logits(lp, targets) - bce_with_logits(lm, targets)) / (2 * eps);
      CHECK(std::fabs(fd_bce - g_bce[i]) <=
            1e-6 * std::max(1.0, std::fabs(g_bce[i])));
      const double fd_ce = (softmax_ce(lp, 2) - softmax_ce(lm, 2)) / (2 * eps);
      CHECK(std::fabs(fd_ce - g_ce[i]) <= 1e-6 * std::max(1.0, std::fabs(g_ce[i])));
    }
  }
}

TEST_CASE("f_max: perfect predictions give 1") {
  std::vector<std::vector<double>> scores = {{1.0, 0.0}, {0.0, 1.0}};
  std::vector<std::vector<std::uint8_t>> targets = {{1, 0}, {0, 1}};
  CHECK(f_max_protein_centric(scores, targets) == doctest::Approx(1.0));
}

TEST_CASE("f_max: all-zero scores give 0") {
  std::vector<std::vector<double>> scores = {{0.0, 0.0}, {0.0, 0.0}};
  std::vector<std::vector<std::uint8_t>> targets = {{1, 0}, {0, 1}};
  CHECK(f_max_protein_centric(scores, targets) == 0.0);
}

TEST_CASE("f_max matches brute force sweep oracle on random scores") {
  Rng rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t n = 12, k = 6;
    std::vector<std::vector<double>> scores(n, std::vector<double>(k));
    std::vector<std::vector<std::uint8_t>> targets(n, std::vector<std::uint8_t>(k));
    for (auto& row : scores) {
      for (auto& v : row) v = rng.next_double();
    }
    for (auto& row : targets) {
      bool any = false;
      for (auto& v : row) {
        v = rng.next_double() < 0.3 ? 1 : 0;
        any = any || v;
      }
      if (!any) row[0] = 1;
    }

    // Independent oracle: direct per-threshold computation.
    double best = 0.0;
    for (int ti = 1; ti <= 100; ++ti) {
      const double t = ti * 0.01;
      double sp = 0, sr = 0;
      std::size_t m = 0, n_eval = 0;
      for (std::size_t i = 0; i < n; ++i) {
        std::size_t tp = 0, pp = 0, tt = 0;
        for (std::size_t c = 0; c < k; ++c) {
          const bool pred = scores[i][c] >= t;
          pp += pred;
          tt += targets[i][c];
          tp += pred && targets[i][c];
        }
        if (tt == 0) continue;
        ++n_eval;
        sr += static_cast<double>(tp) / tt;
        if (pp > 0) {
          ++m;
          sp += static_cast<double>(tp) / pp;
        }
      }
      if (m == 0 || n_eval == 0) continue;
      const double pr = sp / m, rc = sr / n_eval;
      if (pr + rc > 0) best = std::max(best, 2 * pr * rc / (pr + rc));
    }
    CHECK(f_max_protein_centric(scores, targets) == doctest::Approx(best).epsilon(1e-14));
  }
}

TEST_CASE("gradient accumulation equals one step on the summed gradient") {
  ModelConfig cfg = small_model();
  data::Dataset dataset = tiny_motif_dataset(12, 5);
  cfg.class_vocab = dataset.class_vocab;
  Rng rng(7);
  ModelWeights weights = ModelWeights::random_init(cfg, rng);

  // Per-sample gradients, summed manually in sample order.
  ModelWeights summed = ModelWeights::zeros(cfg);
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& record = dataset.records[i];
    const auto tokens = tokenize(record.sequence);
    ForwardCache cache = forward(weights, cfg, tokens);
    const std::size_t target = record.labels.count("has_motif") ? 1 : 0;
    const std::size_t target_idx = dataset.class_index(
        target == 1 ? "has_motif" : "none");
    Tensor d_logits = softmax_ce_grad(cache.logits, target_idx);
    backward(weights, cfg, cache, d_logits, &summed);
  }

  ModelWeights w_a = weights, w_b = weights;
  // One step on the summed gradient.
  std::vector<AdamState> states_a, states_b;
  std::size_t count = 0;
  for_each_param(w_a, [&](const std::string&, ParamGroup, Tensor&) { ++count; });
  states_a.resize(count);
  states_b.resize(count);

  std::vector<Tensor*> params_a, params_b;
  std::vector<const Tensor*> grads;
  for_each_param(w_a, [&](const std::string&, ParamGroup, Tensor& t) { params_a.push_back(&t); });
  for_each_param(w_b, [&](const std::string&, ParamGroup, Tensor& t) { params_b.push_back(&t); });
  for_each_param(summed, [&](const std::string&, ParamGroup, const Tensor& t) { grads.push_back(&t); });

  for (std::size_t i = 0; i < count; ++i) {
    adam_step(*params_a[i], *grads[i], states_a[i], 1e-3, 0.9, 0.999, 1e-8);
  }

  // Accumulation loop: sum micro-batch gradients into one buffer, step once.
  ModelWeights accum = ModelWeights::zeros(cfg);
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& record = dataset.records[i];
    const auto tokens = tokenize(record.sequence);
    ForwardCache cache = forward(w_b, cfg, tokens);
    const std::size_t target_idx = dataset.class_index(
        record.labels.count("has_motif") ? "has_motif" : "none");
    Tensor d_logits = softmax_ce_grad(cache.logits, target_idx);
    backward(w_b, cfg, cache, d_logits, &accum);
  }
  std::vector<const Tensor*> accum_grads;
  for_each_param(accum, [&](const std::string&, ParamGroup, const Tensor& t) { accum_grads.push_back(&t); });
  for (std::size_t i = 0; i < count; ++i) {
    adam_step(*params_b[i], *accum_grads[i], states_b[i], 1e-3, 0.9, 0.999, 1e-8);
  }

  // Identical weights in, identical sample order: bitwise equal out.
  for (std::size_t i = 0; i < count; ++i) {
    const Tensor& a = *params_a[i];
    const Tensor& b = *params_b[i];
    for (std::size_t j = 0; j < a.size(); ++j) {
      REQUIRE(a[j] == b[j]);
    }
  }
}

TEST_CASE("freeze epoch leaves encoder weights bitwise unchanged") {
  ModelConfig cfg = small_model();
  data::Dataset dataset = tiny_motif_dataset(30, 9);
  cfg.class_vocab = dataset.class_vocab;
  Rng rng(21);
  const ModelWeights initial = ModelWeights::random_init(cfg, rng);

  TrainConfig tc = TrainConfig::toy_defaults();
  tc.max_epochs = 1;
  tc.freeze_encoder_epochs = 1;
  tc.seed = 4;
  const Checkpoint ckpt = xprot::train::train(dataset, cfg, tc, nullptr, &initial);

  bool encoder_identical = true;
  bool head_changed = false;
  std::vector<std::pair<const Tensor*, ParamGroup>> before, after;
  for_each_param(initial, [&](const std::string&, ParamGroup g, const Tensor& t) {
    before.emplace_back(&t, g);
  });
  for_each_param(ckpt.weights, [&](const std::string&, ParamGroup g, const Tensor& t) {
    after.emplace_back(&t, g);
  });
  for (std::size_t i = 0; i < before.size(); ++i) {
    const Tensor& a = *before[i].first;
    const Tensor& b = *after[i].first;
    for (std::size_t j = 0; j < a.size(); ++j) {
      if (before[i].second == ParamGroup::encoder) {
        if (a[j] != b[j]) encoder_identical = false;
      } else if (a[j] != b[j]) {
        head_changed = true;
      }
    }
  }
  CHECK(encoder_identical);
  CHECK(head_changed);
}

TEST_CASE("training loss decreases over the first epoch (windowed)") {
  ModelConfig cfg = small_model();
  data::Dataset dataset = tiny_motif_dataset(240, 13);
  cfg.class_vocab = dataset.class_vocab;
  cfg.dropout_rate = 0.0;
  Rng rng(31);
  ModelWeights weights = ModelWeights::random_init(cfg, rng);

  // Manual first epoch: head-only updates (as in the freeze epoch), window
  // size 8 micro-batches, one Adam step per window.
  std::vector<AdamState> states;
  std::vector<Tensor*> params;
  std::vector<ParamGroup> groups;
  for_each_param(weights, [&](const std::string&, ParamGroup g, Tensor& t) {
    params.push_back(&t);
    groups.push_back(g);
  });
  states.resize(params.size());

  const auto train_idx = dataset.split_indices(data::Split::train);
  std::vector<double> window_means;
  double window_sum = 0.0;
  std::size_t window_count = 0;
  ModelWeights grads = ModelWeights::zeros(cfg);
  std::vector<Tensor*> grad_ptrs;
  for_each_param(grads, [&](const std::string&, ParamGroup, Tensor& t) { grad_ptrs.push_back(&t); });

  // Logging window = 16 micro-batches; one optimizer step every 8.
  for (std::size_t i = 0; i < train_idx.size(); ++i) {
    const auto& record = dataset.records[train_idx[i]];
    const auto tokens = tokenize(record.sequence);
    ForwardCache cache = forward(weights, cfg, tokens);
    const std::size_t target_idx = dataset.class_index(
        record.labels.count("has_motif") ? "has_motif" : "none");
    window_sum += softmax_ce(cache.logits, target_idx);
    ++window_count;
    backward(weights, cfg, cache, softmax_ce_grad(cache.logits, target_idx), &grads);
    if ((i + 1) % 8 == 0) {
      for (std::size_t p = 0; p < params.size(); ++p) {
        adam_step(*params[p], *grad_ptrs[p], states[p], 2e-3, 0.9, 0.999, 1e-8);
        grad_ptrs[p]->fill(0.0);
      }
    }
    if (window_count == 16) {
      window_means.push_back(window_sum / 16.0);
      window_sum = 0.0;
      window_count = 0;
    }
  }
  REQUIRE(window_means.size() >= 8);
  std::size_t non_increasing = 0;
  for (std::size_t i = 1; i < window_means.size(); ++i) {
    if (window_means[i] <= window_means[i - 1] + 1e-6) ++non_increasing;
  }
  CHECK(static_cast<double>(non_increasing) >=
        0.8 * static_cast<double>(window_means.size() - 1));
  CHECK(window_means.back() < window_means.front());
}

TEST_CASE("training is deterministic and early stopping works") {
  ModelConfig cfg = small_model();
  data::Dataset dataset = tiny_motif_dataset(40, 19);
  cfg.class_vocab = dataset.class_vocab;
  TrainConfig tc = TrainConfig::toy_defaults();
  tc.max_epochs = 3;
  tc.patience = 2;
  tc.seed = 11;
  const Checkpoint a = xprot::train::train(dataset, cfg, tc);
  const Checkpoint b = xprot::train::train(dataset, cfg, tc);
  CHECK(a.epoch == b.epoch);
  CHECK(a.metric == b.metric);
  CHECK(a.weights.token_embedding[0] == b.weights.token_embedding[0]);
}

TEST_CASE("evaluate rejects an empty split") {
  ModelConfig cfg = small_model();
  data::Dataset dataset = tiny_motif_dataset(10, 23);
  cfg.class_vocab = dataset.class_vocab;
  Rng rng(1);
  ModelWeights w = ModelWeights::random_init(cfg, rng);
  CHECK_THROWS_AS(evaluate(w, cfg, dataset, {}), Error);
}

TEST_CASE("multilabel evaluate returns loss and f_max") {
  ModelConfig cfg = small_model(3);
  cfg.task_kind = TaskKind::multilabel;
  data::Dataset dataset;
  dataset.records = data::parse_fasta(">p1\nMKLVHAAK\n>p2\nACDEFGHI\n");
  dataset.records[0].labels = {"a", "b"};
  dataset.records[1].labels = {"c"};
  dataset.rebuild_class_vocab();
  cfg.class_vocab = dataset.class_vocab;
  Rng rng(2);
  ModelWeights w = ModelWeights::random_init(cfg, rng);
  const EvalResult r = evaluate(w, cfg, dataset, {0, 1});
  CHECK(std::isfinite(r.loss));
  CHECK(r.f_max >= 0.0);
  CHECK(r.f_max <= 1.0);
}

TEST_CASE("train config json round trip and validation") {
  TrainConfig c = TrainConfig::toy_defaults();
  c.seed = 99;
  const TrainConfig back = train_config_from_json(train_config_to_json(c));
  CHECK(back.warmup_steps == c.warmup_steps);
  CHECK(back.seed == 99);
  TrainConfig bad;
  bad.warmup_steps = 100;
  bad.total_steps = 50;
  CHECK_THROWS_AS(bad.validate(), Error);
}
