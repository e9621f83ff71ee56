#include "xprot/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "xprot/error.hpp"

namespace xprot::train {

TrainConfig TrainConfig::toy_defaults() {
  TrainConfig c;
  c.lr_encoder = 5e-4;
  c.lr_head = 1e-3;
  c.warmup_steps = 50;
  c.total_steps = 2000;
  c.accumulation = 8;
  return c;
}

void TrainConfig::validate() const {
  if (lr_encoder <= 0.0 || lr_head <= 0.0) {
    throw Error(ErrorCode::invalid_argument, "train config: learning rates must be positive");
  }
  if (warmup_steps >= total_steps) {
    throw Error(ErrorCode::invalid_argument, "train config: warmup_steps must be < total_steps");
  }
  if (accumulation == 0 || max_epochs == 0 || patience == 0) {
    throw Error(ErrorCode::invalid_argument, "train config: zero-sized loop parameter");
  }
}

std::string train_config_to_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["lr_encoder"] = c.lr_encoder;
  j["lr_head"] = c.lr_head;
  j["warmup_steps"] = c.warmup_steps;
  j["total_steps"] = c.total_steps;
  j["accumulation"] = c.accumulation;
  j["freeze_encoder_epochs"] = c.freeze_encoder_epochs;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["eps"] = c.eps;
  j["max_epochs"] = c.max_epochs;
  j["patience"] = c.patience;
  j["seed"] = c.seed;
  return j.dump(2);
}

TrainConfig train_config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("train config: ") + e.what());
  }
  TrainConfig c;
  c.lr_encoder = j.value("lr_encoder", c.lr_encoder);
  c.lr_head = j.value("lr_head", c.lr_head);
  c.warmup_steps = j.value("warmup_steps", c.warmup_steps);
  c.total_steps = j.value("total_steps", c.total_steps);
  c.accumulation = j.value("accumulation", c.accumulation);
  c.freeze_encoder_epochs = j.value("freeze_encoder_epochs", c.freeze_encoder_epochs);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.eps = j.value("eps", c.eps);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.patience = j.value("patience", c.patience);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

double lr_schedule(std::size_t step, double base_rate, const TrainConfig& config) {
  if (step < config.warmup_steps) {
    return base_rate * static_cast<double>(step) / static_cast<double>(config.warmup_steps);
  }
  if (step >= config.total_steps) return 0.0;
  const double progress = static_cast<double>(step - config.warmup_steps) /
                          static_cast<double>(config.total_steps - config.warmup_steps);
  return base_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

void adam_step(Tensor& param, const Tensor& grad, AdamState& state, double rate,
               double beta1, double beta2, double eps) {
  if (!param.same_shape(grad)) {
    throw Error(ErrorCode::dimension_mismatch,
                "adam_step: param " + param.shape_string() + " vs grad " + grad.shape_string());
  }
  if (state.t == 0) {
    state.m = Tensor(param.shape());
    state.v = Tensor(param.shape());
  }
  if (!grad.all_finite()) {
    throw Error(ErrorCode::numeric_failure, "adam_step: non-finite gradient");
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    param[i] -= rate * m_hat / (std::sqrt(v_hat) + eps);
  }
}

double bce_with_logits(const Tensor& logits, const std::vector<std::uint8_t>& targets) {
  if (logits.size() != targets.size()) {
    throw Error(ErrorCode::dimension_mismatch, "bce_with_logits: size mismatch");
  }
  // mean over labels of max(z,0) - z*t + log(1 + exp(-|z|))
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double z = logits[i];
    const double t = targets[i] ? 1.0 : 0.0;
    total += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::fabs(z)));
  }
  return total / static_cast<double>(logits.size());
}

Tensor bce_with_logits_grad(const Tensor& logits, const std::vector<std::uint8_t>& targets) {
  Tensor g(logits.shape());
  const double inv_n = 1.0 / static_cast<double>(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double sigma = 1.0 / (1.0 + std::exp(-logits[i]));
    g[i] = (sigma - (targets[i] ? 1.0 : 0.0)) * inv_n;
  }
  return g;
}

double softmax_ce(const Tensor& logits, std::size_t target_class) {
  if (target_class >= logits.size()) {
    throw Error(ErrorCode::invalid_argument, "softmax_ce: class index out of range");
  }
  double mx = logits[0];
  for (std::size_t i = 1; i < logits.size(); ++i) mx = std::max(mx, logits[i]);
  double lse = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) lse += std::exp(logits[i] - mx);
  return std::log(lse) + mx - logits[target_class];
}

Tensor softmax_ce_grad(const Tensor& logits, std::size_t target_class) {
  Tensor g(logits.shape());
  double mx = logits[0];
  for (std::size_t i = 1; i < logits.size(); ++i) mx = std::max(mx, logits[i]);
  double denom = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) denom += std::exp(logits[i] - mx);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    g[i] = std::exp(logits[i] - mx) / denom - (i == target_class ? 1.0 : 0.0);
  }
  return g;
}

namespace {

std::vector<std::uint8_t> label_vector(const data::ProteinRecord& record,
                                       const std::vector<std::string>& vocab) {
  std::vector<std::uint8_t> targets(vocab.size(), 0);
  for (std::size_t c = 0; c < vocab.size(); ++c) {
    if (record.labels.count(vocab[c])) targets[c] = 1;
  }
  return targets;
}

std::size_t single_class_index(const data::ProteinRecord& record,
                               const std::vector<std::string>& vocab) {
  if (record.labels.size() != 1) {
    throw Error(ErrorCode::invalid_argument,
                "multiclass task requires exactly one label per protein; '" + record.id +
                    "' has " + std::to_string(record.labels.size()));
  }
  const auto it = std::find(vocab.begin(), vocab.end(), *record.labels.begin());
  if (it == vocab.end()) {
    throw Error(ErrorCode::invalid_argument, "label of '" + record.id + "' not in class vocab");
  }
  return static_cast<std::size_t>(it - vocab.begin());
}

}  // namespace

double f_max_protein_centric(const std::vector<std::vector<double>>& scores,
                             const std::vector<std::vector<std::uint8_t>>& targets) {
  double best = 0.0;
  for (int ti = 1; ti <= 100; ++ti) {
    const double threshold = 0.01 * ti;
    std::size_t covered = 0;    // proteins with at least one prediction
    std::size_t evaluated = 0;  // proteins with at least one true label
    double precision_sum = 0.0, recall_sum = 0.0;
    for (std::size_t p = 0; p < scores.size(); ++p) {
      std::size_t true_count = 0, pred_count = 0, hit = 0;
      for (std::size_t c = 0; c < scores[p].size(); ++c) {
        const bool is_true = targets[p][c] != 0;
        const bool is_pred = scores[p][c] >= threshold;
        true_count += is_true;
        pred_count += is_pred;
        hit += (is_true && is_pred);
      }
      if (true_count == 0) continue;  // unlabeled proteins carry no recall signal
      ++evaluated;
      recall_sum += static_cast<double>(hit) / static_cast<double>(true_count);
      if (pred_count > 0) {
        ++covered;
        precision_sum += static_cast<double>(hit) / static_cast<double>(pred_count);
      }
    }
    if (covered == 0 || evaluated == 0) continue;
    const double precision = precision_sum / static_cast<double>(covered);
    const double recall = recall_sum / static_cast<double>(evaluated);
    if (precision + recall > 0.0) {
      best = std::max(best, 2.0 * precision * recall / (precision + recall));
    }
  }
  return best;
}

EvalResult evaluate(const ModelWeights& weights, const ModelConfig& config,
                    const data::Dataset& dataset, const std::vector<std::size_t>& indices) {
  if (indices.empty()) {
    throw Error(ErrorCode::empty_result, "evaluate: empty split");
  }
  EvalResult out;
  std::vector<std::vector<double>> all_scores;
  std::vector<std::vector<std::uint8_t>> all_targets;
  std::size_t correct = 0;
  double loss_sum = 0.0;
  for (std::size_t idx : indices) {
    const auto& record = dataset.records[idx];
    const auto tokens = tokenize(record.sequence);
    ForwardCache cache = forward(weights, config, tokens);
    if (config.task_kind == TaskKind::multiclass) {
      const std::size_t target = single_class_index(record, dataset.class_vocab);
      loss_sum += softmax_ce(cache.logits, target);
      std::size_t arg = 0;
      for (std::size_t c = 1; c < cache.logits.size(); ++c) {
        if (cache.logits[c] > cache.logits[arg]) arg = c;
      }
      if (arg == target) ++correct;
    } else {
      const auto targets = label_vector(record, dataset.class_vocab);
      loss_sum += bce_with_logits(cache.logits, targets);
      std::vector<double> scores(cache.logits.size());
      for (std::size_t c = 0; c < cache.logits.size(); ++c) {
        scores[c] = 1.0 / (1.0 + std::exp(-cache.logits[c]));
      }
      all_scores.push_back(std::move(scores));
      all_targets.push_back(targets);
    }
  }
  out.loss = loss_sum / static_cast<double>(indices.size());
  if (config.task_kind == TaskKind::multiclass) {
    out.accuracy = static_cast<double>(correct) / static_cast<double>(indices.size());
  } else {
    out.f_max = f_max_protein_centric(all_scores, all_targets);
  }
  return out;
}

Checkpoint train(const data::Dataset& dataset, const ModelConfig& model_config,
                 const TrainConfig& train_config, std::ostream* log,
                 const ModelWeights* initial_weights) {
  model_config.validate();
  train_config.validate();

  std::vector<std::size_t> train_idx = dataset.split_indices(data::Split::train);
  std::vector<std::size_t> valid_idx = dataset.split_indices(data::Split::valid);
  if (train_idx.empty()) {
    throw Error(ErrorCode::empty_result, "train: empty training split");
  }
  if (valid_idx.empty()) {
    // Carve a random 10% validation subset out of the training data.
    Rng carve_rng = Rng(train_config.seed).child(17);
    std::vector<std::size_t> order = train_idx;
    carve_rng.shuffle(order);
    const std::size_t n_valid = std::max<std::size_t>(1, order.size() / 10);
    valid_idx.assign(order.begin(), order.begin() + n_valid);
    train_idx.assign(order.begin() + n_valid, order.end());
  }

  Rng rng(train_config.seed);
  Rng init_rng = rng.child(1);
  Rng dropout_rng = rng.child(2);
  ModelWeights weights = initial_weights != nullptr
                             ? *initial_weights
                             : ModelWeights::random_init(model_config, init_rng);
  if (initial_weights != nullptr) weights.validate(model_config);
  ModelWeights grads = ModelWeights::zeros(model_config);

  struct ParamSlot {
    ParamGroup group;
    Tensor* param;
    Tensor* grad;
    AdamState state;
  };
  std::vector<ParamSlot> slots;
  for_each_param(weights, [&](const std::string&, ParamGroup group, Tensor& t) {
    slots.push_back({group, &t, nullptr, AdamState{}});
  });
  {
    std::size_t i = 0;
    for_each_param(grads, [&](const std::string&, ParamGroup, Tensor& g) {
      slots[i++].grad = &g;
    });
  }

  const bool maximize = model_config.task_kind == TaskKind::multiclass;
  Checkpoint best;
  best.config = model_config;
  best.metric_kind = maximize ? "accuracy" : "loss";
  double best_value = maximize ? -1.0 : std::numeric_limits<double>::infinity();
  std::size_t epochs_without_improvement = 0;
  std::size_t step = 0;

  for (std::size_t epoch = 1; epoch <= train_config.max_epochs; ++epoch) {
    const bool encoder_frozen = epoch <= train_config.freeze_encoder_epochs;
    std::vector<std::size_t> order = train_idx;
    rng.child(1000 + epoch).shuffle(order);

    std::size_t pending = 0;
    auto apply_step = [&]() {
      ++step;
      const double rate_encoder = lr_schedule(step, train_config.lr_encoder, train_config);
      const double rate_head = lr_schedule(step, train_config.lr_head, train_config);
      for (ParamSlot& slot : slots) {
        if (!(slot.group == ParamGroup::encoder && encoder_frozen)) {
          const double rate = slot.group == ParamGroup::encoder ? rate_encoder : rate_head;
          adam_step(*slot.param, *slot.grad, slot.state, rate, train_config.beta1,
                    train_config.beta2, train_config.eps);
        }
        slot.grad->fill(0.0);
      }
      pending = 0;
    };

    double epoch_loss = 0.0;
    for (std::size_t i = 0; i < order.size(); ++i) {
      const auto& record = dataset.records[order[i]];
      const auto tokens = tokenize(record.sequence);
      ForwardCache cache = forward(weights, model_config, tokens, &dropout_rng);
      double loss;
      Tensor d_logits;
      if (model_config.task_kind == TaskKind::multiclass) {
        const std::size_t target = single_class_index(record, dataset.class_vocab);
        loss = softmax_ce(cache.logits, target);
        d_logits = softmax_ce_grad(cache.logits, target);
      } else {
        const auto targets = label_vector(record, dataset.class_vocab);
        loss = bce_with_logits(cache.logits, targets);
        d_logits = bce_with_logits_grad(cache.logits, targets);
      }
      if (!std::isfinite(loss)) {
        throw Error(ErrorCode::numeric_failure,
                    "train: non-finite loss at epoch " + std::to_string(epoch) + " sample " +
                        record.id);
      }
      epoch_loss += loss;
      backward(weights, model_config, cache, d_logits, &grads);
      ++pending;
      if (pending == train_config.accumulation || i + 1 == order.size()) apply_step();
    }

    const EvalResult eval = evaluate(weights, model_config, dataset, valid_idx);
    const double metric = maximize ? eval.accuracy : eval.loss;
    if (log) {
      (*log) << "epoch=" << epoch << " step=" << step
             << " train_loss=" << epoch_loss / static_cast<double>(order.size())
             << " val_loss=" << eval.loss;
      if (maximize) {
        (*log) << " val_accuracy=" << eval.accuracy;
      } else {
        (*log) << " val_fmax=" << eval.f_max;
      }
      (*log) << std::endl;
    }
    const bool improved = maximize ? metric > best_value : metric < best_value;
    if (improved) {
      best_value = metric;
      best.weights = weights;
      best.epoch = epoch;
      best.metric = metric;
      epochs_without_improvement = 0;
    } else if (++epochs_without_improvement >= train_config.patience) {
      break;
    }
  }
  if (best.epoch == 0) {
    throw Error(ErrorCode::numeric_failure, "train: no epoch produced a finite metric");
  }
  return best;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::string& archive_path) {
  save_weights(archive_path, checkpoint.config, checkpoint.weights);
  nlohmann::ordered_json sidecar;
  sidecar["epoch"] = checkpoint.epoch;
  sidecar["metric"] = checkpoint.metric;
  sidecar["metric_kind"] = checkpoint.metric_kind;
  std::ofstream out(archive_path + ".json", std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::io_error, "save_checkpoint: cannot write sidecar");
  }
  out << sidecar.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::string& archive_path) {
  Checkpoint ckpt;
  auto [config, weights] = load_weights(archive_path);
  ckpt.config = std::move(config);
  ckpt.weights = std::move(weights);
  std::ifstream in(archive_path + ".json");
  if (in) {
    nlohmann::json sidecar = nlohmann::json::parse(in, nullptr, false);
    if (!sidecar.is_discarded()) {
      ckpt.epoch = sidecar.value("epoch", std::size_t{0});
      ckpt.metric = sidecar.value("metric", 0.0);
      ckpt.metric_kind = sidecar.value("metric_kind", std::string{});
    }
  }
  return ckpt;
}

}  // namespace xprot::train
