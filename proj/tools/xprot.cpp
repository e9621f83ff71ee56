#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "xprot/analysis.hpp"
#include "xprot/attribution.hpp"
#include "xprot/data.hpp"
#include "xprot/embed.hpp"
#include "xprot/error.hpp"
#include "xprot/model.hpp"
#include "xprot/run_manifest.hpp"
#include "xprot/stats.hpp"
#include "xprot/train.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

// Exit codes: 0 ok, 1 usage, 2 input/config, 3 numeric failure, 4 empty result.
int exit_code_for(const xprot::Error& e) {
  switch (e.code()) {
    case xprot::ErrorCode::numeric_failure:
      return 3;
    case xprot::ErrorCode::empty_result:
      return 4;
    default:
      return 2;
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw xprot::Error(xprot::ErrorCode::io_error, "cannot open " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw xprot::Error(xprot::ErrorCode::io_error, "cannot write " + path);
  }
  out << content;
}

std::string join_args(int argc, char** argv) {
  std::string out;
  for (int i = 0; i < argc; ++i) {
    if (i) out += " ";
    out += argv[i];
  }
  return out;
}

std::size_t resolve_class(const xprot::ModelConfig& config, const std::string& class_name) {
  for (std::size_t i = 0; i < config.class_vocab.size(); ++i) {
    if (config.class_vocab[i] == class_name) return i;
  }
  // Bare index fallback when the checkpoint carries no vocabulary.
  if (config.class_vocab.empty()) {
    try {
      const std::size_t idx = std::stoull(class_name);
      if (idx < config.n_classes) return idx;
    } catch (...) {
    }
  }
  throw xprot::Error(xprot::ErrorCode::invalid_argument,
                     "unknown class id '" + class_name + "'");
}

struct SynthOptions {
  std::string config_path, out_dir;
  std::int64_t seed_override = -1;
};

int run_synth(const SynthOptions& opt, const std::string& command) {
  xprot::RunManifest manifest;
  manifest.command = command;
  manifest.started_utc = xprot::utc_timestamp();
  manifest.add_input(opt.config_path);

  xprot::data::SynthConfig config = xprot::data::synth_config_from_json(read_file(opt.config_path));
  if (opt.seed_override >= 0) config.seed = static_cast<std::uint64_t>(opt.seed_override);
  manifest.seed = config.seed;
  manifest.config_json = xprot::data::synth_config_to_json(config);

  xprot::data::Dataset dataset = xprot::data::generate_synthetic(config);
  xprot::data::save_dataset(dataset, opt.out_dir);
  std::cout << "proteins=" << dataset.records.size() << " classes=" << dataset.class_vocab.size()
            << " out=" << opt.out_dir << "\n";

  manifest.finished_utc = xprot::utc_timestamp();
  manifest.write(opt.out_dir);
  return 0;
}

struct TrainOptions {
  std::string data_dir, model_config_path, train_config_path, out_path;
  std::int64_t seed_override = -1;
  std::int64_t freeze_override = -1;
};

int run_train(const TrainOptions& opt, const std::string& command) {
  xprot::RunManifest manifest;
  manifest.command = command;
  manifest.started_utc = xprot::utc_timestamp();

  xprot::data::Dataset dataset = xprot::data::load_dataset(opt.data_dir);
  xprot::ModelConfig model_config = xprot::model_config_from_json(read_file(opt.model_config_path));
  xprot::train::TrainConfig train_config =
      xprot::train::train_config_from_json(read_file(opt.train_config_path));
  if (opt.seed_override >= 0) train_config.seed = static_cast<std::uint64_t>(opt.seed_override);
  if (opt.freeze_override >= 0) {
    train_config.freeze_encoder_epochs = static_cast<std::size_t>(opt.freeze_override);
  }
  manifest.add_input(opt.model_config_path);
  manifest.add_input(opt.train_config_path);
  for (const char* name : {"sequences.fasta", "labels.tsv", "annotations.tsv", "splits.tsv"}) {
    const fs::path p = fs::path(opt.data_dir) / name;
    if (fs::exists(p)) manifest.add_input(p.string());
  }
  manifest.seed = train_config.seed;

  if (model_config.n_classes != dataset.class_vocab.size()) {
    throw xprot::Error(xprot::ErrorCode::invalid_argument,
                       "model config declares " + std::to_string(model_config.n_classes) +
                           " classes but the dataset has " +
                           std::to_string(dataset.class_vocab.size()));
  }
  model_config.class_vocab = dataset.class_vocab;
  {
    json snapshot;
    snapshot["model"] = json::parse(xprot::model_config_to_json(model_config));
    snapshot["train"] = json::parse(xprot::train::train_config_to_json(train_config));
    manifest.config_json = snapshot.dump();
  }

  xprot::train::Checkpoint ckpt = xprot::train::train(dataset, model_config, train_config, &std::cout);
  if (const fs::path parent = fs::path(opt.out_path).parent_path(); !parent.empty()) {
    fs::create_directories(parent);
  }
  xprot::train::save_checkpoint(ckpt, opt.out_path);
  std::cout << "best_epoch=" << ckpt.epoch << " metric_kind=" << ckpt.metric_kind
            << " metric=" << ckpt.metric << " checkpoint=" << opt.out_path << "\n";

  manifest.finished_utc = xprot::utc_timestamp();
  const fs::path out_dir = fs::path(opt.out_path).parent_path();
  manifest.write(out_dir.empty() ? "." : out_dir.string());
  return 0;
}

struct AttributeOptions {
  std::string model_path, fasta_path, class_name, target = "embedding", out_dir;
  std::size_t steps = 64;
  std::string baseline = "pad";
  std::size_t jobs = 1;
};

int run_attribute(const AttributeOptions& opt, const std::string& command) {
  xprot::RunManifest manifest;
  manifest.command = command;
  manifest.started_utc = xprot::utc_timestamp();
  manifest.add_input(opt.model_path);
  manifest.add_input(opt.fasta_path);

  auto [config, weights] = xprot::load_weights(opt.model_path);
  const std::size_t class_index = resolve_class(config, opt.class_name);

  xprot::attribution::PathSpec spec;
  spec.steps = opt.steps;
  spec.baseline = xprot::attribution::baseline_kind_from_name(opt.baseline);
  spec.validate();

  bool want_embedding = false, want_all_layers = false;
  std::int64_t single_layer = -1;
  if (opt.target == "embedding") {
    want_embedding = true;
  } else if (opt.target == "all-layers") {
    want_embedding = true;
    want_all_layers = true;
  } else if (opt.target.rfind("layer:", 0) == 0) {
    try {
      single_layer = std::stoll(opt.target.substr(6));
    } catch (...) {
      throw xprot::Error(xprot::ErrorCode::invalid_argument,
                         "invalid --target '" + opt.target + "'");
    }
    if (single_layer < 0 || static_cast<std::size_t>(single_layer) >= config.n_layers) {
      throw xprot::Error(xprot::ErrorCode::invalid_argument,
                         "layer " + std::to_string(single_layer) + " out of range");
    }
  } else {
    throw xprot::Error(xprot::ErrorCode::invalid_argument,
                       "unknown --target '" + opt.target + "' (embedding|layer:<l>|all-layers)");
  }
  {
    json snapshot;
    snapshot["model"] = opt.model_path;
    snapshot["class"] = opt.class_name;
    snapshot["class_index"] = class_index;
    snapshot["target"] = opt.target;
    snapshot["steps"] = opt.steps;
    snapshot["baseline"] = opt.baseline;
    snapshot["jobs"] = opt.jobs;
    manifest.config_json = snapshot.dump();
  }

  std::vector<xprot::data::ProteinRecord> records = xprot::data::parse_fasta(read_file(opt.fasta_path));
  if (records.empty()) {
    throw xprot::Error(xprot::ErrorCode::empty_result, "no sequences in " + opt.fasta_path);
  }
  std::sort(records.begin(), records.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });

  struct Output {
    std::string filename, content;
    std::string progress;
  };
  std::vector<std::vector<Output>> outputs(records.size());

  auto process = [&](std::size_t i) {
    const auto& record = records[i];
    const auto tokens = xprot::tokenize(record.sequence);
    std::vector<Output>& files = outputs[i];
    std::ostringstream progress;
    if (single_layer >= 0) {
      auto head = xprot::attribution::ig_head_level(weights, config, tokens, class_index,
                                                    static_cast<std::size_t>(single_layer), spec);
      head.head_map.protein_id = record.id;
      json j = json::parse(xprot::attribution::attribution_map_to_json(head.head_map));
      json skip_rows = json::array();
      for (std::size_t r = 0; r < head.skip_map.rows(); ++r) {
        json row = json::array();
        for (std::size_t c = 0; c < head.skip_map.cols(); ++c) row.push_back(head.skip_map(r, c));
        skip_rows.push_back(std::move(row));
      }
      j["skip_values"] = skip_rows;
      files.push_back({record.id + ".layer" + std::to_string(single_layer) + ".json", j.dump(), ""});
      progress << "protein=" << record.id << " layer=" << single_layer << " gap=" << head.gap << "\n";
    } else {
      xprot::attribution::FullAttribution full =
          xprot::attribution::attribute_all(weights, config, tokens, class_index, spec);
      if (want_embedding) {
        full.embedding.map.protein_id = record.id;
        files.push_back({record.id + ".embedding.json",
                         xprot::attribution::attribution_map_to_json(full.embedding.map), ""});
        progress << "protein=" << record.id << " kind=embedding gap=" << full.embedding.gap << "\n";
      }
      if (want_all_layers) {
        for (auto& layer : full.layers) {
          layer.head_map.protein_id = record.id;
          files.push_back({record.id + ".layer" + std::to_string(layer.head_map.layer) + ".json",
                           xprot::attribution::attribution_map_to_json(layer.head_map), ""});
          progress << "protein=" << record.id << " layer=" << layer.head_map.layer
                   << " gap=" << layer.gap << "\n";
        }
        full.summed.protein_id = record.id;
        files.push_back({record.id + ".summed.json",
                         xprot::attribution::summed_map_to_json(full.summed), ""});
      }
    }
    files.front().progress = progress.str();
  };

  if (opt.jobs <= 1) {
    for (std::size_t i = 0; i < records.size(); ++i) process(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> errors(opt.jobs);
    for (std::size_t w = 0; w < opt.jobs; ++w) {
      workers.emplace_back([&, w] {
        try {
          for (std::size_t i = next.fetch_add(1); i < records.size(); i = next.fetch_add(1)) {
            process(i);
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
  }

  fs::create_directories(opt.out_dir);
  for (const auto& per_protein : outputs) {
    for (const auto& file : per_protein) {
      write_file((fs::path(opt.out_dir) / file.filename).string(), file.content);
      if (!file.progress.empty()) std::cout << file.progress;
    }
  }
  manifest.finished_utc = xprot::utc_timestamp();
  manifest.write(opt.out_dir);
  return 0;
}

struct AnalyzeOptions {
  std::string attr_dir, data_dir, class_name, types_csv, out_dir;
  double alpha = 0.05;
};

int run_analyze(const AnalyzeOptions& opt, const std::string& command) {
  xprot::RunManifest manifest;
  manifest.command = command;
  manifest.started_utc = xprot::utc_timestamp();

  std::vector<std::string> types;
  {
    std::stringstream ss(opt.types_csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      if (!xprot::data::is_annotation_type(item)) {
        throw xprot::Error(xprot::ErrorCode::invalid_argument,
                           "unknown annotation type '" + item + "'");
      }
      types.push_back(item);
    }
  }
  if (types.empty()) {
    throw xprot::Error(xprot::ErrorCode::invalid_argument, "no annotation types given");
  }

  xprot::data::Dataset dataset = xprot::data::load_dataset(opt.data_dir);
  {
    json snapshot;
    snapshot["attr"] = opt.attr_dir;
    snapshot["data"] = opt.data_dir;
    snapshot["class"] = opt.class_name;
    snapshot["types"] = types;
    snapshot["alpha"] = opt.alpha;
    manifest.config_json = snapshot.dump();
  }

  // Collect per-protein attribution files (sorted by id via directory scan).
  std::vector<std::string> embedding_files;
  for (const auto& entry : fs::directory_iterator(opt.attr_dir)) {
    const std::string name = entry.path().filename().string();
    if (name.size() > 15 && name.ends_with(".embedding.json")) {
      embedding_files.push_back(entry.path().string());
    }
  }
  std::sort(embedding_files.begin(), embedding_files.end());
  if (embedding_files.empty()) {
    throw xprot::Error(xprot::ErrorCode::empty_result,
                       "no attribution files (*.embedding.json) in " + opt.attr_dir);
  }

  std::vector<xprot::analysis::ProteinAttribution> attributions;
  for (const auto& path : embedding_files) {
    xprot::attribution::AttributionMap emb =
        xprot::attribution::attribution_map_from_json(read_file(path));
    const std::string stem = fs::path(path).filename().string();
    const std::string id = stem.substr(0, stem.size() - std::string(".embedding.json").size());

    xprot::analysis::ProteinAttribution pa;
    pa.protein_id = id;
    pa.per_token_embedding = xprot::reduce(emb.values, 1, xprot::Reduce::sum);
    for (std::size_t l = 0;; ++l) {
      const fs::path layer_path = fs::path(opt.attr_dir) / (id + ".layer" + std::to_string(l) + ".json");
      if (!fs::exists(layer_path)) break;
      auto map = xprot::attribution::attribution_map_from_json(read_file(layer_path.string()));
      map.protein_id = id;
      pa.head_maps.push_back(std::move(map));
    }
    const fs::path summed_path = fs::path(opt.attr_dir) / (id + ".summed.json");
    if (pa.head_maps.empty() || !fs::exists(summed_path)) {
      throw xprot::Error(xprot::ErrorCode::invalid_argument,
                         "protein '" + id + "' lacks all-layer maps; run attribute with "
                         "--target all-layers");
    }
    pa.summed = xprot::attribution::summed_map_from_json(read_file(summed_path.string()));
    pa.summed.protein_id = id;

    // Only proteins eligible for this class/annotation set enter the report.
    const auto* record = dataset.find(id);
    if (!record || record->split != xprot::data::Split::test ||
        !record->labels.count(opt.class_name)) {
      continue;
    }
    attributions.push_back(std::move(pa));
  }
  if (attributions.empty()) {
    throw xprot::Error(xprot::ErrorCode::empty_result,
                       "no qualifying test-split proteins labeled '" + opt.class_name + "'");
  }

  xprot::analysis::AnalysisReport report = xprot::analysis::analyze_attributions(
      attributions, dataset, opt.class_name, types, opt.alpha);

  fs::create_directories(opt.out_dir);
  write_file((fs::path(opt.out_dir) / "report.json").string(),
             xprot::analysis::report_to_json(report));
  write_file((fs::path(opt.out_dir) / "relevance_significance.csv").string(),
             xprot::analysis::significance_matrix_to_csv(report.relevance_sig));
  for (const auto& [type, corr] : report.correlation_sig) {
    write_file((fs::path(opt.out_dir) / ("correlation_significance." + type + ".csv")).string(),
               xprot::analysis::significance_matrix_to_csv(corr));
  }
  for (const auto& [type, ov] : report.overlays) {
    write_file((fs::path(opt.out_dir) / ("overlay." + type + ".csv")).string(),
               xprot::analysis::overlay_to_csv(ov));
  }
  for (const auto& t : report.embedding_level) {
    if (t.tested) {
      std::cout << "embedding_level type=" << t.annotation_type << " n=" << t.n_proteins
                << " p_adj=" << t.p_adjusted << " significant=" << (t.significant ? 1 : 0) << "\n";
    }
  }
  std::size_t overlay_cells = 0;
  for (const auto& [type, ov] : report.overlays) {
    for (auto m : ov.mask) overlay_cells += m;
  }
  std::cout << "proteins=" << attributions.size() << " overlay_cells=" << overlay_cells
            << " report=" << (fs::path(opt.out_dir) / "report.json").string() << "\n";

  manifest.finished_utc = xprot::utc_timestamp();
  manifest.write(opt.out_dir);
  return 0;
}

struct EmbedOptions {
  std::string maps_dir, out_dir;
  std::size_t pca_dims = 50;
  double perplexity = 30.0;
  double learning_rate = 200.0;
  std::size_t iterations = 1000;
  std::uint64_t seed = 42;
  bool verify_clusters = false;
};

int run_embed(const EmbedOptions& opt, const std::string& command) {
  xprot::RunManifest manifest;
  manifest.command = command;
  manifest.started_utc = xprot::utc_timestamp();
  manifest.seed = opt.seed;
  {
    json snapshot;
    snapshot["maps"] = opt.maps_dir;
    snapshot["pca"] = opt.pca_dims;
    snapshot["perplexity"] = opt.perplexity;
    snapshot["learning_rate"] = opt.learning_rate;
    snapshot["iterations"] = opt.iterations;
    snapshot["seed"] = opt.seed;
    manifest.config_json = snapshot.dump();
  }

  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(opt.maps_dir)) {
    if (entry.path().filename().string().ends_with(".summed.json")) {
      files.push_back(entry.path().string());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    throw xprot::Error(xprot::ErrorCode::empty_result, "no *.summed.json in " + opt.maps_dir);
  }
  std::vector<xprot::attribution::SummedMap> maps;
  std::vector<std::string> classes;
  for (const auto& path : files) {
    maps.push_back(xprot::attribution::summed_map_from_json(read_file(path)));
    classes.push_back("class" + std::to_string(maps.back().class_index));
  }

  xprot::embed::FlatMaps flat = xprot::embed::flatten(maps, classes);
  const std::size_t rank_bound = std::min(flat.matrix.rows() - 1, flat.matrix.cols());
  if (opt.pca_dims > rank_bound) {
    throw xprot::Error(xprot::ErrorCode::invalid_argument,
                       "--pca " + std::to_string(opt.pca_dims) + " exceeds the rank bound " +
                           std::to_string(rank_bound));
  }
  const std::size_t required = static_cast<std::size_t>(3.0 * opt.perplexity + 1.0);
  if (maps.size() < required) {
    throw xprot::Error(xprot::ErrorCode::invalid_argument,
                       "need at least " + std::to_string(required) + " maps for perplexity " +
                           std::to_string(opt.perplexity) + ", got " + std::to_string(maps.size()));
  }

  xprot::embed::PcaResult pca = xprot::embed::pca(flat.matrix, opt.pca_dims);
  xprot::embed::TsneConfig tsne_config;
  tsne_config.perplexity = opt.perplexity;
  tsne_config.learning_rate = opt.learning_rate;
  tsne_config.iterations = opt.iterations;
  tsne_config.seed = opt.seed;
  xprot::embed::TsneResult tsne = xprot::embed::tsne(pca.scores, tsne_config);

  fs::create_directories(opt.out_dir);
  xprot::embed::emit_scatter(tsne.points, flat.ids, flat.classes,
                             (fs::path(opt.out_dir) / "scatter.csv").string(),
                             (fs::path(opt.out_dir) / "scatter.svg").string());
  std::cout << "maps=" << maps.size() << " kl_final=" << tsne.kl_history.back()
            << " out=" << opt.out_dir << "\n";

  if (opt.verify_clusters) {
    std::vector<std::string> class_order;
    for (const auto& c : flat.classes) {
      if (std::find(class_order.begin(), class_order.end(), c) == class_order.end()) {
        class_order.push_back(c);
      }
    }
    std::sort(class_order.begin(), class_order.end());
    std::vector<std::size_t> truth;
    for (const auto& c : flat.classes) {
      truth.push_back(std::find(class_order.begin(), class_order.end(), c) - class_order.begin());
    }
    const auto clusters = xprot::embed::kmeans(tsne.points, class_order.size(), opt.seed);
    std::cout << "rand_index=" << xprot::embed::rand_index(truth, clusters) << "\n";
  }

  manifest.finished_utc = xprot::utc_timestamp();
  manifest.write(opt.out_dir);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Head-level integrated-gradients attribution for transformer encoders"};
  app.require_subcommand(1);
  const std::string command = join_args(argc, argv);

  SynthOptions synth_opt;
  CLI::App* synth = app.add_subcommand("synth", "Generate a planted-motif synthetic dataset");
  synth->add_option("--config", synth_opt.config_path, "Synthesis config JSON")->required();
  synth->add_option("--out", synth_opt.out_dir, "Output dataset directory")->required();
  synth->add_option("--seed", synth_opt.seed_override, "Override the config seed");

  TrainOptions train_opt;
  CLI::App* train = app.add_subcommand("train", "Finetune a toy encoder on a dataset");
  train->add_option("--data", train_opt.data_dir, "Dataset directory")->required();
  train->add_option("--model-config", train_opt.model_config_path, "Model config JSON")->required();
  train->add_option("--train-config", train_opt.train_config_path, "Training config JSON")->required();
  train->add_option("--out", train_opt.out_path, "Checkpoint output path")->required();
  train->add_option("--seed", train_opt.seed_override, "Override the training seed");
  train->add_option("--freeze-epochs", train_opt.freeze_override, "Override encoder freeze epochs");

  AttributeOptions attr_opt;
  CLI::App* attribute = app.add_subcommand("attribute", "Integrated-gradients attribution");
  attribute->add_option("--model", attr_opt.model_path, "Checkpoint archive")->required();
  attribute->add_option("--fasta", attr_opt.fasta_path, "Input sequences")->required();
  attribute->add_option("--class", attr_opt.class_name, "Target class id")->required();
  attribute->add_option("--target", attr_opt.target, "embedding | layer:<l> | all-layers");
  attribute->add_option("--steps", attr_opt.steps, "Quadrature steps m");
  attribute->add_option("--baseline", attr_opt.baseline, "zero | pad");
  attribute->add_option("--out", attr_opt.out_dir, "Output directory")->required();
  attribute->add_option("--jobs", attr_opt.jobs, "Worker threads");

  AnalyzeOptions analyze_opt;
  CLI::App* analyze = app.add_subcommand("analyze", "Correlation/relevance significance analysis");
  analyze->add_option("--attr", analyze_opt.attr_dir, "Attribution directory")->required();
  analyze->add_option("--data", analyze_opt.data_dir, "Dataset directory")->required();
  analyze->add_option("--class", analyze_opt.class_name, "Class id")->required();
  analyze->add_option("--types", analyze_opt.types_csv, "Comma-separated annotation types")->required();
  analyze->add_option("--alpha", analyze_opt.alpha, "Significance level");
  analyze->add_option("--out", analyze_opt.out_dir, "Report output directory")->required();

  EmbedOptions embed_opt;
  CLI::App* embed = app.add_subcommand("embed", "PCA + t-SNE of summed attribution maps");
  embed->add_option("--maps", embed_opt.maps_dir, "Directory of *.summed.json maps")->required();
  embed->add_option("--pca", embed_opt.pca_dims, "PCA dimensions");
  embed->add_option("--perplexity", embed_opt.perplexity, "t-SNE perplexity");
  embed->add_option("--lr", embed_opt.learning_rate, "t-SNE learning rate");
  embed->add_option("--iterations", embed_opt.iterations, "t-SNE iterations");
  embed->add_option("--seed", embed_opt.seed, "RNG seed");
  embed->add_flag("--verify-clusters", embed_opt.verify_clusters,
                  "k-means the t-SNE output and print the Rand index against map classes");
  embed->add_option("--out", embed_opt.out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::RequiredError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    std::cerr << app.help() << "\n";
    return 1;
  }

  try {
    if (synth->parsed()) return run_synth(synth_opt, command);
    if (train->parsed()) return run_train(train_opt, command);
    if (attribute->parsed()) return run_attribute(attr_opt, command);
    if (analyze->parsed()) return run_analyze(analyze_opt, command);
    if (embed->parsed()) return run_embed(embed_opt, command);
  } catch (const xprot::Error& e) {
    std::cerr << "error (" << xprot::error_code_name(e.code()) << "): " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
