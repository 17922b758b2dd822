#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ablate/container.hpp"
#include "ablate/dataset.hpp"
#include "ablate/error.hpp"
#include "ablate/harness.hpp"
#include "ablate/network.hpp"
#include "ablate/perturb.hpp"
#include "ablate/stats.hpp"
#include "ablate/train.hpp"

namespace {

using namespace ablate;

std::string fmt(double v) {
  char buf[32];
  const auto result = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, result.ptr);
}

std::string fmt_opt(const std::optional<double>& v, const char* missing) {
  return v ? fmt(*v) : std::string(missing);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// Shared dataset source: an IDX pair or the built-in synthetic generator.
struct DatasetFlags {
  std::string images, labels;
  bool synth = false;
  SynthSpec spec;
  std::uint64_t seed = 7;
};

void add_dataset_flags(CLI::App* cmd, DatasetFlags& flags) {
  cmd->add_option("--images", flags.images, "IDX image file");
  cmd->add_option("--labels", flags.labels, "IDX label file");
  cmd->add_flag("--synth", flags.synth, "Use the built-in synthetic dataset");
  cmd->add_option("--synth-classes", flags.spec.classes, "Synthetic class count")
      ->capture_default_str();
  cmd->add_option("--synth-per-class", flags.spec.per_class, "Synthetic samples per class")
      ->capture_default_str();
  cmd->add_option("--synth-size", flags.spec.image_size, "Synthetic image edge length")
      ->capture_default_str();
  cmd->add_option("--synth-noise", flags.spec.noise, "Synthetic pixel noise sigma")
      ->capture_default_str();
  cmd->add_option("--synth-test-fraction", flags.spec.test_fraction,
                  "Held-out fraction of each class")
      ->capture_default_str();
  cmd->add_option("--synth-seed", flags.seed, "Synthetic generator seed")->capture_default_str();
}

// train wants the train split of a synthetic set, everything else the
// held-out split. IDX datasets are used as given.
Dataset resolve_dataset(const DatasetFlags& flags, bool train_split) {
  const bool has_idx = !flags.images.empty() || !flags.labels.empty();
  if (flags.synth && has_idx)
    throw ValidationError("give either --images/--labels or --synth, not both");
  if (flags.synth) {
    const Dataset all = synth_dataset(flags.spec, flags.seed);
    auto split = split_train_test(all, flags.spec.test_fraction);
    return train_split ? std::move(split.first) : std::move(split.second);
  }
  if (flags.images.empty() || flags.labels.empty())
    throw ValidationError("dataset required: --images IMG --labels LBL or --synth");
  return load_idx(flags.images, flags.labels);
}

int cmd_train(const std::string& manifest_path, const DatasetFlags& data_flags,
              const TrainConfig& cfg, const std::string& out_path,
              const std::string& history_path) {
  Network net = build_network(read_text_file(manifest_path), cfg.seed);
  const Dataset train_set = resolve_dataset(data_flags, /*train_split=*/true);
  const auto history = train(net, train_set, cfg);
  for (const EpochRecord& epoch : history)
    std::cout << "epoch=" << epoch.epoch << " loss=" << fmt(epoch.mean_loss)
              << " train_top1=" << fmt(epoch.train_accuracy) << "\n";

  save(net, out_path);
  std::cout << "model=" << out_path << " parameters=" << net.parameter_count() << "\n";
  if (data_flags.synth) {
    const Dataset test_set = resolve_dataset(data_flags, /*train_split=*/false);
    std::cout << "test_top1=" << fmt(evaluate_topk(net, test_set, 1)) << "\n";
  }
  if (!history_path.empty()) {
    std::ofstream out(history_path, std::ios::binary);
    if (!out) throw RuntimeError("cannot write " + history_path);
    out << "epoch,loss,train_top1\n";
    for (const EpochRecord& epoch : history)
      out << epoch.epoch << ',' << fmt(epoch.mean_loss) << ',' << fmt(epoch.train_accuracy)
          << '\n';
  }
  return 0;
}

int cmd_eval(const std::string& model_path, const DatasetFlags& data_flags, int top_k) {
  const Network net = load(model_path);
  const Dataset data = resolve_dataset(data_flags, /*train_split=*/false);
  const double accuracy = evaluate_topk(net, data, top_k);
  std::cout << "accuracy=" << fmt(accuracy) << " top_k=" << top_k << " n_images=" << data.count()
            << "\n";
  return 0;
}

int cmd_stats(const std::string& model_path, const std::string& format) {
  const Network net = load(model_path);
  const bool csv = format == "csv";
  if (csv)
    std::cout << "layer,size,mean,median,sigma,min,max,kurtosis,skew\n";
  else
    std::cout << "layer              size        mean      median       sigma         min"
                 "         max    kurtosis        skew\n";

  for (const std::string& name : net.parameterized_layer_names()) {
    const LayerParamStats stats = layer_param_stats(net, name);
    const auto row = [&](const std::string& label, const DescriptiveStats& s) {
      if (csv) {
        std::cout << label << ',' << s.size << ',' << fmt(s.mean) << ',' << fmt(s.median) << ','
                  << fmt_opt(s.sigma, "") << ',' << fmt(s.min) << ',' << fmt(s.max) << ','
                  << fmt_opt(s.kurtosis, "") << ',' << fmt_opt(s.skew, "") << '\n';
        return;
      }
      char line[256];
      std::snprintf(line, sizeof(line), "%-16s %6lld %11.4g %11.4g %11.4g %11.4g %11.4g %11s %11s",
                    label.c_str(), static_cast<long long>(s.size), s.mean, s.median,
                    s.sigma.value_or(0.0), s.min, s.max,
                    fmt_opt(s.kurtosis, "-").c_str(), fmt_opt(s.skew, "-").c_str());
      std::cout << line << "\n";
    };
    row(name + ".weight", stats.weights);
    row(name + ".bias", stats.biases);
  }
  return 0;
}

CellKey parse_cell(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == text.size())
    throw ValidationError("cell must be LAYER:MAGNITUDE, got \"" + text + "\"");
  CellKey key;
  key.layer = text.substr(0, colon);
  try {
    key.magnitude = std::stod(text.substr(colon + 1));
  } catch (const std::exception&) {
    throw ValidationError("bad magnitude in cell \"" + text + "\"");
  }
  return key;
}

int cmd_compare(const std::string& result_path, const std::string& result_b_path,
                const std::string& cell_a, const std::string& cell_b) {
  const SweepResult a = import_json(result_path);
  const SweepResult b = result_b_path.empty() ? a : import_json(result_b_path);
  const CellKey key_a = parse_cell(cell_a);
  const CellKey key_b = parse_cell(cell_b);
  const auto acc_a = cell_accuracies(a, key_a);
  const auto acc_b = cell_accuracies(b, key_b);
  const TestResult test = compare_cells(a, key_a, b, key_b);
  double mean_a = 0, mean_b = 0;
  for (double v : acc_a) mean_a += v;
  for (double v : acc_b) mean_b += v;
  mean_a /= static_cast<double>(acc_a.size());
  mean_b /= static_cast<double>(acc_b.size());
  std::cout << "p_value=" << fmt(test.p_value) << " statistic=" << fmt(test.statistic)
            << " method=" << to_string(test.method) << " n_a=" << acc_a.size()
            << " n_b=" << acc_b.size() << " mean_a=" << fmt(mean_a) << " mean_b=" << fmt(mean_b)
            << "\n";
  return 0;
}

int cmd_plotdata(const std::string& result_path, const std::string& out_dir,
                 const std::string& prefix) {
  const SweepResult result = import_json(result_path);
  const auto series = plot_series(result);
  std::filesystem::create_directories(out_dir);
  for (const LayerSeries& s : series) {
    const std::string path = (std::filesystem::path(out_dir) / (prefix + s.layer + ".csv")).string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RuntimeError("cannot write " + path);
    out << "magnitude,mean,std\n";
    for (const CellAggregate& point : s.points)
      out << fmt(point.magnitude) << ',' << fmt(point.mean) << ',' << fmt(point.stddev) << '\n';
    std::cout << path << "\n";
  }
  std::cout << "series=" << series.size() << "\n";
  return 0;
}

int env_workers_fallback() {
  if (const char* env = std::getenv("ABLATE_WORKERS")) {
    int value = 0;
    const auto result = std::from_chars(env, env + std::string(env).size(), value);
    if (result.ec == std::errc() && value >= 1) return value;
    throw ValidationError("ABLATE_WORKERS must be a positive integer, got \"" + std::string(env) +
                          "\"");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ablate: train, perturb and measure small CNNs"};
  app.require_subcommand(1);

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a network from a manifest and save it");
  std::string manifest_path, train_out, history_path;
  DatasetFlags train_data;
  TrainConfig train_cfg;
  train_cmd->add_option("--manifest", manifest_path, "Network manifest JSON")->required();
  add_dataset_flags(train_cmd, train_data);
  train_cmd->add_option("--epochs", train_cfg.epochs, "Training epochs")->capture_default_str();
  train_cmd->add_option("--batch", train_cfg.batch_size, "Batch size")->capture_default_str();
  train_cmd->add_option("--lr", train_cfg.learning_rate, "Learning rate")->capture_default_str();
  train_cmd->add_option("--momentum", train_cfg.momentum, "SGD momentum")->capture_default_str();
  train_cmd->add_option("--seed", train_cfg.seed, "Initialization + shuffle + dropout seed")
      ->capture_default_str();
  train_cmd->add_option("--out", train_out, "Output model container")->required();
  train_cmd->add_option("--history", history_path, "Per-epoch loss/accuracy CSV");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Report a model's top-k accuracy on a dataset");
  std::string eval_model;
  DatasetFlags eval_data;
  int eval_top_k = 5;
  eval_cmd->add_option("--model", eval_model, "Model container")->required();
  add_dataset_flags(eval_cmd, eval_data);
  eval_cmd->add_option("--top-k", eval_top_k, "k for top-k accuracy")->capture_default_str();

  // stats
  auto* stats_cmd = app.add_subcommand("stats", "Per-tensor descriptive statistics of a model");
  std::string stats_model, stats_format = "table";
  stats_cmd->add_option("--model", stats_model, "Model container")->required();
  stats_cmd->add_option("--format", stats_format, "table or csv")
      ->check(CLI::IsMember({"table", "csv"}))
      ->capture_default_str();

  // sweep
  auto* sweep_cmd = app.add_subcommand(
      "sweep", "Run a layer x magnitude x trial perturbation grid and export it");
  std::string config_path, sweep_model, out_csv, out_json, treatment_name;
  DatasetFlags sweep_data;
  std::vector<std::string> sweep_layers;
  std::vector<double> sweep_magnitudes;
  int sweep_trials = 0, sweep_top_k = 0, sweep_workers = 0;
  std::uint64_t sweep_seed = 0;
  std::int64_t sweep_subset = 0;
  sweep_cmd->add_option("--config", config_path, "Sweep config JSON (flags override it)");
  sweep_cmd->add_option("--model", sweep_model, "Model container");
  add_dataset_flags(sweep_cmd, sweep_data);
  sweep_cmd->add_option("--treatment", treatment_name,
                        "synapse_knockout, node_knockout or gaussian");
  sweep_cmd->add_option("--layers", sweep_layers, "Layers to sweep independently")
      ->delimiter(',');
  sweep_cmd->add_option("--magnitudes", sweep_magnitudes,
                        "Knockout proportions or Gaussian scales")
      ->delimiter(',');
  sweep_cmd->add_option("--trials", sweep_trials, "Trials per cell");
  sweep_cmd->add_option("--top-k", sweep_top_k, "k for top-k accuracy");
  sweep_cmd->add_option("--seed", sweep_seed, "Base seed for trial derivation");
  sweep_cmd->add_option("--subset", sweep_subset, "Evaluate on a deterministic N-image subset");
  sweep_cmd->add_option("--workers", sweep_workers, "Worker threads (ABLATE_WORKERS fallback)");
  sweep_cmd->add_option("--out-csv", out_csv, "Write trial records as CSV");
  sweep_cmd->add_option("--out-json", out_json, "Write the full result as JSON");

  // compare
  auto* compare_cmd =
      app.add_subcommand("compare", "Wilcoxon rank-sum between two sweep cells");
  std::string compare_result, compare_result_b, compare_a, compare_b;
  compare_cmd->add_option("--result", compare_result, "Sweep result JSON")->required();
  compare_cmd->add_option("--result-b", compare_result_b,
                          "Second result JSON (defaults to --result)");
  compare_cmd->add_option("--cell-a", compare_a, "First cell as LAYER:MAGNITUDE")->required();
  compare_cmd->add_option("--cell-b", compare_b, "Second cell as LAYER:MAGNITUDE")->required();

  // plotdata
  auto* plot_cmd = app.add_subcommand(
      "plotdata", "Per-layer (magnitude, mean, std) series files from a sweep result");
  std::string plot_result, plot_dir, plot_prefix = "series_";
  plot_cmd->add_option("--result", plot_result, "Sweep result JSON")->required();
  plot_cmd->add_option("--out-dir", plot_dir, "Output directory")->required();
  plot_cmd->add_option("--prefix", plot_prefix, "Series file name prefix")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
    std::cerr << "error[usage]: " << e.what() << "\n";
    return 1;
  }

  try {
    if (*train_cmd) return cmd_train(manifest_path, train_data, train_cfg, train_out, history_path);
    if (*eval_cmd) return cmd_eval(eval_model, eval_data, eval_top_k);
    if (*stats_cmd) return cmd_stats(stats_model, stats_format);
    if (*compare_cmd) return cmd_compare(compare_result, compare_result_b, compare_a, compare_b);
    if (*plot_cmd) return cmd_plotdata(plot_result, plot_dir, plot_prefix);

    // sweep: flags override the config file, which overrides defaults
    // (ABLATE_WORKERS sits below both for the worker count)
    SweepConfig cfg;
    bool config_sets_workers = false;
    if (!config_path.empty()) {
      const std::string config_text = read_text_file(config_path);
      cfg = sweep_config_from_json(config_text);
      config_sets_workers = nlohmann::json::parse(config_text).contains("workers");
    }
    if (sweep_cmd->count("--model")) cfg.model_path = sweep_model;
    if (sweep_cmd->count("--images")) cfg.images_path = sweep_data.images;
    if (sweep_cmd->count("--labels")) cfg.labels_path = sweep_data.labels;
    if (sweep_data.synth) {
      cfg.synth = sweep_data.spec;
      cfg.synth_seed = sweep_data.seed;
      cfg.images_path.clear();
      cfg.labels_path.clear();
    }
    if (sweep_cmd->count("--treatment")) cfg.treatment = treatment_from_string(treatment_name);
    if (sweep_cmd->count("--layers")) cfg.layers = sweep_layers;
    if (sweep_cmd->count("--magnitudes")) cfg.magnitudes = sweep_magnitudes;
    if (sweep_cmd->count("--trials")) cfg.trials = sweep_trials;
    if (sweep_cmd->count("--top-k")) cfg.top_k = sweep_top_k;
    if (sweep_cmd->count("--seed")) cfg.base_seed = sweep_seed;
    if (sweep_cmd->count("--subset")) cfg.eval_subset = sweep_subset;
    if (sweep_cmd->count("--workers")) {
      cfg.workers = sweep_workers;
    } else if (!config_sets_workers) {
      if (const int env = env_workers_fallback()) cfg.workers = env;
    }

    const SweepResult result = run_sweep(cfg);
    std::cout << "baseline=" << fmt(result.baseline) << " records=" << result.records.size()
              << "\n";
    for (const CellAggregate& cell : result.cells)
      std::cout << "cell layer=" << cell.layer << " magnitude=" << fmt(cell.magnitude)
                << " mean=" << fmt(cell.mean) << " std=" << fmt(cell.stddev) << "\n";
    if (!out_csv.empty()) export_csv(result, out_csv);
    if (!out_json.empty()) export_json(result, out_json);
    return 0;
  } catch (const ValidationError& e) {
    std::cerr << "error[data]: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error[runtime]: " << e.what() << "\n";
    return 3;
  }
}
