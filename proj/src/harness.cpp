#include "ablate/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "ablate/container.hpp"
#include "ablate/error.hpp"
#include "ablate/rng.hpp"

namespace ablate {

using nlohmann::json;

namespace {

// Shortest round-trip decimal form, identical bytes for identical doubles.
std::string format_double(double v) {
  char buf[32];
  const auto result = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, result.ptr);
}

json config_to_json_obj(const SweepConfig& cfg) {
  json doc;
  doc["model"] = cfg.model_path;
  if (cfg.synth) {
    doc["dataset"] = {{"synth",
                       {{"classes", cfg.synth->classes},
                        {"per_class", cfg.synth->per_class},
                        {"image_size", cfg.synth->image_size},
                        {"noise", cfg.synth->noise},
                        {"test_fraction", cfg.synth->test_fraction}}},
                      {"seed", cfg.synth_seed}};
  } else {
    doc["dataset"] = {{"images", cfg.images_path}, {"labels", cfg.labels_path}};
  }
  doc["treatment"] = to_string(cfg.treatment);
  doc["layers"] = cfg.layers;
  doc["magnitudes"] = cfg.magnitudes;
  doc["trials"] = cfg.trials;
  doc["top_k"] = cfg.top_k;
  doc["base_seed"] = cfg.base_seed;
  if (cfg.eval_subset) doc["eval_subset"] = *cfg.eval_subset;
  doc["workers"] = cfg.workers;
  return doc;
}

SweepConfig config_from_json_obj(const json& doc) {
  SweepConfig cfg;
  cfg.model_path = doc.value("model", std::string());
  if (doc.contains("dataset")) {
    const json& ds = doc.at("dataset");
    if (ds.contains("synth")) {
      const json& sp = ds.at("synth");
      SynthSpec synth;
      synth.classes = sp.value("classes", synth.classes);
      synth.per_class = sp.value("per_class", synth.per_class);
      synth.image_size = sp.value("image_size", synth.image_size);
      synth.noise = sp.value("noise", synth.noise);
      synth.test_fraction = sp.value("test_fraction", synth.test_fraction);
      cfg.synth = synth;
      cfg.synth_seed = ds.value("seed", cfg.synth_seed);
    } else {
      cfg.images_path = ds.value("images", std::string());
      cfg.labels_path = ds.value("labels", std::string());
    }
  }
  if (doc.contains("treatment"))
    cfg.treatment = treatment_from_string(doc.at("treatment").get<std::string>());
  cfg.layers = doc.value("layers", cfg.layers);
  cfg.magnitudes = doc.value("magnitudes", cfg.magnitudes);
  cfg.trials = doc.value("trials", cfg.trials);
  cfg.top_k = doc.value("top_k", cfg.top_k);
  cfg.base_seed = doc.value("base_seed", cfg.base_seed);
  if (doc.contains("eval_subset") && !doc.at("eval_subset").is_null())
    cfg.eval_subset = doc.at("eval_subset").get<std::int64_t>();
  cfg.workers = doc.value("workers", cfg.workers);
  return cfg;
}

void validate_config(const SweepConfig& cfg, const Network& net) {
  if (cfg.layers.empty()) throw ValidationError("sweep: no layers given");
  if (cfg.magnitudes.empty()) throw ValidationError("sweep: no magnitudes given");
  if (cfg.trials < 1) throw ValidationError("sweep: trials must be >= 1");
  if (cfg.top_k < 1 || cfg.top_k > net.class_count)
    throw ValidationError("sweep: top_k out of range [1, " + std::to_string(net.class_count) + "]");
  for (const std::string& layer : cfg.layers) {
    const int idx = net.layer_index(layer);
    if (idx < 0) throw ValidationError("sweep: unknown layer \"" + layer + "\"");
    if (!net.params[static_cast<std::size_t>(idx)])
      throw ValidationError("sweep: layer \"" + layer + "\" carries no parameters");
  }
  for (double m : cfg.magnitudes) {
    if (cfg.treatment == Treatment::gaussian) {
      if (!(m >= 0.0)) throw ValidationError("sweep: gaussian scale must be >= 0");
    } else if (!(m >= 0.0 && m <= 1.0)) {
      throw ValidationError("sweep: knockout proportion must be in [0, 1]");
    }
  }
  if (cfg.eval_subset && *cfg.eval_subset < 1)
    throw ValidationError("sweep: eval_subset must be >= 1");
}

}  // namespace

std::string to_json(const SweepConfig& cfg) { return config_to_json_obj(cfg).dump(); }

SweepConfig sweep_config_from_json(const std::string& text) {
  try {
    return config_from_json_obj(json::parse(text));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("sweep config is not valid JSON: ") + e.what());
  }
}

SweepResult run_sweep(const SweepConfig& cfg) {
  if (cfg.model_path.empty()) throw ValidationError("sweep: no model path given");
  const Network net = load(cfg.model_path);
  Dataset eval_set;
  if (cfg.synth) {
    eval_set = split_train_test(synth_dataset(*cfg.synth, cfg.synth_seed),
                                cfg.synth->test_fraction)
                   .second;
  } else if (!cfg.images_path.empty()) {
    eval_set = load_idx(cfg.images_path, cfg.labels_path);
  } else {
    throw ValidationError("sweep: config needs either an IDX dataset or a synth spec");
  }
  return run_sweep(cfg, net, eval_set);
}

SweepResult run_sweep(const SweepConfig& cfg, const Network& net, const Dataset& eval_source) {
  validate_config(cfg, net);

  // Optional deterministic subset: first N of a seeded shuffle, fixed per
  // sweep so every cell sees identical images.
  Dataset subset;
  const Dataset* eval_set = &eval_source;
  if (cfg.eval_subset && *cfg.eval_subset < eval_source.count()) {
    std::vector<std::int64_t> order(static_cast<std::size_t>(eval_source.count()));
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::int64_t>(i);
    Rng rng(derive_stream(cfg.base_seed, 1));
    shuffle(order, rng);
    order.resize(static_cast<std::size_t>(*cfg.eval_subset));
    subset = gather(eval_source, order);
    eval_set = &subset;
  }

  SweepResult result;
  result.config = cfg;
  result.baseline = evaluate_topk(net, *eval_set, cfg.top_k);

  const std::size_t n_layers = cfg.layers.size();
  const std::size_t n_mags = cfg.magnitudes.size();
  const std::size_t n_trials = static_cast<std::size_t>(cfg.trials);
  const std::size_t n_tasks = n_layers * n_mags * n_trials;
  result.records.resize(n_tasks);

  std::atomic<std::size_t> cursor{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  std::atomic<bool> failed{false};

  const auto run_task = [&](std::size_t task) {
    const std::size_t layer_i = task / (n_mags * n_trials);
    const std::size_t mag_i = (task / n_trials) % n_mags;
    const std::size_t trial_i = task % n_trials;

    PerturbationSpec spec;
    spec.treatment = cfg.treatment;
    spec.layer = cfg.layers[layer_i];
    spec.magnitude = cfg.magnitudes[mag_i];
    spec.seed = derive_seed(cfg.base_seed, layer_i, mag_i, trial_i);

    const auto t0 = std::chrono::steady_clock::now();
    // Fresh copy of the pristine network per trial, never cumulative.
    auto [copy, receipt] = perturbed(net, spec);
    const double accuracy = evaluate_topk(copy, *eval_set, cfg.top_k);
    const auto t1 = std::chrono::steady_clock::now();

    TrialRecord& record = result.records[task];
    record.treatment = cfg.treatment;
    record.layer = spec.layer;
    record.magnitude = spec.magnitude;
    record.trial = static_cast<int>(trial_i);
    record.seed = spec.seed;
    record.top_k = cfg.top_k;
    record.accuracy = accuracy;
    record.n_images = eval_set->count();
    record.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  };

  const auto worker = [&] {
    for (;;) {
      const std::size_t task = cursor.fetch_add(1);
      if (task >= n_tasks || failed.load()) return;
      try {
        run_task(task);
      } catch (const std::exception& e) {
        failed.store(true);
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) {
          const std::size_t layer_i = task / (n_mags * n_trials);
          const std::size_t mag_i = (task / n_trials) % n_mags;
          first_error = std::make_exception_ptr(RuntimeError(
              "sweep cell failed (layer=" + cfg.layers[layer_i] + ", magnitude=" +
              format_double(cfg.magnitudes[mag_i]) + ", trial=" + std::to_string(task % n_trials) +
              "): " + e.what()));
        }
      } catch (...) {
        failed.store(true);
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };

  const int workers = std::max(1, cfg.workers);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  // Aggregation in canonical cell order, independent of scheduling.
  for (std::size_t layer_i = 0; layer_i < n_layers; ++layer_i)
    for (std::size_t mag_i = 0; mag_i < n_mags; ++mag_i) {
      CellAggregate cell;
      cell.layer = cfg.layers[layer_i];
      cell.magnitude = cfg.magnitudes[mag_i];
      cell.trials = cfg.trials;
      double sum = 0.0;
      const std::size_t base = (layer_i * n_mags + mag_i) * n_trials;
      for (std::size_t t = 0; t < n_trials; ++t) sum += result.records[base + t].accuracy;
      cell.mean = sum / static_cast<double>(n_trials);
      double ss = 0.0;
      for (std::size_t t = 0; t < n_trials; ++t) {
        const double d = result.records[base + t].accuracy - cell.mean;
        ss += d * d;
      }
      cell.stddev = n_trials > 1 ? std::sqrt(ss / static_cast<double>(n_trials - 1)) : 0.0;
      result.cells.push_back(std::move(cell));
    }
  return result;
}

std::vector<double> cell_accuracies(const SweepResult& result, const CellKey& key) {
  std::vector<double> values;
  for (const TrialRecord& record : result.records)
    if (record.layer == key.layer && std::abs(record.magnitude - key.magnitude) <= 1e-9)
      values.push_back(record.accuracy);
  if (values.empty())
    throw ValidationError("no cell (layer=" + key.layer + ", magnitude=" +
                          format_double(key.magnitude) + ") in this result");
  return values;
}

TestResult compare_cells(const SweepResult& result, const CellKey& a, const CellKey& b) {
  return compare_cells(result, a, result, b);
}

TestResult compare_cells(const SweepResult& ra, const CellKey& a, const SweepResult& rb,
                         const CellKey& b) {
  const std::vector<double> sample_a = cell_accuracies(ra, a);
  const std::vector<double> sample_b = cell_accuracies(rb, b);
  return wilcoxon_rank_sum(sample_a, sample_b);
}

FitResult fit_falloff(const SweepResult& result, const std::string& layer) {
  std::vector<double> x, y;
  for (const CellAggregate& cell : result.cells)
    if (cell.layer == layer) {
      x.push_back(cell.magnitude);
      y.push_back(cell.mean);
    }
  if (x.size() < 3)
    throw ValidationError("fit_falloff: layer \"" + layer + "\" has " +
                          std::to_string(x.size()) + " magnitudes, need >= 3");
  return linear_fit(x, y);
}

std::string to_csv(const SweepResult& result) {
  std::ostringstream out;
  out << "treatment,layer,magnitude,trial,seed,top_k,accuracy,n_images,wall_ms\n";
  for (const TrialRecord& r : result.records) {
    out << to_string(r.treatment) << ',' << r.layer << ',' << format_double(r.magnitude) << ','
        << r.trial << ',' << r.seed << ',' << r.top_k << ',' << format_double(r.accuracy) << ','
        << r.n_images << ',' << format_double(r.wall_ms) << '\n';
  }
  return out.str();
}

void export_csv(const SweepResult& result, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeError("cannot write " + path);
  const std::string text = to_csv(result);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw RuntimeError("write failed: " + path);
}

std::string to_json(const SweepResult& result) {
  json doc;
  doc["config"] = config_to_json_obj(result.config);
  doc["baseline"] = result.baseline;
  doc["records"] = json::array();
  for (const TrialRecord& r : result.records) {
    doc["records"].push_back({{"treatment", to_string(r.treatment)},
                              {"layer", r.layer},
                              {"magnitude", r.magnitude},
                              {"trial", r.trial},
                              {"seed", r.seed},
                              {"top_k", r.top_k},
                              {"accuracy", r.accuracy},
                              {"n_images", r.n_images},
                              {"wall_ms", r.wall_ms}});
  }
  doc["cells"] = json::array();
  for (const CellAggregate& c : result.cells) {
    doc["cells"].push_back({{"layer", c.layer},
                            {"magnitude", c.magnitude},
                            {"trials", c.trials},
                            {"mean", c.mean},
                            {"std", c.stddev}});
  }
  return doc.dump(2);
}

void export_json(const SweepResult& result, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeError("cannot write " + path);
  const std::string text = to_json(result);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.put('\n');
  if (!out) throw RuntimeError("write failed: " + path);
}

SweepResult sweep_result_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("sweep result is not valid JSON: ") + e.what());
  }
  SweepResult result;
  if (doc.contains("config")) result.config = config_from_json_obj(doc.at("config"));
  result.baseline = doc.value("baseline", 0.0);
  for (const json& r : doc.value("records", json::array())) {
    TrialRecord record;
    record.treatment = treatment_from_string(r.at("treatment").get<std::string>());
    record.layer = r.at("layer").get<std::string>();
    record.magnitude = r.at("magnitude").get<double>();
    record.trial = r.at("trial").get<int>();
    record.seed = r.at("seed").get<std::uint64_t>();
    record.top_k = r.at("top_k").get<int>();
    record.accuracy = r.at("accuracy").get<double>();
    record.n_images = r.at("n_images").get<std::int64_t>();
    record.wall_ms = r.at("wall_ms").get<double>();
    result.records.push_back(std::move(record));
  }
  for (const json& c : doc.value("cells", json::array())) {
    CellAggregate cell;
    cell.layer = c.at("layer").get<std::string>();
    cell.magnitude = c.at("magnitude").get<double>();
    cell.trials = c.at("trials").get<int>();
    cell.mean = c.at("mean").get<double>();
    cell.stddev = c.at("std").get<double>();
    result.cells.push_back(std::move(cell));
  }
  return result;
}

SweepResult import_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open result " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return sweep_result_from_json(buffer.str());
}

std::vector<LayerSeries> plot_series(const SweepResult& result) {
  std::vector<LayerSeries> series;
  for (const CellAggregate& cell : result.cells) {
    auto it = std::find_if(series.begin(), series.end(),
                           [&](const LayerSeries& s) { return s.layer == cell.layer; });
    if (it == series.end()) {
      series.push_back({cell.layer, {}});
      it = series.end() - 1;
    }
    it->points.push_back(cell);
  }
  return series;
}

}  // namespace ablate
