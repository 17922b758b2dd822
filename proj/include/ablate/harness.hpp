#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ablate/dataset.hpp"
#include "ablate/network.hpp"
#include "ablate/perturb.hpp"
#include "ablate/stats.hpp"

namespace ablate {

// One sweep: layers x magnitudes x trials of a single treatment, every
// trial on a fresh copy of the pristine network.
struct SweepConfig {
  std::string model_path;
  std::string images_path;  // IDX pair; empty when synth is set
  std::string labels_path;
  std::optional<SynthSpec> synth;  // evaluation uses the test split
  std::uint64_t synth_seed = 7;
  Treatment treatment = Treatment::synapse_knockout;
  std::vector<std::string> layers;      // swept independently
  std::vector<double> magnitudes;
  int trials = 5;
  int top_k = 5;
  std::uint64_t base_seed = 0;
  std::optional<std::int64_t> eval_subset;  // first-N after a seeded shuffle
  int workers = 1;
};
std::string to_json(const SweepConfig& cfg);
SweepConfig sweep_config_from_json(const std::string& text);

struct TrialRecord {
  Treatment treatment = Treatment::synapse_knockout;
  std::string layer;
  double magnitude = 0;
  int trial = 0;
  std::uint64_t seed = 0;
  int top_k = 5;
  double accuracy = 0;
  std::int64_t n_images = 0;
  double wall_ms = 0;  // environment noise, excluded from determinism
};

struct CellAggregate {
  std::string layer;
  double magnitude = 0;
  int trials = 0;
  double mean = 0;
  double stddev = 0;  // sample std; 0 for a single trial
};

struct SweepResult {
  SweepConfig config;
  double baseline = 0;  // unperturbed accuracy on the same evaluation set
  std::vector<TrialRecord> records;  // canonical (layer, magnitude, trial) order
  std::vector<CellAggregate> cells;
};

// Loads model and dataset per config, then sweeps. Worker count is a pure
// throughput knob: records land in canonical slots regardless of
// scheduling, so outputs are byte-identical for any worker count.
SweepResult run_sweep(const SweepConfig& cfg);
SweepResult run_sweep(const SweepConfig& cfg, const Network& net, const Dataset& eval_set);

struct CellKey {
  std::string layer;
  double magnitude = 0;
};

// Wilcoxon rank-sum over two cells' trial accuracies.
TestResult compare_cells(const SweepResult& result, const CellKey& a, const CellKey& b);
TestResult compare_cells(const SweepResult& ra, const CellKey& a, const SweepResult& rb,
                         const CellKey& b);
std::vector<double> cell_accuracies(const SweepResult& result, const CellKey& key);

// Least-squares fit of a layer's per-cell mean accuracy against magnitude;
// needs at least 3 magnitudes.
FitResult fit_falloff(const SweepResult& result, const std::string& layer);

// CSV columns, in order:
//   treatment,layer,magnitude,trial,seed,top_k,accuracy,n_images,wall_ms
// rows sorted by (layer index, magnitude index, trial). Identical results
// serialize to identical bytes.
std::string to_csv(const SweepResult& result);
void export_csv(const SweepResult& result, const std::string& path);

std::string to_json(const SweepResult& result);
void export_json(const SweepResult& result, const std::string& path);
SweepResult sweep_result_from_json(const std::string& text);
SweepResult import_json(const std::string& path);

// Figure-style series: per layer, (magnitude, mean, std) points in grid order.
struct LayerSeries {
  std::string layer;
  std::vector<CellAggregate> points;
};
std::vector<LayerSeries> plot_series(const SweepResult& result);

}  // namespace ablate
