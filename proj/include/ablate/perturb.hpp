#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include "ablate/network.hpp"
#include "ablate/rng.hpp"

namespace ablate {

enum class Treatment { synapse_knockout, node_knockout, gaussian };
const char* to_string(Treatment t);
Treatment treatment_from_string(const std::string& name);

struct PerturbationSpec {
  Treatment treatment = Treatment::synapse_knockout;
  std::string layer;
  double magnitude = 0;  // knockout proportion in [0,1], or Gaussian scale >= 0
  std::uint64_t seed = 0;
};
std::string to_json(const PerturbationSpec& spec);
PerturbationSpec perturbation_spec_from_json(const std::string& text);

struct DeltaSummary {
  double mean = 0;
  double stddev = 0;
  bool degenerate_sigma = false;  // sigma was 0 while the scale was > 0
};

struct PerturbationReceipt {
  Treatment treatment = Treatment::synapse_knockout;
  std::string layer;
  std::int64_t zeroed_weights = 0;
  std::int64_t zeroed_biases = 0;
  DeltaSummary weight_deltas;  // gaussian treatment only
  DeltaSummary bias_deltas;
  std::uint64_t indices_hash = 0;  // FNV-1a over the sorted zeroed indices
};

// Knockout count per parameter class: round-half-away-from-zero of p*n.
std::int64_t knockout_count(double proportion, std::int64_t n);

// The three treatments. Each modifies exactly the named layer of `net` (a
// copy the caller owns) and leaves every other tensor bit-unchanged. The
// stream is consumed in a fixed order: weights first, then biases.
//
// synapse_knockout: round(p*Nw) weight entries and round(p*Nb) bias entries,
// sampled uniformly without replacement, are set to zero.
PerturbationReceipt synapse_knockout(Network& net, const std::string& layer, double proportion,
                                     Rng& rng);
// node_knockout: round(p*n_nodes) output nodes are selected; a conv2d node
// is one filter (its whole kernel slice), a dense node one weight row; the
// node's bias is zeroed with it.
PerturbationReceipt node_knockout(Network& net, const std::string& layer, double proportion,
                                  Rng& rng);
// gaussian_perturb: every weight gets an independent N(0, (m*sigma_w)^2)
// delta and every bias an N(0, (m*sigma_b)^2) delta, where sigma_w/sigma_b
// are the population stds of the layer's unperturbed tensors. A zero sigma
// with m > 0 is flagged and leaves that class untouched.
PerturbationReceipt gaussian_perturb(Network& net, const std::string& layer, double scale,
                                     Rng& rng);

// Fresh perturbed copy of a pristine network; used by the sweep harness.
std::pair<Network, PerturbationReceipt> perturbed(const Network& net, const PerturbationSpec& spec);

}  // namespace ablate
