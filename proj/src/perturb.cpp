#include "ablate/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <json.hpp>

#include "ablate/error.hpp"

namespace ablate {

using nlohmann::json;

const char* to_string(Treatment t) {
  switch (t) {
    case Treatment::synapse_knockout: return "synapse_knockout";
    case Treatment::node_knockout: return "node_knockout";
    case Treatment::gaussian: return "gaussian";
  }
  return "?";
}

Treatment treatment_from_string(const std::string& name) {
  if (name == "synapse_knockout") return Treatment::synapse_knockout;
  if (name == "node_knockout") return Treatment::node_knockout;
  if (name == "gaussian") return Treatment::gaussian;
  throw ValidationError("unknown treatment \"" + name + "\"");
}

std::string to_json(const PerturbationSpec& spec) {
  json doc{{"treatment", to_string(spec.treatment)},
           {"layer", spec.layer},
           {"magnitude", spec.magnitude},
           {"seed", spec.seed}};
  return doc.dump();
}

PerturbationSpec perturbation_spec_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("perturbation spec is not valid JSON: ") + e.what());
  }
  PerturbationSpec spec;
  spec.treatment = treatment_from_string(doc.at("treatment").get<std::string>());
  spec.layer = doc.at("layer").get<std::string>();
  spec.magnitude = doc.at("magnitude").get<double>();
  spec.seed = doc.at("seed").get<std::uint64_t>();
  return spec;
}

std::int64_t knockout_count(double proportion, std::int64_t n) {
  if (!(proportion >= 0.0 && proportion <= 1.0))
    throw ValidationError("knockout proportion must be in [0, 1], got " +
                          std::to_string(proportion));
  // Round half away from zero, applied separately per parameter class.
  return std::llround(proportion * static_cast<double>(n));
}

namespace {

LayerParams& checked_params(Network& net, const std::string& layer) {
  const int idx = net.layer_index(layer);
  if (idx < 0) throw ValidationError("unknown layer \"" + layer + "\"");
  if (!net.params[static_cast<std::size_t>(idx)])
    throw ValidationError("layer \"" + layer + "\" carries no parameters");
  return *net.params[static_cast<std::size_t>(idx)];
}

// Audit hash: (count, sorted indices) per parameter class, weights first,
// chained through one FNV-1a state as little-endian u64 words.
std::uint64_t chain_u64(std::uint64_t hash, std::uint64_t value) {
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(value >> (8 * i));
  return fnv1a64(bytes, 8, hash);
}

std::uint64_t indices_hash(std::vector<std::int64_t> weight_idx, std::vector<std::int64_t> bias_idx) {
  std::sort(weight_idx.begin(), weight_idx.end());
  std::sort(bias_idx.begin(), bias_idx.end());
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  hash = chain_u64(hash, static_cast<std::uint64_t>(weight_idx.size()));
  for (std::int64_t i : weight_idx) hash = chain_u64(hash, static_cast<std::uint64_t>(i));
  hash = chain_u64(hash, static_cast<std::uint64_t>(bias_idx.size()));
  for (std::int64_t i : bias_idx) hash = chain_u64(hash, static_cast<std::uint64_t>(i));
  return hash;
}

double population_sigma(const Tensor& t) {
  if (t.size() < 1) return 0.0;
  double mean = 0.0;
  for (float v : t.data) mean += v;
  mean /= static_cast<double>(t.size());
  double m2 = 0.0;
  for (float v : t.data) {
    const double d = static_cast<double>(v) - mean;
    m2 += d * d;
  }
  return std::sqrt(m2 / static_cast<double>(t.size()));
}

DeltaSummary summarize_deltas(const std::vector<double>& deltas) {
  DeltaSummary s;
  if (deltas.empty()) return s;
  double mean = 0.0;
  for (double d : deltas) mean += d;
  mean /= static_cast<double>(deltas.size());
  double m2 = 0.0;
  for (double d : deltas) m2 += (d - mean) * (d - mean);
  s.mean = mean;
  s.stddev = std::sqrt(m2 / static_cast<double>(deltas.size()));
  return s;
}

}  // namespace

PerturbationReceipt synapse_knockout(Network& net, const std::string& layer, double proportion,
                                     Rng& rng) {
  LayerParams& p = checked_params(net, layer);
  const std::int64_t kw = knockout_count(proportion, p.weights.size());
  const std::int64_t kb = knockout_count(proportion, p.biases.size());

  // Weights first, then biases; each class sampled without replacement.
  const std::vector<std::int64_t> weight_idx = sample_without_replacement(p.weights.size(), kw, rng);
  const std::vector<std::int64_t> bias_idx = sample_without_replacement(p.biases.size(), kb, rng);
  for (std::int64_t i : weight_idx) p.weights[i] = 0.f;
  for (std::int64_t i : bias_idx) p.biases[i] = 0.f;

  PerturbationReceipt receipt;
  receipt.treatment = Treatment::synapse_knockout;
  receipt.layer = layer;
  receipt.zeroed_weights = kw;
  receipt.zeroed_biases = kb;
  receipt.indices_hash = indices_hash(weight_idx, bias_idx);
  return receipt;
}

PerturbationReceipt node_knockout(Network& net, const std::string& layer, double proportion,
                                  Rng& rng) {
  const LayerSpec& spec = net.layer(layer);
  if (spec.kind != LayerKind::conv2d && spec.kind != LayerKind::dense)
    throw ValidationError("node knockout requires a conv2d or dense layer, \"" + layer + "\" is " +
                          to_string(spec.kind));
  LayerParams& p = checked_params(net, layer);

  const std::int64_t nodes = p.weights.dim(0);
  const std::int64_t per_node = p.weights.size() / nodes;  // kernel slice or weight row
  const std::int64_t k = knockout_count(proportion, nodes);
  const std::vector<std::int64_t> node_idx = sample_without_replacement(nodes, k, rng);

  std::vector<std::int64_t> weight_idx;
  weight_idx.reserve(static_cast<std::size_t>(k * per_node));
  for (std::int64_t node : node_idx) {
    for (std::int64_t j = 0; j < per_node; ++j) {
      p.weights[node * per_node + j] = 0.f;
      weight_idx.push_back(node * per_node + j);
    }
    p.biases[node] = 0.f;
  }

  PerturbationReceipt receipt;
  receipt.treatment = Treatment::node_knockout;
  receipt.layer = layer;
  receipt.zeroed_weights = k * per_node;
  receipt.zeroed_biases = k;
  receipt.indices_hash = indices_hash(weight_idx, node_idx);
  return receipt;
}

PerturbationReceipt gaussian_perturb(Network& net, const std::string& layer, double scale,
                                     Rng& rng) {
  if (!(scale >= 0.0)) throw ValidationError("gaussian scale must be >= 0");
  LayerParams& p = checked_params(net, layer);

  PerturbationReceipt receipt;
  receipt.treatment = Treatment::gaussian;
  receipt.layer = layer;

  // Sigmas come from the tensors as passed in: the caller perturbs a fresh
  // copy of the pristine network, never a perturbed one.
  const auto apply = [&](Tensor& t, DeltaSummary& summary) {
    const double sigma = population_sigma(t);
    if (scale == 0.0) return;  // identity, bit-exact
    if (sigma == 0.0) {
      summary.degenerate_sigma = true;  // nothing to scale against
      return;
    }
    std::vector<double> deltas;
    deltas.reserve(static_cast<std::size_t>(t.size()));
    for (std::int64_t i = 0; i < t.size(); ++i) {
      const float delta = static_cast<float>(scale * sigma * rng.next_gaussian());
      t[i] += delta;
      deltas.push_back(static_cast<double>(delta));
    }
    summary = summarize_deltas(deltas);
  };
  apply(p.weights, receipt.weight_deltas);
  apply(p.biases, receipt.bias_deltas);
  return receipt;
}

std::pair<Network, PerturbationReceipt> perturbed(const Network& net, const PerturbationSpec& spec) {
  Network copy = net;
  Rng rng(spec.seed);
  PerturbationReceipt receipt;
  switch (spec.treatment) {
    case Treatment::synapse_knockout:
      receipt = synapse_knockout(copy, spec.layer, spec.magnitude, rng);
      break;
    case Treatment::node_knockout:
      receipt = node_knockout(copy, spec.layer, spec.magnitude, rng);
      break;
    case Treatment::gaussian:
      receipt = gaussian_perturb(copy, spec.layer, spec.magnitude, rng);
      break;
  }
  return {std::move(copy), receipt};
}

}  // namespace ablate
