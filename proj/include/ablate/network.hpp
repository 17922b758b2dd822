#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ablate/dataset.hpp"
#include "ablate/descriptive.hpp"
#include "ablate/tensor.hpp"

namespace ablate {

enum class LayerKind { conv2d, relu, maxpool, flatten, dense, dropout, softmax };
const char* to_string(LayerKind kind);
LayerKind layer_kind_from_string(const std::string& name);

struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::relu;
  int filters = 0, kernel = 0, stride = 1, padding = 0;  // conv2d
  int units = 0;                                         // dense
  int window = 0, pool_stride = 0;                       // maxpool
  float rate = 0.f;                                      // dropout

  bool parameterized() const { return kind == LayerKind::conv2d || kind == LayerKind::dense; }
};

struct InputShape {
  std::int64_t channels = 0, height = 0, width = 0;
};

struct LayerParams {
  Tensor weights;
  Tensor biases;
};

struct Network {
  InputShape input;
  std::vector<LayerSpec> layers;
  std::vector<std::optional<LayerParams>> params;  // aligned with layers
  int class_count = 0;

  int layer_index(const std::string& name) const;  // -1 when absent
  const LayerSpec& layer(const std::string& name) const;
  LayerParams& params_for(const std::string& name);
  const LayerParams& params_for(const std::string& name) const;
  std::vector<std::string> parameterized_layer_names() const;
  std::int64_t parameter_count() const;
};

// Manifest JSON: {"input":{"channels":..,"height":..,"width":..},
// "layers":[{"name":..,"kind":..,...}]}. Validates unique names, legal
// hyperparameters and shape composition; allocates zero parameters.
Network network_from_manifest(const std::string& manifest_json);
Network load_manifest_file(const std::string& path);
std::string manifest_json(const Network& net);

// He-uniform weights (limit sqrt(6/fan_in)) drawn from one stream, layers
// in order, row-major; biases zero.
void initialize_parameters(Network& net, std::uint64_t seed);
Network build_network(const std::string& manifest_text, std::uint64_t seed);

// Eval-mode forward: dropout is the identity, a trailing softmax is
// applied. Pure function of (parameters, batch).
Tensor predict(const Network& net, const Tensor& batch);

// Chunked eval-mode top-k accuracy over a dataset.
double evaluate_topk(const Network& net, const Dataset& data, int k);

struct LayerParamStats {
  DescriptiveStats weights;
  DescriptiveStats biases;
};
LayerParamStats layer_param_stats(const Network& net, const std::string& layer_name);

}  // namespace ablate
