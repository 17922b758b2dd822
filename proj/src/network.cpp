#include "ablate/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ablate/error.hpp"
#include "ablate/ops.hpp"
#include "ablate/rng.hpp"
#include "ablate/stats.hpp"

namespace ablate {

using nlohmann::json;

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::flatten: return "flatten";
    case LayerKind::dense: return "dense";
    case LayerKind::dropout: return "dropout";
    case LayerKind::softmax: return "softmax";
  }
  return "?";
}

LayerKind layer_kind_from_string(const std::string& name) {
  if (name == "conv2d") return LayerKind::conv2d;
  if (name == "relu") return LayerKind::relu;
  if (name == "maxpool") return LayerKind::maxpool;
  if (name == "flatten") return LayerKind::flatten;
  if (name == "dense") return LayerKind::dense;
  if (name == "dropout") return LayerKind::dropout;
  if (name == "softmax") return LayerKind::softmax;
  throw ValidationError("unknown layer kind \"" + name + "\"");
}

int Network::layer_index(const std::string& name) const {
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (layers[i].name == name) return static_cast<int>(i);
  return -1;
}

const LayerSpec& Network::layer(const std::string& name) const {
  const int i = layer_index(name);
  if (i < 0) throw ValidationError("unknown layer \"" + name + "\"");
  return layers[static_cast<std::size_t>(i)];
}

LayerParams& Network::params_for(const std::string& name) {
  const int i = layer_index(name);
  if (i < 0) throw ValidationError("unknown layer \"" + name + "\"");
  auto& slot = params[static_cast<std::size_t>(i)];
  if (!slot) throw ValidationError("layer \"" + name + "\" carries no parameters");
  return *slot;
}

const LayerParams& Network::params_for(const std::string& name) const {
  return const_cast<Network*>(this)->params_for(name);
}

std::vector<std::string> Network::parameterized_layer_names() const {
  std::vector<std::string> names;
  for (const auto& spec : layers)
    if (spec.parameterized()) names.push_back(spec.name);
  return names;
}

std::int64_t Network::parameter_count() const {
  std::int64_t total = 0;
  for (const auto& slot : params)
    if (slot) total += slot->weights.size() + slot->biases.size();
  return total;
}

namespace {

bool legal_name(const std::string& name) {
  if (name.empty()) return false;
  for (char ch : name) {
    const bool ok = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') ||
                    (ch >= '0' && ch <= '9') || ch == '_' || ch == '-' || ch == '.';
    if (!ok) return false;
  }
  return true;
}

LayerSpec parse_layer(const json& entry) {
  LayerSpec spec;
  if (!entry.contains("name") || !entry.contains("kind"))
    throw ValidationError("manifest layer needs \"name\" and \"kind\"");
  spec.name = entry.at("name").get<std::string>();
  if (!legal_name(spec.name))
    throw ValidationError("layer name \"" + spec.name +
                          "\" must match [A-Za-z0-9_.-]+ (it is used in CSV and file names)");
  spec.kind = layer_kind_from_string(entry.at("kind").get<std::string>());
  switch (spec.kind) {
    case LayerKind::conv2d:
      spec.filters = entry.at("filters").get<int>();
      spec.kernel = entry.at("kernel").get<int>();
      spec.stride = entry.value("stride", 1);
      spec.padding = entry.value("padding", 0);
      if (spec.filters < 1 || spec.kernel < 1 || spec.stride < 1 || spec.padding < 0)
        throw ValidationError("layer \"" + spec.name + "\": bad conv2d hyperparameters");
      break;
    case LayerKind::dense:
      spec.units = entry.at("units").get<int>();
      if (spec.units < 1) throw ValidationError("layer \"" + spec.name + "\": units must be >= 1");
      break;
    case LayerKind::maxpool:
      spec.window = entry.at("window").get<int>();
      spec.pool_stride = entry.value("stride", spec.window);
      if (spec.window < 1 || spec.pool_stride < 1)
        throw ValidationError("layer \"" + spec.name + "\": bad maxpool hyperparameters");
      break;
    case LayerKind::dropout:
      spec.rate = entry.at("rate").get<float>();
      if (!(spec.rate >= 0.f && spec.rate < 1.f))
        throw ValidationError("layer \"" + spec.name + "\": dropout rate must be in [0, 1)");
      break;
    default:
      break;
  }
  return spec;
}

// Walks the layer stack, checks composition and returns each parameterized
// layer's tensor shapes.
struct Composition {
  std::vector<std::vector<std::int64_t>> weight_shapes;  // per layer, empty if none
  std::int64_t output_dim = 0;                           // flat output width
};

Composition compose(const InputShape& input, const std::vector<LayerSpec>& layers) {
  if (input.channels < 1 || input.height < 1 || input.width < 1)
    throw ValidationError("manifest input shape must be positive");
  Composition out;
  out.weight_shapes.resize(layers.size());

  bool flat = false;
  std::int64_t c = input.channels, h = input.height, w = input.width, d = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& spec = layers[i];
    switch (spec.kind) {
      case LayerKind::conv2d: {
        if (flat)
          throw ValidationError("layer \"" + spec.name + "\": conv2d after flatten");
        const std::int64_t span_h = h + 2 * spec.padding - spec.kernel;
        const std::int64_t span_w = w + 2 * spec.padding - spec.kernel;
        if (span_h < 0 || span_w < 0 || span_h % spec.stride || span_w % spec.stride)
          throw ValidationError("layer \"" + spec.name + "\": conv2d does not fit input " +
                                shape_str({c, h, w}));
        out.weight_shapes[i] = {spec.filters, c, spec.kernel, spec.kernel};
        c = spec.filters;
        h = span_h / spec.stride + 1;
        w = span_w / spec.stride + 1;
        break;
      }
      case LayerKind::maxpool:
        if (flat) throw ValidationError("layer \"" + spec.name + "\": maxpool after flatten");
        if (spec.window > h || spec.window > w)
          throw ValidationError("layer \"" + spec.name + "\": window larger than input " +
                                shape_str({c, h, w}));
        h = (h - spec.window) / spec.pool_stride + 1;
        w = (w - spec.window) / spec.pool_stride + 1;
        break;
      case LayerKind::flatten:
        if (flat) throw ValidationError("layer \"" + spec.name + "\": input is already flat");
        flat = true;
        d = c * h * w;
        break;
      case LayerKind::dense:
        if (!flat)
          throw ValidationError("layer \"" + spec.name + "\": dense requires a flatten before it");
        out.weight_shapes[i] = {spec.units, d};
        d = spec.units;
        break;
      case LayerKind::softmax:
        if (!flat) throw ValidationError("layer \"" + spec.name + "\": softmax requires flat input");
        break;
      case LayerKind::relu:
      case LayerKind::dropout:
        break;
    }
  }
  if (!flat) throw ValidationError("network must end flat (flatten + dense stack)");
  out.output_dim = d;
  return out;
}

}  // namespace

Network network_from_manifest(const std::string& manifest_text) {
  json doc;
  try {
    doc = json::parse(manifest_text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!doc.contains("input") || !doc.contains("layers"))
    throw ValidationError("manifest needs \"input\" and \"layers\"");

  Network net;
  const json& in = doc.at("input");
  net.input.channels = in.at("channels").get<std::int64_t>();
  net.input.height = in.at("height").get<std::int64_t>();
  net.input.width = in.at("width").get<std::int64_t>();

  std::set<std::string> seen;
  for (const json& entry : doc.at("layers")) {
    LayerSpec spec = parse_layer(entry);
    if (!seen.insert(spec.name).second)
      throw ValidationError("duplicate layer name \"" + spec.name + "\"");
    net.layers.push_back(std::move(spec));
  }
  if (net.layers.empty()) throw ValidationError("manifest has no layers");

  const Composition comp = compose(net.input, net.layers);
  net.class_count = static_cast<int>(comp.output_dim);
  net.params.resize(net.layers.size());
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    if (!net.layers[i].parameterized()) continue;
    LayerParams p;
    p.weights = Tensor(comp.weight_shapes[i]);
    p.biases = Tensor({comp.weight_shapes[i][0]});
    net.params[i] = std::move(p);
  }
  return net;
}

Network load_manifest_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open manifest " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return network_from_manifest(buffer.str());
}

std::string manifest_json(const Network& net) {
  json doc;
  doc["input"] = {{"channels", net.input.channels},
                  {"height", net.input.height},
                  {"width", net.input.width}};
  doc["layers"] = json::array();
  for (const auto& spec : net.layers) {
    json entry{{"name", spec.name}, {"kind", to_string(spec.kind)}};
    switch (spec.kind) {
      case LayerKind::conv2d:
        entry["filters"] = spec.filters;
        entry["kernel"] = spec.kernel;
        entry["stride"] = spec.stride;
        entry["padding"] = spec.padding;
        break;
      case LayerKind::dense:
        entry["units"] = spec.units;
        break;
      case LayerKind::maxpool:
        entry["window"] = spec.window;
        entry["stride"] = spec.pool_stride;
        break;
      case LayerKind::dropout:
        entry["rate"] = spec.rate;
        break;
      default:
        break;
    }
    doc["layers"].push_back(std::move(entry));
  }
  return doc.dump();
}

void initialize_parameters(Network& net, std::uint64_t seed) {
  Rng rng(seed);
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    auto& slot = net.params[i];
    if (!slot) continue;
    const auto& shape = slot->weights.shape;
    std::int64_t fan_in = 1;
    for (std::size_t k = 1; k < shape.size(); ++k) fan_in *= shape[k];
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (float& v : slot->weights.data)
      v = static_cast<float>((2.0 * rng.next_unit() - 1.0) * limit);
    std::fill(slot->biases.data.begin(), slot->biases.data.end(), 0.f);
  }
}

Network build_network(const std::string& manifest_text, std::uint64_t seed) {
  Network net = network_from_manifest(manifest_text);
  initialize_parameters(net, seed);
  return net;
}

Tensor predict(const Network& net, const Tensor& batch) {
  if (batch.rank() != 4 || batch.dim(1) != net.input.channels ||
      batch.dim(2) != net.input.height || batch.dim(3) != net.input.width)
    throw ValidationError("predict: batch shape " + batch.shape_str() +
                          " does not match manifest input [Nx" +
                          std::to_string(net.input.channels) + "x" +
                          std::to_string(net.input.height) + "x" +
                          std::to_string(net.input.width) + "]");

  Tensor current = batch;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& spec = net.layers[i];
    switch (spec.kind) {
      case LayerKind::conv2d: {
        const LayerParams& p = *net.params[i];
        current = conv2d_forward(current, p.weights, p.biases, spec.stride, spec.padding);
        break;
      }
      case LayerKind::dense: {
        const LayerParams& p = *net.params[i];
        current = dense_forward(current, p.weights, p.biases);
        break;
      }
      case LayerKind::relu:
        current = relu(current);
        break;
      case LayerKind::maxpool:
        current = maxpool_forward(current, spec.window, spec.pool_stride).output;
        break;
      case LayerKind::flatten:
        current = flatten(current);
        break;
      case LayerKind::dropout:
        break;  // identity at evaluation
      case LayerKind::softmax:
        current = softmax(current);
        break;
    }
  }
  return current;
}

double evaluate_topk(const Network& net, const Dataset& data, int k) {
  if (data.count() < 1) throw ValidationError("evaluate: empty dataset");
  if (k < 1 || k > net.class_count)
    throw ValidationError("evaluate: k=" + std::to_string(k) + " out of range [1, " +
                          std::to_string(net.class_count) + "]");
  const std::int64_t n = data.count();
  const std::int64_t c = data.images.dim(1), h = data.images.dim(2), w = data.images.dim(3);
  const std::int64_t pixels = c * h * w;
  constexpr std::int64_t kChunk = 128;

  std::int64_t correct = 0;
  for (std::int64_t start = 0; start < n; start += kChunk) {
    const std::int64_t rows = std::min(kChunk, n - start);
    Tensor batch({rows, c, h, w});
    std::copy_n(data.images.data.begin() + start * pixels, rows * pixels, batch.data.begin());
    const Tensor scores = predict(net, batch);
    for (std::int64_t r = 0; r < rows; ++r) {
      std::span<const float> row(scores.data.data() + r * scores.dim(1),
                                 static_cast<std::size_t>(scores.dim(1)));
      if (label_in_top_k(row, data.labels[static_cast<std::size_t>(start + r)], k)) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

LayerParamStats layer_param_stats(const Network& net, const std::string& layer_name) {
  const LayerParams& p = net.params_for(layer_name);
  LayerParamStats stats;
  stats.weights = describe(std::span<const float>(p.weights.data));
  stats.biases = describe(std::span<const float>(p.biases.data));
  return stats;
}

}  // namespace ablate
