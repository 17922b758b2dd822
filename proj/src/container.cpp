#include "ablate/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <set>
#include <vector>

#include <json.hpp>

#include "ablate/error.hpp"
#include "ablate/rng.hpp"

namespace ablate {

using nlohmann::json;

namespace {

void put_u32le(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_u64le(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

std::uint32_t get_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint64_t get_u64le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

struct ParamEntry {
  std::string name;
  std::vector<std::int64_t> shape;
  std::uint64_t offset = 0;
  std::uint64_t length = 0;
};

}  // namespace

void save(const Network& net, const std::string& path) {
  // Blob: layer order, weights then biases, float32 little-endian.
  std::vector<unsigned char> blob;
  json params = json::array();
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    if (!net.params[i]) continue;
    const auto add = [&](const std::string& suffix, const Tensor& t) {
      json entry;
      entry["name"] = net.layers[i].name + "." + suffix;
      entry["shape"] = t.shape;
      entry["offset"] = blob.size();
      entry["length"] = t.data.size() * 4;
      params.push_back(std::move(entry));
      for (float v : t.data) put_u32le(blob, std::bit_cast<std::uint32_t>(v));
    };
    add("weight", net.params[i]->weights);
    add("bias", net.params[i]->biases);
  }

  json manifest = json::parse(manifest_json(net));
  manifest["params"] = std::move(params);
  const std::string manifest_text = manifest.dump();

  std::vector<unsigned char> file;
  file.insert(file.end(), kContainerMagic, kContainerMagic + 8);
  put_u32le(file, static_cast<std::uint32_t>(manifest_text.size()));
  file.insert(file.end(), manifest_text.begin(), manifest_text.end());
  file.insert(file.end(), blob.begin(), blob.end());
  put_u64le(file, fnv1a64(blob.data(), blob.size()));

  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(file.data()), static_cast<std::streamsize>(file.size()));
  if (!out) throw RuntimeError("write failed: " + path);
}

Network load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open model " + path);
  std::vector<unsigned char> file((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());

  if (file.size() < 12 || std::memcmp(file.data(), kContainerMagic, 8) != 0)
    throw ValidationError(path + ": bad magic (not an ABLATEv1 container)");
  const std::uint64_t manifest_len = get_u32le(file.data() + 8);
  if (12 + manifest_len + 8 > file.size())
    throw ValidationError(path + ": truncated container (manifest length overruns file)");

  const std::string manifest_text(reinterpret_cast<const char*>(file.data() + 12),
                                  manifest_len);
  const unsigned char* blob = file.data() + 12 + manifest_len;
  const std::uint64_t blob_len = file.size() - 12 - manifest_len - 8;

  const std::uint64_t stored = get_u64le(file.data() + file.size() - 8);
  const std::uint64_t computed = fnv1a64(blob, blob_len);
  if (stored != computed) throw ValidationError(path + ": blob checksum mismatch, load refused");

  json doc;
  try {
    doc = json::parse(manifest_text);
  } catch (const json::exception& e) {
    throw ValidationError(path + ": manifest is not valid JSON: " + e.what());
  }
  Network net = network_from_manifest(manifest_text);

  if (!doc.contains("params") || !doc["params"].is_array())
    throw ValidationError(path + ": manifest lacks a params index");

  std::vector<ParamEntry> entries;
  std::uint64_t covered = 0;
  for (const json& e : doc["params"]) {
    ParamEntry entry;
    entry.name = e.at("name").get<std::string>();
    entry.shape = e.at("shape").get<std::vector<std::int64_t>>();
    entry.offset = e.at("offset").get<std::uint64_t>();
    entry.length = e.at("length").get<std::uint64_t>();
    const std::int64_t count = shape_count(entry.shape);
    if (entry.length != static_cast<std::uint64_t>(count) * 4)
      throw ValidationError(path + ": param " + entry.name + " length disagrees with its shape");
    if (entry.offset + entry.length > blob_len || entry.offset + entry.length < entry.offset)
      throw ValidationError(path + ": param " + entry.name + " extends past the end of the blob");
    covered += entry.length;
    entries.push_back(std::move(entry));
  }
  if (covered != blob_len)
    throw ValidationError(path + ": blob length " + std::to_string(blob_len) +
                          " does not equal the manifest's parameter bytes " +
                          std::to_string(covered));

  std::set<std::string> seen;
  for (const ParamEntry& entry : entries) {
    if (!seen.insert(entry.name).second)
      throw ValidationError(path + ": duplicate param entry " + entry.name);
    const auto dot = entry.name.rfind('.');
    if (dot == std::string::npos)
      throw ValidationError(path + ": param name " + entry.name + " lacks a .weight/.bias suffix");
    const std::string layer_name = entry.name.substr(0, dot);
    const std::string suffix = entry.name.substr(dot + 1);
    const int idx = net.layer_index(layer_name);
    if (idx < 0) throw ValidationError(path + ": param " + entry.name + " names no layer");
    auto& slot = net.params[static_cast<std::size_t>(idx)];
    if (!slot) throw ValidationError(path + ": layer " + layer_name + " carries no parameters");

    Tensor* target = nullptr;
    if (suffix == "weight") target = &slot->weights;
    else if (suffix == "bias") target = &slot->biases;
    else throw ValidationError(path + ": param suffix ." + suffix + " is not weight/bias");

    if (target->shape != entry.shape)
      throw ValidationError(path + ": param " + entry.name + " shape " + shape_str(entry.shape) +
                            " disagrees with the manifest layer (" + shape_str(target->shape) + ")");
    for (std::int64_t i = 0; i < target->size(); ++i)
      (*target)[i] = std::bit_cast<float>(get_u32le(blob + entry.offset + 4 * i));
  }

  for (const auto& spec : net.layers) {
    if (!spec.parameterized()) continue;
    if (!seen.count(spec.name + ".weight") || !seen.count(spec.name + ".bias"))
      throw ValidationError(path + ": layer " + spec.name + " is missing weight or bias data");
  }
  return net;
}

}  // namespace ablate
