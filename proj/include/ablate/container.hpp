#pragma once

#include <string>

#include "ablate/network.hpp"

namespace ablate {

// Single-file model container:
//   8 bytes  magic "ABLATEv1"
//   4 bytes  little-endian manifest byte length
//   manifest UTF-8 JSON: input, layers, params [{name, shape, offset, length}]
//   blob     float32 little-endian, row-major, contiguous in layer order
//            (weights then biases per layer)
//   8 bytes  little-endian FNV-1a 64 checksum of the blob
//
// load(save(net)) reproduces the network bit-exactly. Any network in this
// container is accepted, including externally converted weights.
void save(const Network& net, const std::string& path);
Network load(const std::string& path);

inline constexpr char kContainerMagic[8] = {'A', 'B', 'L', 'A', 'T', 'E', 'v', '1'};

}  // namespace ablate
