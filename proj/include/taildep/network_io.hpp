#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "taildep/network.hpp"

namespace taildep {

// "XNN1" model file: magic, format version, class count, input shape, layer
// table with weights and biases, both Adam moment sets, optimizer step and
// build seed. Everything little-endian; a round trip is bitwise exact.
inline constexpr char kModelMagic[4] = {'X', 'N', 'N', '1'};
inline constexpr std::uint32_t kModelVersion = 1;

std::vector<unsigned char> model_to_bytes(const NetworkState& net);
NetworkState model_from_bytes(const unsigned char* data, std::size_t size);

void save_model(const std::string& path, const NetworkState& net);
NetworkState load_model(const std::string& path);

}  // namespace taildep
