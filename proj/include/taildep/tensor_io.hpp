#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "taildep/extremes.hpp"

namespace taildep {

// "XDT1" record: magic, threshold u as f64 LE, site count d as u32 LE, then
// the chi plane row-major as f64 LE and the chibar plane likewise. The byte
// layout is normative and shared with corpus containers.
inline constexpr char kTensorMagic[4] = {'X', 'D', 'T', '1'};

constexpr std::size_t tensor_byte_size(std::size_t d) { return 4 + 8 + 4 + 16 * d * d; }

std::vector<unsigned char> tensor_to_bytes(const DependenceTensor& t);
DependenceTensor tensor_from_bytes(const unsigned char* data, std::size_t size);

void save_tensor(const std::string& path, const DependenceTensor& t);
DependenceTensor load_tensor(const std::string& path);

// Little-endian scalar helpers shared by the binary formats.
namespace wire {
void put_u32(std::vector<unsigned char>& out, std::uint32_t v);
void put_u64(std::vector<unsigned char>& out, std::uint64_t v);
void put_f64(std::vector<unsigned char>& out, double v);
std::uint32_t get_u32(const unsigned char* p);
std::uint64_t get_u64(const unsigned char* p);
double get_f64(const unsigned char* p);
}  // namespace wire

}  // namespace taildep
