#include "taildep/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace taildep {

namespace wire {

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  out.push_back(static_cast<unsigned char>(v));
  out.push_back(static_cast<unsigned char>(v >> 8));
  out.push_back(static_cast<unsigned char>(v >> 16));
  out.push_back(static_cast<unsigned char>(v >> 24));
}

void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_f64(std::vector<unsigned char>& out, double v) {
  put_u64(out, std::bit_cast<std::uint64_t>(v));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

double get_f64(const unsigned char* p) { return std::bit_cast<double>(get_u64(p)); }

}  // namespace wire

std::vector<unsigned char> tensor_to_bytes(const DependenceTensor& t) {
  std::vector<unsigned char> out;
  out.reserve(tensor_byte_size(t.d));
  out.insert(out.end(), kTensorMagic, kTensorMagic + 4);
  wire::put_f64(out, t.u);
  wire::put_u32(out, static_cast<std::uint32_t>(t.d));
  for (std::size_t i = 0; i < t.d * t.d; ++i) wire::put_f64(out, t.chi.data()[i]);
  for (std::size_t i = 0; i < t.d * t.d; ++i) wire::put_f64(out, t.chibar.data()[i]);
  return out;
}

DependenceTensor tensor_from_bytes(const unsigned char* data, std::size_t size) {
  if (size < 16 || std::memcmp(data, kTensorMagic, 4) != 0)
    throw IoError("not a dependence-tensor record");
  DependenceTensor t;
  t.u = wire::get_f64(data + 4);
  t.d = wire::get_u32(data + 12);
  if (t.d < 1 || size < tensor_byte_size(t.d))
    throw IoError("dependence-tensor record is truncated");
  t.chi = Matrix(t.d, t.d);
  t.chibar = Matrix(t.d, t.d);
  const unsigned char* p = data + 16;
  for (std::size_t i = 0; i < t.d * t.d; ++i, p += 8) t.chi.data()[i] = wire::get_f64(p);
  for (std::size_t i = 0; i < t.d * t.d; ++i, p += 8) t.chibar.data()[i] = wire::get_f64(p);
  return t;
}

void save_tensor(const std::string& path, const DependenceTensor& t) {
  const auto bytes = tensor_to_bytes(t);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed: " + path);
}

DependenceTensor load_tensor(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
  return tensor_from_bytes(bytes.data(), bytes.size());
}

}  // namespace taildep
