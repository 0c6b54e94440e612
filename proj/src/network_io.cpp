#include "taildep/network_io.hpp"

#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "taildep/tensor_io.hpp"

namespace taildep {

namespace {

void put_blob(std::vector<unsigned char>& out, const std::vector<double>& xs) {
  wire::put_u64(out, xs.size());
  for (double x : xs) wire::put_f64(out, x);
}

struct Cursor {
  const unsigned char* p;
  std::size_t left;

  void need(std::size_t n) const {
    if (left < n) throw IoError("model file is truncated");
  }
  std::uint8_t u8() {
    need(1);
    const std::uint8_t v = *p;
    p += 1;
    left -= 1;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    const std::uint32_t v = wire::get_u32(p);
    p += 4;
    left -= 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    const std::uint64_t v = wire::get_u64(p);
    p += 8;
    left -= 8;
    return v;
  }
  std::vector<double> blob(std::size_t expect) {
    const std::uint64_t n = u64();
    if (n != expect) throw IoError("model file is inconsistent with its layer shapes");
    need(8 * n);
    std::vector<double> xs(n);
    for (std::size_t k = 0; k < n; ++k) xs[k] = wire::get_f64(p + 8 * k);
    p += 8 * n;
    left -= 8 * n;
    return xs;
  }
};

bool known_kind(std::uint8_t k) {
  return k >= 1 && k <= 4;  // conv, maxpool, flatten, dense
}

bool known_act(std::uint8_t a) { return a <= 2; }

}  // namespace

std::vector<unsigned char> model_to_bytes(const NetworkState& net) {
  std::vector<unsigned char> out;
  out.insert(out.end(), kModelMagic, kModelMagic + 4);
  wire::put_u32(out, kModelVersion);
  wire::put_u32(out, static_cast<std::uint32_t>(net.classes));
  wire::put_u32(out, static_cast<std::uint32_t>(net.input.h));
  wire::put_u32(out, static_cast<std::uint32_t>(net.input.w));
  wire::put_u32(out, static_cast<std::uint32_t>(net.input.c));
  wire::put_u32(out, static_cast<std::uint32_t>(net.specs.size()));
  for (std::size_t li = 0; li < net.specs.size(); ++li) {
    const LayerSpec& sp = net.specs[li];
    out.push_back(static_cast<unsigned char>(sp.kind));
    out.push_back(static_cast<unsigned char>(sp.act));
    wire::put_u32(out, static_cast<std::uint32_t>(sp.units));
    wire::put_u32(out, static_cast<std::uint32_t>(sp.kh));
    wire::put_u32(out, static_cast<std::uint32_t>(sp.kw));
    wire::put_u32(out, static_cast<std::uint32_t>(sp.sh));
    wire::put_u32(out, static_cast<std::uint32_t>(sp.sw));
    put_blob(out, net.params[li].w);
    put_blob(out, net.params[li].b);
  }
  for (std::size_t li = 0; li < net.specs.size(); ++li) {
    put_blob(out, net.m[li].w);
    put_blob(out, net.m[li].b);
  }
  for (std::size_t li = 0; li < net.specs.size(); ++li) {
    put_blob(out, net.v[li].w);
    put_blob(out, net.v[li].b);
  }
  wire::put_u64(out, net.step);
  wire::put_u64(out, net.seed);
  return out;
}

NetworkState model_from_bytes(const unsigned char* data, std::size_t size) {
  Cursor c{data, size};
  c.need(4);
  if (std::memcmp(c.p, kModelMagic, 4) != 0)
    throw IoError("not a model file (bad magic)");
  c.p += 4;
  c.left -= 4;
  const std::uint32_t version = c.u32();
  if (version != kModelVersion)
    throw IoError("unsupported model file version " + std::to_string(version));

  NetworkState net;
  net.classes = c.u32();
  net.input.h = c.u32();
  net.input.w = c.u32();
  net.input.c = c.u32();
  const std::uint32_t nl = c.u32();
  net.specs.resize(nl);
  net.params.resize(nl);
  net.m.resize(nl);
  net.v.resize(nl);
  for (std::uint32_t li = 0; li < nl; ++li) {
    LayerSpec& sp = net.specs[li];
    const std::uint8_t kind = c.u8();
    const std::uint8_t act = c.u8();
    if (!known_kind(kind) || !known_act(act))
      throw IoError("model file names an unknown layer kind or activation");
    sp.kind = static_cast<LayerKind>(kind);
    sp.act = static_cast<Activation>(act);
    sp.units = c.u32();
    sp.kh = c.u32();
    sp.kw = c.u32();
    sp.sh = c.u32();
    sp.sw = c.u32();
    // sizes are validated against the shape chain below; read as declared
    const std::uint64_t wlen = c.u64();
    c.need(8 * wlen);
    net.params[li].w.resize(wlen);
    for (std::uint64_t k = 0; k < wlen; ++k)
      net.params[li].w[k] = wire::get_f64(c.p + 8 * k);
    c.p += 8 * wlen;
    c.left -= 8 * wlen;
    const std::uint64_t blen = c.u64();
    c.need(8 * blen);
    net.params[li].b.resize(blen);
    for (std::uint64_t k = 0; k < blen; ++k)
      net.params[li].b[k] = wire::get_f64(c.p + 8 * k);
    c.p += 8 * blen;
    c.left -= 8 * blen;
  }
  for (std::uint32_t li = 0; li < nl; ++li) {
    net.m[li].w = c.blob(net.params[li].w.size());
    net.m[li].b = c.blob(net.params[li].b.size());
  }
  for (std::uint32_t li = 0; li < nl; ++li) {
    net.v[li].w = c.blob(net.params[li].w.size());
    net.v[li].b = c.blob(net.params[li].b.size());
  }
  net.step = c.u64();
  net.seed = c.u64();
  if (c.left != 0) throw IoError("model file has trailing bytes");

  // cross-check the stored parameter sizes against the declared layer chain
  std::vector<Shape3> shapes;
  try {
    shapes = shape_chain(net.input, net.specs);
  } catch (const ShapeError& e) {
    throw IoError(std::string("model file declares an invalid layer chain: ") +
                  e.what());
  }
  Shape3 cur = net.input;
  for (std::uint32_t li = 0; li < nl; ++li) {
    std::size_t wlen = 0, blen = 0;
    if (net.specs[li].kind == LayerKind::Conv2D) {
      wlen = net.specs[li].units * net.specs[li].kh * net.specs[li].kw * cur.c;
      blen = net.specs[li].units;
    } else if (net.specs[li].kind == LayerKind::Dense) {
      wlen = net.specs[li].units * cur.count();
      blen = net.specs[li].units;
    }
    if (net.params[li].w.size() != wlen || net.params[li].b.size() != blen)
      throw IoError("model file is inconsistent with its layer shapes");
    cur = shapes[li];
  }
  if (nl == 0 || net.specs[nl - 1].kind != LayerKind::Dense ||
      net.specs[nl - 1].units != net.classes ||
      net.specs[nl - 1].act != Activation::Softmax)
    throw IoError("model file lacks a softmax head sized to its classes");
  return net;
}

void save_model(const std::string& path, const NetworkState& net) {
  const std::vector<unsigned char> bytes = model_to_bytes(net);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path);
}

NetworkState load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (!in.good() && !in.eof()) throw IoError("failed reading " + path);
  return model_from_bytes(bytes.data(), bytes.size());
}

}  // namespace taildep
