#include "model/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "synthvid/image_io.hpp"

namespace semlens {

namespace {

constexpr char kMagic[8] = {'S', 'L', 'C', 'K', 'P', 'T', '1', '\0'};

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

void put_entry(std::string& out, const std::string& name, const num::Shape& shape,
               const std::vector<double>& data) {
  put_u32(out, static_cast<uint32_t>(name.size()));
  out.append(name);
  out.push_back('\0');  // dtype tag: 0 = f64
  put_u32(out, static_cast<uint32_t>(shape.size()));
  for (int64_t d : shape) put_u32(out, static_cast<uint32_t>(d));
  for (double v : data) put_f64(out, v);
}

struct Reader {
  const std::string& s;
  size_t off = 0;
  explicit Reader(const std::string& bytes) : s(bytes) {}

  void need(size_t n, const char* what) {
    if (s.size() - off < n)
      throw ValidationError(std::string("checkpoint truncated reading ") + what);
  }
  uint32_t u32(const char* what) {
    need(4, what);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(s[off++])) << (8 * i);
    return v;
  }
  uint64_t u64(const char* what) {
    need(8, what);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<uint8_t>(s[off++])) << (8 * i);
    return v;
  }
  double f64(const char* what) {
    uint64_t bits = u64(what);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string bytes(size_t n, const char* what) {
    need(n, what);
    std::string v = s.substr(off, n);
    off += n;
    return v;
  }
};

std::pair<std::string, std::pair<num::Shape, std::vector<double>>> read_entry(Reader& r) {
  const uint32_t name_len = r.u32("name length");
  std::string name = r.bytes(name_len, "name");
  const std::string dtype = r.bytes(1, "dtype");
  if (dtype[0] != 0) throw ValidationError("checkpoint: unsupported dtype tag");
  const uint32_t rank = r.u32("rank");
  num::Shape shape;
  int64_t n = 1;
  for (uint32_t i = 0; i < rank; ++i) {
    shape.push_back(r.u32("dim"));
    n *= shape.back();
  }
  std::vector<double> data(static_cast<size_t>(n));
  for (auto& v : data) v = r.f64("payload");
  return {std::move(name), {std::move(shape), std::move(data)}};
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& params,
                     const OptimMoments& opt, const num::Rng& rng,
                     const std::string& config_sha_hex) {
  if (config_sha_hex.size() != 64)
    throw ValidationError("save_checkpoint: config sha must be 64 hex chars");
  std::string out;
  out.append(kMagic, 8);
  put_u32(out, static_cast<uint32_t>(params.all().size()));
  for (const auto& [name, t] : params.all()) put_entry(out, name, t.shape(), t.data());
  // optimizer section
  put_u32(out, static_cast<uint32_t>(opt.m.size() + opt.v.size()));
  for (const auto& [name, m] : opt.m)
    put_entry(out, "adam.m." + name, {static_cast<int64_t>(m.size())}, m);
  for (const auto& [name, v] : opt.v)
    put_entry(out, "adam.v." + name, {static_cast<int64_t>(v.size())}, v);
  put_u64(out, opt.step);
  // RNG section
  put_u64(out, rng.state());
  out.push_back(rng.has_cached_normal() ? 1 : 0);
  put_f64(out, rng.cached_normal());
  // config hash (raw 32 bytes)
  for (size_t i = 0; i < 64; i += 2)
    out.push_back(static_cast<char>(std::stoi(config_sha_hex.substr(i, 2), nullptr, 16)));
  vid::write_file_atomic(path, out);
}

CheckpointData load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeFailure("cannot open checkpoint: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  const std::string s = os.str();
  Reader r(s);
  if (r.bytes(8, "magic") != std::string(kMagic, 8))
    throw ValidationError("checkpoint: bad magic in " + path);
  CheckpointData ckpt;
  const uint32_t count = r.u32("tensor count");
  for (uint32_t i = 0; i < count; ++i) ckpt.tensors.insert(read_entry(r));
  const uint32_t opt_count = r.u32("optimizer count");
  for (uint32_t i = 0; i < opt_count; ++i) {
    auto [name, sv] = read_entry(r);
    if (name.rfind("adam.m.", 0) == 0)
      ckpt.opt.m[name.substr(7)] = std::move(sv.second);
    else if (name.rfind("adam.v.", 0) == 0)
      ckpt.opt.v[name.substr(7)] = std::move(sv.second);
    else
      throw ValidationError("checkpoint: unexpected optimizer entry " + name);
  }
  ckpt.opt.step = r.u64("step");
  ckpt.rng_state = r.u64("rng state");
  ckpt.rng_has_cache = r.bytes(1, "rng cache flag")[0] != 0;
  ckpt.rng_cache = r.f64("rng cache");
  const std::string sha = r.bytes(32, "config hash");
  static const char* hex = "0123456789abcdef";
  for (unsigned char c : sha) {
    ckpt.config_sha_hex.push_back(hex[c >> 4]);
    ckpt.config_sha_hex.push_back(hex[c & 0xF]);
  }
  if (r.off != s.size()) throw ValidationError("checkpoint: trailing bytes in " + path);
  return ckpt;
}

void apply_checkpoint(const CheckpointData& ckpt, ParamStore& params) {
  for (auto& [name, t] : params.all()) {
    auto it = ckpt.tensors.find(name);
    if (it == ckpt.tensors.end())
      throw ValidationError("checkpoint missing parameter: " + name);
    if (it->second.first != t.shape())
      throw ValidationError("checkpoint shape mismatch for " + name);
    t.mutable_data() = it->second.second;
  }
  for (const auto& [name, sv] : ckpt.tensors)
    if (!params.has(name)) throw ValidationError("checkpoint has unknown parameter: " + name);
}

}  // namespace semlens
