#include "synthvid/image_io.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace semlens::vid {

using num::Tensor;

uint8_t quantize_byte(double v) {
  v = std::min(1.0, std::max(0.0, v));
  return static_cast<uint8_t>(std::floor(v * 255.0 + 0.5));
}

void write_file_atomic(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw RuntimeFailure("cannot open for write: " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw RuntimeFailure("write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw RuntimeFailure("rename failed: " + path);
}

void write_ppm(const Tensor& img, const std::string& path) {
  if (img.rank() != 3 || img.dim(0) != 3)
    throw ValidationError("write_ppm: image must be [3,H,W]");
  const int64_t h = img.dim(1), w = img.dim(2);
  std::ostringstream os;
  os << "P6\n" << w << " " << h << "\n255\n";
  std::string body = os.str();
  body.reserve(body.size() + static_cast<size_t>(3 * h * w));
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x)
      for (int64_t c = 0; c < 3; ++c)
        body.push_back(static_cast<char>(quantize_byte(img.data()[(c * h + y) * w + x])));
  write_file_atomic(path, body);
}

void write_pgm(const Tensor& img, const std::string& path) {
  if (img.rank() != 2) throw ValidationError("write_pgm: image must be [H,W]");
  const int64_t h = img.dim(0), w = img.dim(1);
  std::ostringstream os;
  os << "P5\n" << w << " " << h << "\n255\n";
  std::string body = os.str();
  for (int64_t i = 0; i < h * w; ++i)
    body.push_back(static_cast<char>(quantize_byte(img.data()[static_cast<size_t>(i)])));
  write_file_atomic(path, body);
}

namespace {

std::string read_all(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeFailure("cannot open: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

[[noreturn]] void parse_fail(const std::string& path, size_t off, const std::string& what) {
  throw ValidationError("malformed file " + path + " at byte " + std::to_string(off) + ": " + what);
}

// Reads one whitespace-delimited token, skipping leading whitespace.
std::string next_token(const std::string& s, size_t& off, const std::string& path) {
  while (off < s.size() && std::isspace(static_cast<unsigned char>(s[off]))) ++off;
  const size_t start = off;
  while (off < s.size() && !std::isspace(static_cast<unsigned char>(s[off]))) ++off;
  if (start == off) parse_fail(path, off, "unexpected end of header");
  return s.substr(start, off - start);
}

}  // namespace

Tensor read_ppm(const std::string& path) {
  const std::string s = read_all(path);
  size_t off = 0;
  if (next_token(s, off, path) != "P6") parse_fail(path, 0, "not a P6 PPM");
  const int64_t w = std::stoll(next_token(s, off, path));
  const int64_t h = std::stoll(next_token(s, off, path));
  const int64_t maxval = std::stoll(next_token(s, off, path));
  if (w <= 0 || h <= 0) parse_fail(path, off, "bad dimensions");
  if (maxval != 255) parse_fail(path, off, "maxval must be 255");
  ++off;  // single whitespace after maxval
  if (s.size() - off < static_cast<size_t>(3 * h * w))
    parse_fail(path, s.size(), "truncated pixel data");
  std::vector<double> data(static_cast<size_t>(3 * h * w));
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x)
      for (int64_t c = 0; c < 3; ++c)
        data[static_cast<size_t>((c * h + y) * w + x)] =
            static_cast<double>(static_cast<uint8_t>(s[off++])) / 255.0;
  return Tensor::from_data({3, h, w}, std::move(data));
}

void write_label_map(const std::vector<uint16_t>& labels, int64_t h, int64_t w,
                     const std::string& path) {
  if (static_cast<int64_t>(labels.size()) != h * w)
    throw ValidationError("write_label_map: size mismatch");
  std::string body;
  body.reserve(16 + labels.size() * 2);
  body.append("SLLM");
  auto put_u32 = [&body](uint32_t v) {
    for (int i = 0; i < 4; ++i) body.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  };
  put_u32(1);  // version
  put_u32(static_cast<uint32_t>(h));
  put_u32(static_cast<uint32_t>(w));
  for (uint16_t v : labels) {
    body.push_back(static_cast<char>(v & 0xFF));
    body.push_back(static_cast<char>((v >> 8) & 0xFF));
  }
  write_file_atomic(path, body);
}

std::vector<uint16_t> read_label_map(const std::string& path, int64_t* h, int64_t* w) {
  const std::string s = read_all(path);
  if (s.size() < 16 || s.compare(0, 4, "SLLM") != 0) parse_fail(path, 0, "bad magic");
  auto get_u32 = [&s](size_t off) {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(s[off + i])) << (8 * i);
    return v;
  };
  if (get_u32(4) != 1) parse_fail(path, 4, "unsupported version");
  const int64_t hh = get_u32(8), ww = get_u32(12);
  if (s.size() != 16 + static_cast<size_t>(hh * ww) * 2) parse_fail(path, 16, "truncated grid");
  std::vector<uint16_t> labels(static_cast<size_t>(hh * ww));
  for (size_t i = 0; i < labels.size(); ++i)
    labels[i] = static_cast<uint16_t>(static_cast<uint8_t>(s[16 + 2 * i]) |
                                      (static_cast<uint8_t>(s[17 + 2 * i]) << 8));
  *h = hh;
  *w = ww;
  return labels;
}

}  // namespace semlens::vid
