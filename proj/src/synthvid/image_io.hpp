#ifndef SEMLENS_SYNTHVID_IMAGE_IO_HPP
#define SEMLENS_SYNTHVID_IMAGE_IO_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "numcore/tensor.hpp"

namespace semlens::vid {

// Binary PPM (P6, maxval 255). Values are clamped to [0,1] and quantized
// with round-half-up on write.
void write_ppm(const num::Tensor& img, const std::string& path);
num::Tensor read_ppm(const std::string& path);

// Binary PGM (P5) for single-channel heat maps, same quantization.
void write_pgm(const num::Tensor& img, const std::string& path);

// Label map container: magic "SLLM", version u32, H u32, W u32, then
// row-major little-endian uint16 ids.
void write_label_map(const std::vector<uint16_t>& labels, int64_t h, int64_t w,
                     const std::string& path);
std::vector<uint16_t> read_label_map(const std::string& path, int64_t* h, int64_t* w);

uint8_t quantize_byte(double v);  // clamp + round-half-up

// Atomic write helper: write to path.tmp then rename.
void write_file_atomic(const std::string& path, const std::string& bytes);

}  // namespace semlens::vid

#endif
