#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mdt/tensor.hpp"

namespace mdt {

// Decoded 8-bit image, row-major interleaved.
struct RawImage {
  int width = 0;
  int height = 0;
  int channels = 0;  // 1..4
  std::vector<unsigned char> pixels;
};

using PngText = std::vector<std::pair<std::string, std::string>>;

RawImage decode_png(const unsigned char* bytes, size_t len);
std::vector<unsigned char> encode_png(const RawImage& img, const PngText& text = {});
RawImage read_png_file(const std::string& path);
void write_png_file(const std::string& path, const RawImage& img, const PngText& text = {});
// Reads tEXt chunks of a PNG file (key -> value).
PngText read_png_text(const std::string& path);

// Bilinear resize of one channel-major tensor to a square size.
Tensor resize_bilinear(const Tensor& img, int out_h, int out_w);

// RawImage -> (3,S,S) tensor in [-1,1]: grayscale replicated, alpha dropped,
// bilinear resize, then pixel/127.5 - 1.
Tensor to_image_tensor(const RawImage& raw, int image_size);
// Decode + normalize in one step.
Tensor preprocess(const unsigned char* bytes, size_t len, int image_size);
// Inverse of the normalization: (v+1)*127.5 rounded and clamped to [0,255].
RawImage to_raw_image(const Tensor& img);

double normalize_pixel(unsigned char p);
unsigned char denormalize_pixel(double v);

}  // namespace mdt
