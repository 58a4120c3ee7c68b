#include "mdt/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>

#include <png.h>

#include "mdt/errors.hpp"

namespace mdt {
namespace {

struct ReadCursor {
  const unsigned char* data;
  size_t len;
  size_t pos;
};

void mem_read(png_structp png, png_bytep out, png_size_t n) {
  auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cur->pos + n > cur->len) png_error(png, "unexpected end of PNG data");
  std::memcpy(out, cur->data + cur->pos, n);
  cur->pos += n;
}

void mem_write(png_structp png, png_bytep data, png_size_t n) {
  auto* out = static_cast<std::vector<unsigned char>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + n);
}

void mem_flush(png_structp) {}

}  // namespace

RawImage decode_png(const unsigned char* bytes, size_t len) {
  if (len < 8 || png_sig_cmp(bytes, 0, 8) != 0) throw DataError("not a PNG image");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  RawImage img;
  std::vector<png_bytep> rows;
  ReadCursor cur{bytes, len, 0};
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("PNG decode failed");
  }
  png_set_read_fn(png, &cur, mem_read);
  png_read_info(png, info);

  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  png_read_update_info(png, info);

  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  img.channels = static_cast<int>(png_get_channels(png, info));
  img.pixels.resize(static_cast<size_t>(img.width) * img.height * img.channels);
  rows.resize(static_cast<size_t>(img.height));
  for (int y = 0; y < img.height; ++y)
    rows[static_cast<size_t>(y)] =
        img.pixels.data() + static_cast<size_t>(y) * img.width * img.channels;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

std::vector<unsigned char> encode_png(const RawImage& img, const PngText& text) {
  if (img.width <= 0 || img.height <= 0 || img.channels < 1 || img.channels > 4)
    throw ConfigError("invalid image for PNG encode");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  std::vector<unsigned char> out;
  std::vector<png_bytep> rows(static_cast<size_t>(img.height));
  std::vector<png_text> chunks(text.size());
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("PNG encode failed");
  }
  png_set_write_fn(png, &out, mem_write, mem_flush);
  // Fixed settings keep re-runs byte-identical.
  png_set_compression_level(png, 6);

  static const int color[5] = {0, PNG_COLOR_TYPE_GRAY, PNG_COLOR_TYPE_GRAY_ALPHA,
                               PNG_COLOR_TYPE_RGB, PNG_COLOR_TYPE_RGB_ALPHA};
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
               static_cast<png_uint_32>(img.height), 8, color[img.channels],
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  for (size_t i = 0; i < text.size(); ++i) {
    chunks[i] = png_text{};
    chunks[i].compression = PNG_TEXT_COMPRESSION_NONE;
    chunks[i].key = const_cast<char*>(text[i].first.c_str());
    chunks[i].text = const_cast<char*>(text[i].second.c_str());
    chunks[i].text_length = text[i].second.size();
  }
  if (!chunks.empty()) png_set_text(png, info, chunks.data(), static_cast<int>(chunks.size()));

  for (int y = 0; y < img.height; ++y)
    rows[static_cast<size_t>(y)] = const_cast<png_bytep>(
        img.pixels.data() + static_cast<size_t>(y) * img.width * img.channels);
  png_set_rows(png, info, rows.data());
  png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

RawImage read_png_file(const std::string& path) {
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> f(std::fopen(path.c_str(), "rb"), &std::fclose);
  if (!f) throw IoError("cannot open " + path);
  std::fseek(f.get(), 0, SEEK_END);
  const long sz = std::ftell(f.get());
  std::fseek(f.get(), 0, SEEK_SET);
  if (sz <= 0) throw DataError("empty file " + path);
  std::vector<unsigned char> bytes(static_cast<size_t>(sz));
  if (std::fread(bytes.data(), 1, bytes.size(), f.get()) != bytes.size())
    throw IoError("short read on " + path);
  return decode_png(bytes.data(), bytes.size());
}

void write_png_file(const std::string& path, const RawImage& img, const PngText& text) {
  const auto bytes = encode_png(img, text);
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> f(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!f) throw IoError("cannot create " + path);
  if (std::fwrite(bytes.data(), 1, bytes.size(), f.get()) != bytes.size())
    throw IoError("short write on " + path);
}

PngText read_png_text(const std::string& path) {
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> f(std::fopen(path.c_str(), "rb"), &std::fclose);
  if (!f) throw IoError("cannot open " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (!png || !info) throw IoError("libpng init failed");
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("PNG read failed for " + path);
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  png_textp chunks = nullptr;
  int n = 0;
  PngText out;
  if (png_get_text(png, info, &chunks, &n) > 0)
    for (int i = 0; i < n; ++i) out.emplace_back(chunks[i].key, chunks[i].text);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

Tensor resize_bilinear(const Tensor& img, int out_h, int out_w) {
  const int c = img.dim(0), h = img.dim(1), w = img.dim(2);
  if (h == out_h && w == out_w) return img;
  Tensor out({c, out_h, out_w});
  const double sy = static_cast<double>(h) / out_h;
  const double sx = static_cast<double>(w) / out_w;
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < out_h; ++y) {
      const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
      const int y0 = static_cast<int>(fy);
      const int y1 = std::min(y0 + 1, h - 1);
      const double wy = fy - y0;
      for (int x = 0; x < out_w; ++x) {
        const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
        const int x0 = static_cast<int>(fx);
        const int x1 = std::min(x0 + 1, w - 1);
        const double wx = fx - x0;
        const double v = (1 - wy) * ((1 - wx) * img.at(ch, y0, x0) + wx * img.at(ch, y0, x1)) +
                         wy * ((1 - wx) * img.at(ch, y1, x0) + wx * img.at(ch, y1, x1));
        out.at(ch, y, x) = v;
      }
    }
  }
  return out;
}

double normalize_pixel(unsigned char p) { return p / 127.5 - 1.0; }

unsigned char denormalize_pixel(double v) {
  const double x = std::round((v + 1.0) * 127.5);
  return static_cast<unsigned char>(std::clamp(x, 0.0, 255.0));
}

Tensor to_image_tensor(const RawImage& raw, int image_size) {
  if (raw.width <= 0 || raw.height <= 0) throw DataError("empty image");
  Tensor full({3, raw.height, raw.width});
  const int ch = raw.channels;
  for (int y = 0; y < raw.height; ++y) {
    for (int x = 0; x < raw.width; ++x) {
      const unsigned char* px =
          raw.pixels.data() + (static_cast<size_t>(y) * raw.width + x) * ch;
      double r, g, b;
      if (ch >= 3) {
        r = normalize_pixel(px[0]);
        g = normalize_pixel(px[1]);
        b = normalize_pixel(px[2]);
      } else {  // grayscale (with or without alpha): replicate
        r = g = b = normalize_pixel(px[0]);
      }
      full.at(0, y, x) = r;
      full.at(1, y, x) = g;
      full.at(2, y, x) = b;
    }
  }
  return resize_bilinear(full, image_size, image_size);
}

Tensor preprocess(const unsigned char* bytes, size_t len, int image_size) {
  return to_image_tensor(decode_png(bytes, len), image_size);
}

RawImage to_raw_image(const Tensor& img) {
  if (img.rank() != 3) throw DataError("to_raw_image: expected (C,H,W)");
  RawImage raw;
  raw.height = img.dim(1);
  raw.width = img.dim(2);
  raw.channels = img.dim(0);
  raw.pixels.resize(static_cast<size_t>(raw.width) * raw.height * raw.channels);
  for (int y = 0; y < raw.height; ++y)
    for (int x = 0; x < raw.width; ++x)
      for (int c = 0; c < raw.channels; ++c)
        raw.pixels[(static_cast<size_t>(y) * raw.width + x) * raw.channels + c] =
            denormalize_pixel(img.at(c, y, x));
  return raw;
}

}  // namespace mdt
