#include "mdf/pipeline.hpp"

#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <vector>

namespace mdf {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw ImageIoError("cannot open '" + path.string() + "'");
  return f;
}

[[noreturn]] void png_error_handler(png_structp png, png_const_charp msg) {
  auto* text = static_cast<std::string*>(png_get_error_ptr(png));
  if (text) *text = msg;
  std::longjmp(png_jmpbuf(png), 1);
}

void png_warning_handler(png_structp, png_const_charp) {}

Image read_png(const std::filesystem::path& path) {
  FilePtr file = open_file(path, "rb");
  std::string message;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, png_error_handler, png_warning_handler);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageIoError("libpng initialisation failed");
  }
  // Everything that needs cleanup after a longjmp lives outside this frame.
  std::vector<png_byte> pixels;
  std::vector<png_bytep> rows;
  png_uint_32 width = 0, height = 0;
  int bit_depth = 0, channels = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw CorruptFileError("corrupt PNG '" + path.string() + "': " + message);
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  const int color_type = png_get_color_type(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);
  width = png_get_image_width(png, info);
  height = png_get_image_height(png, info);
  bit_depth = png_get_bit_depth(png, info);
  channels = png_get_channels(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  pixels.resize(stride * height);
  rows.resize(height);
  for (png_uint_32 i = 0; i < height; ++i) rows[i] = pixels.data() + i * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const int colour = (channels == 2 || channels == 4) ? channels - 1 : channels;
  const double scale = bit_depth == 16 ? 1.0 / 65535.0 : 1.0 / 255.0;
  const std::size_t sample_bytes = bit_depth == 16 ? 2 : 1;
  Image img(height, width);
  for (png_uint_32 i = 0; i < height; ++i)
    for (png_uint_32 j = 0; j < width; ++j) {
      double acc = 0.0;
      for (int c = 0; c < colour; ++c) {
        const png_byte* s = rows[i] + (std::size_t(j) * channels + c) * sample_bytes;
        acc += sample_bytes == 2 ? double((s[0] << 8) | s[1]) : double(s[0]);
      }
      img(i, j) = acc * scale / colour;
    }
  return img;
}

Image read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageIoError("cannot open '" + path.string() + "'");
  std::string magic;
  in >> magic;
  auto next_int = [&]() {
    in >> std::ws;
    while (in.peek() == '#') {
      std::string skip;
      std::getline(in, skip);
      in >> std::ws;
    }
    long v = -1;
    if (!(in >> v)) throw CorruptFileError("corrupt PGM header in '" + path.string() + "'");
    return v;
  };
  const long w = next_int(), h = next_int(), maxval = next_int();
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) throw CorruptFileError("bad PGM header in '" + path.string() + "'");
  in.get();
  const std::size_t bytes = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> data(static_cast<std::size_t>(w * h) * bytes);
  if (!in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size())))
    throw CorruptFileError("truncated PGM data in '" + path.string() + "'");
  Image img(h, w);
  for (long k = 0; k < w * h; ++k) {
    const auto idx = static_cast<std::size_t>(k) * bytes;
    const double v = bytes == 2 ? double((data[idx] << 8) | data[idx + 1]) : double(data[idx]);
    img.data()[k] = v / double(maxval);
  }
  return img;
}

}  // namespace

Image load_image(const std::filesystem::path& path) {
  unsigned char sig[8] = {0};
  {
    FilePtr f = open_file(path, "rb");
    const std::size_t got = std::fread(sig, 1, 8, f.get());
    if (got >= 8 && png_sig_cmp(sig, 0, 8) == 0) return read_png(path);
    if (got >= 2 && sig[0] == 'P' && sig[1] == '5') return read_pgm(path);
  }
  throw UnsupportedFormatError("unsupported image format: '" + path.string() + "' (expected PNG or binary PGM)");
}

void save_image(const std::filesystem::path& path, const Image& img) {
  if (img.size() == 0) throw ImageIoError("cannot save an empty image");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  FilePtr file = open_file(path, "wb");
  std::string message;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, png_error_handler, png_warning_handler);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw ImageIoError("libpng initialisation failed");
  }
  std::vector<png_byte> pixels(static_cast<std::size_t>(img.size()) * 2);
  for (Eigen::Index k = 0; k < img.size(); ++k) {
    const double v = std::clamp(img.data()[k], 0.0, 1.0);
    const auto q = static_cast<unsigned>(std::lround(v * 65535.0));
    pixels[2 * k] = static_cast<png_byte>(q >> 8);
    pixels[2 * k + 1] = static_cast<png_byte>(q & 0xff);
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(img.rows()));
  for (Eigen::Index i = 0; i < img.rows(); ++i) rows[i] = pixels.data() + i * img.cols() * 2;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw ImageIoError("writing '" + path.string() + "' failed: " + message);
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.cols()), static_cast<png_uint_32>(img.rows()), 16,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace mdf
