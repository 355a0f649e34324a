#include "slidemil/preprocess/image.hpp"

#include <png.h>

#include <cctype>
#include <cstring>
#include <string>

#include "slidemil/common/error.hpp"
#include "slidemil/common/files.hpp"

namespace slidemil::preprocess {

RgbImage::RgbImage(std::size_t width, std::size_t height, Rgb fill)
    : width_(width), height_(height), pixels_(3 * width * height) {
  for (std::size_t i = 0; i < width * height; ++i) {
    pixels_[3 * i] = fill.r;
    pixels_[3 * i + 1] = fill.g;
    pixels_[3 * i + 2] = fill.b;
  }
}

RgbImage downsample(const RgbImage& img, std::size_t factor) {
  if (factor == 0) throw ValidationError("must be >= 1", "downsample");
  if (factor == 1) return img;
  const std::size_t w = (img.width() + factor - 1) / factor;
  const std::size_t h = (img.height() + factor - 1) / factor;
  RgbImage out(w, h);
  for (std::size_t by = 0; by < h; ++by) {
    for (std::size_t bx = 0; bx < w; ++bx) {
      std::uint64_t sr = 0, sg = 0, sb = 0, n = 0;
      const std::size_t y1 = std::min(img.height(), (by + 1) * factor);
      const std::size_t x1 = std::min(img.width(), (bx + 1) * factor);
      for (std::size_t y = by * factor; y < y1; ++y)
        for (std::size_t x = bx * factor; x < x1; ++x) {
          Rgb c = img.at(x, y);
          sr += c.r;
          sg += c.g;
          sb += c.b;
          ++n;
        }
      out.set(bx, by,
              {static_cast<std::uint8_t>((sr + n / 2) / n), static_cast<std::uint8_t>((sg + n / 2) / n),
               static_cast<std::uint8_t>((sb + n / 2) / n)});
    }
  }
  return out;
}

namespace {

std::vector<unsigned char> png_write(const void* data, std::size_t width, std::size_t height, png_uint_32 format) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = format;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, data, 0, nullptr))
    throw Error(std::string("png encode failed: ") + image.message);
  std::vector<unsigned char> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, data, 0, nullptr))
    throw Error(std::string("png encode failed: ") + image.message);
  out.resize(size);
  return out;
}

}  // namespace

std::vector<unsigned char> encode_png(const RgbImage& img) {
  if (img.empty()) throw ValidationError("cannot encode an empty image");
  return png_write(img.bytes().data(), img.width(), img.height(), PNG_FORMAT_RGB);
}

std::vector<unsigned char> encode_png_gray(std::span<const std::uint8_t> gray, std::size_t width, std::size_t height) {
  if (gray.size() != width * height || gray.empty()) throw ValidationError("gray buffer does not match dimensions");
  return png_write(gray.data(), width, height, PNG_FORMAT_GRAY);
}

RgbImage decode_png(std::span<const unsigned char> bytes) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
    throw InputError(std::string("png decode failed: ") + image.message);
  image.format = PNG_FORMAT_RGB;
  RgbImage out(image.width, image.height);
  if (!png_image_finish_read(&image, nullptr, out.bytes().data(), 0, nullptr)) {
    png_image_free(&image);
    throw InputError(std::string("png decode failed: ") + image.message);
  }
  return out;
}

std::vector<unsigned char> encode_ppm(const RgbImage& img) {
  std::string header = "P6\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  std::vector<unsigned char> out(header.begin(), header.end());
  out.insert(out.end(), img.bytes().begin(), img.bytes().end());
  return out;
}

RgbImage decode_ppm(std::span<const unsigned char> bytes) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    for (;;) {
      while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
      if (pos < bytes.size() && bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        continue;
      }
      return;
    }
  };
  auto number = [&]() -> std::size_t {
    skip_space();
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) throw InputError("malformed PPM header");
    std::size_t v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      if (v > (1u << 20)) throw InputError("PPM dimension too large");
    }
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') throw InputError("not a binary PPM (P6)");
  pos = 2;
  const std::size_t w = number(), h = number(), maxval = number();
  if (maxval != 255) throw InputError("only 8-bit PPM is supported");
  if (w == 0 || h == 0) throw InputError("PPM has zero size");
  ++pos;  // single whitespace before raster
  if (bytes.size() < pos + 3 * w * h) throw InputError("PPM raster truncated");
  RgbImage out(w, h);
  std::memcpy(out.bytes().data(), bytes.data() + pos, 3 * w * h);
  return out;
}

RgbImage read_image(const std::filesystem::path& path) {
  auto bytes = read_file_bytes(path);
  if (bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0) return decode_png(bytes);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') return decode_ppm(bytes);
  throw InputError("unrecognized image format: " + path.string());
}

void write_image(const std::filesystem::path& path, const RgbImage& img) {
  write_file_atomic(path, path.extension() == ".ppm" ? encode_ppm(img) : encode_png(img));
}

}  // namespace slidemil::preprocess
