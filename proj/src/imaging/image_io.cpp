#include "refocus/imaging/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

namespace refocus::imaging {
namespace {

enum class FileKind { kNetpbm, kPng };

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

FileKind kind_for_write(const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  if (ext == ".png") return FileKind::kPng;
  if (ext == ".ppm" || ext == ".pgm" || ext == ".pnm") return FileKind::kNetpbm;
  throw std::invalid_argument("unsupported image extension: " + path.string());
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DecodeError(path.string(), "cannot open file");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void spill(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

bool is_png(std::string_view bytes) {
  static constexpr unsigned char kMagic[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  return bytes.size() >= 8 && std::memcmp(bytes.data(), kMagic, 8) == 0;
}

std::uint8_t to_u8(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

std::uint16_t to_u16(double v) {
  return static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * 65535.0));
}

// ---- Netpbm ----

struct Netpbm {
  int width = 0;
  int height = 0;
  int channels = 0;
  int maxval = 0;
  std::vector<double> samples;  // normalized by maxval
};

Netpbm parse_netpbm(std::string_view bytes, const std::string& name) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw DecodeError(name, "not a binary PGM/PPM file");
  }
  Netpbm out;
  out.channels = bytes[1] == '6' ? 3 : 1;
  std::size_t pos = 2;
  auto read_int = [&]() -> int {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    if (pos >= bytes.size() || !std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      throw DecodeError(name, "malformed header");
    }
    long value = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      value = value * 10 + (bytes[pos] - '0');
      if (value > (1L << 24)) throw DecodeError(name, "header value out of range");
      ++pos;
    }
    return static_cast<int>(value);
  };
  out.width = read_int();
  out.height = read_int();
  out.maxval = read_int();
  if (out.width < 1 || out.height < 1) throw DecodeError(name, "invalid dimensions");
  if (out.maxval < 1 || out.maxval > 65535) throw DecodeError(name, "invalid maxval");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw DecodeError(name, "malformed header");
  }
  ++pos;

  const std::size_t bytes_per_sample = out.maxval > 255 ? 2 : 1;
  const std::size_t count = static_cast<std::size_t>(out.width) *
                            static_cast<std::size_t>(out.height) *
                            static_cast<std::size_t>(out.channels);
  if (bytes.size() - pos < count * bytes_per_sample) {
    throw DecodeError(name, "truncated pixel data");
  }
  out.samples.resize(count);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
  const double maxval = out.maxval;
  for (std::size_t i = 0; i < count; ++i) {
    const unsigned v = bytes_per_sample == 2 ? (p[2 * i] << 8) | p[2 * i + 1] : p[i];
    if (v > static_cast<unsigned>(out.maxval)) throw DecodeError(name, "sample exceeds maxval");
    out.samples[i] = v / maxval;
  }
  return out;
}

std::string netpbm_header(char kind, int w, int h, int maxval) {
  return std::string("P") + kind + "\n" + std::to_string(w) + " " + std::to_string(h) +
         "\n" + std::to_string(maxval) + "\n";
}

// ---- PNG (libpng simplified API) ----

class PngReader {
 public:
  PngReader(std::string_view bytes, const std::string& name) : name_(name) {
    std::memset(&image_, 0, sizeof(image_));
    image_.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image_, bytes.data(), bytes.size())) {
      fail();
    }
  }
  ~PngReader() { png_image_free(&image_); }
  PngReader(const PngReader&) = delete;
  PngReader& operator=(const PngReader&) = delete;

  int width() const { return static_cast<int>(image_.width); }
  int height() const { return static_cast<int>(image_.height); }
  bool color() const { return (image_.format & PNG_FORMAT_FLAG_COLOR) != 0; }
  bool sixteen_bit() const { return (image_.format & PNG_FORMAT_FLAG_LINEAR) != 0; }

  template <typename T>
  std::vector<T> finish(png_uint_32 format) {
    image_.format = format;
    std::vector<T> buffer(PNG_IMAGE_SIZE(image_) / sizeof(T));
    if (!png_image_finish_read(&image_, nullptr, buffer.data(), 0, nullptr)) fail();
    return buffer;
  }

 private:
  [[noreturn]] void fail() {
    const std::string msg = image_.message;
    throw DecodeError(name_, "PNG decode failed: " + msg);
  }

  std::string name_;
  png_image image_;
};

template <typename T>
std::string png_write(int w, int h, png_uint_32 format, const std::vector<T>& pixels) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(w);
  image.height = static_cast<png_uint_32>(h);
  image.format = format;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, pixels.data(), 0, nullptr)) {
    throw std::runtime_error(std::string("PNG encode failed: ") + image.message);
  }
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels.data(), 0, nullptr)) {
    throw std::runtime_error(std::string("PNG encode failed: ") + image.message);
  }
  out.resize(size);
  return out;
}

}  // namespace

RasterImage decode_image(std::string_view bytes, const std::string& name) {
  if (is_png(bytes)) {
    PngReader reader(bytes, name);
    const int ch = reader.color() ? 3 : 1;
    const auto pixels =
        reader.finish<std::uint8_t>(ch == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY);
    RasterImage img(reader.width(), reader.height(), ch);
    auto dst = img.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = pixels[i] / 255.0;
    return img;
  }
  Netpbm pbm = parse_netpbm(bytes, name);
  RasterImage img(pbm.width, pbm.height, pbm.channels);
  std::copy(pbm.samples.begin(), pbm.samples.end(), img.data().begin());
  return img;
}

DepthMap decode_depth(std::string_view bytes, const std::string& name) {
  if (is_png(bytes)) {
    PngReader reader(bytes, name);
    DepthMap depth(reader.width(), reader.height());
    auto dst = depth.data();
    if (reader.sixteen_bit()) {
      const auto pixels = reader.finish<std::uint16_t>(PNG_FORMAT_LINEAR_Y);
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = pixels[i] / 65535.0;
    } else {
      const auto pixels = reader.finish<std::uint8_t>(PNG_FORMAT_GRAY);
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = pixels[i] / 255.0;
    }
    return depth;
  }
  Netpbm pbm = parse_netpbm(bytes, name);
  if (pbm.channels != 1) throw DecodeError(name, "depth maps must be grayscale");
  DepthMap depth(pbm.width, pbm.height);
  std::copy(pbm.samples.begin(), pbm.samples.end(), depth.data().begin());
  return depth;
}

std::string encode_png(const RasterImage& img) {
  if (img.empty()) throw std::invalid_argument("encode_png: empty image");
  std::vector<std::uint8_t> pixels(img.data().size());
  std::transform(img.data().begin(), img.data().end(), pixels.begin(), to_u8);
  return png_write(img.width(), img.height(),
                   img.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY, pixels);
}

std::string encode_depth_png(const DepthMap& depth) {
  if (depth.empty()) throw std::invalid_argument("encode_depth_png: empty map");
  std::vector<std::uint16_t> pixels(depth.data().size());
  std::transform(depth.data().begin(), depth.data().end(), pixels.begin(), to_u16);
  return png_write(depth.width(), depth.height(), PNG_FORMAT_LINEAR_Y, pixels);
}

RasterImage read_image(const std::filesystem::path& path) {
  return decode_image(slurp(path), path.string());
}

DepthMap read_depth(const std::filesystem::path& path) {
  return decode_depth(slurp(path), path.string());
}

void write_image(const std::filesystem::path& path, const RasterImage& img) {
  if (img.empty()) throw std::invalid_argument("write_image: empty image");
  if (kind_for_write(path) == FileKind::kPng) {
    spill(path, encode_png(img));
    return;
  }
  const std::string ext = lower_extension(path);
  bool rgb = img.channels() == 3;
  if (ext == ".pgm" && rgb) {
    throw std::invalid_argument("write_image: .pgm requires a single-channel image");
  }
  if (ext == ".ppm") rgb = true;
  std::string bytes = netpbm_header(rgb ? '6' : '5', img.width(), img.height(), 255);
  const std::size_t header = bytes.size();
  bytes.resize(header + img.pixel_count() * (rgb ? 3 : 1));
  auto* out = reinterpret_cast<std::uint8_t*>(bytes.data() + header);
  auto src = img.data();
  if (rgb && img.channels() == 1) {
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
      out[3 * i] = out[3 * i + 1] = out[3 * i + 2] = to_u8(src[i]);
    }
  } else {
    std::transform(src.begin(), src.end(), out, to_u8);
  }
  spill(path, bytes);
}

void write_depth(const std::filesystem::path& path, const DepthMap& depth) {
  if (depth.empty()) throw std::invalid_argument("write_depth: empty map");
  if (kind_for_write(path) == FileKind::kPng) {
    spill(path, encode_depth_png(depth));
    return;
  }
  std::string bytes = netpbm_header('5', depth.width(), depth.height(), 65535);
  const std::size_t header = bytes.size();
  bytes.resize(header + 2 * depth.pixel_count());
  auto* out = reinterpret_cast<std::uint8_t*>(bytes.data() + header);
  auto src = depth.data();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const std::uint16_t v = to_u16(src[i]);
    out[2 * i] = static_cast<std::uint8_t>(v >> 8);
    out[2 * i + 1] = static_cast<std::uint8_t>(v & 0xff);
  }
  spill(path, bytes);
}

RasterImage quantize8(const RasterImage& img) {
  RasterImage out = img;
  for (double& v : out.data()) v = to_u8(v) / 255.0;
  return out;
}

RasterImage depth_to_image(const DepthMap& depth) {
  RasterImage out(depth.width(), depth.height(), 1);
  std::copy(depth.data().begin(), depth.data().end(), out.data().begin());
  return quantize8(out);
}

}  // namespace refocus::imaging
