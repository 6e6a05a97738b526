#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include "refocus/imaging/raster.hpp"

namespace refocus::imaging {

// Raised for unreadable or malformed image files. No partial image is ever
// returned alongside it.
class DecodeError : public std::runtime_error {
 public:
  DecodeError(std::string path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

// Images are stored with 8 bits per channel: binary Netpbm (.ppm/.pgm/.pnm)
// or PNG (.png), chosen by extension. Depth maps are 16-bit grayscale
// (.pgm or .png) with value/65535 scaling.
RasterImage read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const RasterImage& img);

DepthMap read_depth(const std::filesystem::path& path);
void write_depth(const std::filesystem::path& path, const DepthMap& depth);

// In-memory codecs. The format is sniffed from the magic bytes; `name` is
// only used in error messages.
RasterImage decode_image(std::string_view bytes, const std::string& name);
DepthMap decode_depth(std::string_view bytes, const std::string& name);
std::string encode_png(const RasterImage& img);
std::string encode_depth_png(const DepthMap& depth);

// Quantize to 8 bits and back, the exact values a write/read round trip
// produces.
RasterImage quantize8(const RasterImage& img);
// Depth map shown as an 8-bit grayscale image.
RasterImage depth_to_image(const DepthMap& depth);

}  // namespace refocus::imaging
