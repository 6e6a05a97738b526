#include "refocus/stack/codec.hpp"

#include <algorithm>
#include <charconv>
#include <stdexcept>
#include <string>

namespace refocus::stack {

LatentCodec LatentCodec::avgpool(int k) {
  if (k < 1) throw std::invalid_argument("LatentCodec: pool factor must be >= 1");
  return LatentCodec(CodecKind::kAvgPool, k);
}

LatentCodec LatentCodec::parse(std::string_view spec) {
  if (spec == "identity") return identity();
  constexpr std::string_view prefix = "avgpool:";
  if (spec.substr(0, prefix.size()) == prefix) {
    int k = 0;
    const auto rest = spec.substr(prefix.size());
    const auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), k);
    if (ec == std::errc() && ptr == rest.data() + rest.size()) return avgpool(k);
  }
  throw std::invalid_argument("unknown codec: " + std::string(spec));
}

std::pair<int, int> LatentCodec::latent_dims(int width, int height) const {
  const int k = pool_factor_;
  return {(width + k - 1) / k, (height + k - 1) / k};
}

namespace {

template <typename Sample>
Tensor block_average(int channels, int width, int height, int k, Sample sample) {
  const int lw = (width + k - 1) / k;
  const int lh = (height + k - 1) / k;
  Tensor z(channels, lh, lw);
  for (int c = 0; c < channels; ++c) {
    for (int by = 0; by < lh; ++by) {
      for (int bx = 0; bx < lw; ++bx) {
        double acc = 0.0;
        int n = 0;
        for (int y = by * k; y < std::min((by + 1) * k, height); ++y) {
          for (int x = bx * k; x < std::min((bx + 1) * k, width); ++x) {
            acc += sample(x, y, c);
            ++n;
          }
        }
        z.at(c, by, bx) = acc / n;
      }
    }
  }
  return z;
}

}  // namespace

Tensor LatentCodec::encode(const imaging::RasterImage& img) const {
  if (img.empty()) throw std::invalid_argument("LatentCodec::encode: empty image");
  if (kind_ == CodecKind::kIdentity) {
    Tensor z(img.channels(), img.height(), img.width());
    for (int c = 0; c < img.channels(); ++c)
      for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) z.at(c, y, x) = img.at(x, y, c);
    return z;
  }
  return block_average(img.channels(), img.width(), img.height(), pool_factor_,
                       [&](int x, int y, int c) { return img.at(x, y, c); });
}

imaging::RasterImage LatentCodec::decode(const Tensor& z, int width, int height) const {
  const auto [lw, lh] = latent_dims(width, height);
  if (z.width != lw || z.height != lh) {
    throw std::invalid_argument("LatentCodec::decode: latent shape does not match target size");
  }
  imaging::RasterImage img(width, height, z.channels);
  const int k = pool_factor_;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < z.channels; ++c) img.at(x, y, c) = z.at(c, y / k, x / k);
  return img;
}

Tensor LatentCodec::resample(const imaging::DepthMap& field) const {
  if (field.empty()) throw std::invalid_argument("LatentCodec::resample: empty field");
  return block_average(1, field.width(), field.height(), pool_factor_,
                       [&](int x, int y, int) { return field.at(x, y); });
}

}  // namespace refocus::stack
