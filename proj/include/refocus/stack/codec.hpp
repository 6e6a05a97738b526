#pragma once

#include <string_view>
#include <utility>

#include "refocus/imaging/raster.hpp"
#include "refocus/tensor.hpp"

namespace refocus::stack {

enum class CodecKind { kIdentity, kAvgPool };

// Stand-in for a learned image autoencoder. The identity codec maps an image
// to a (C, H, W) tensor unchanged; avgpool averages k x k blocks on encode
// and repeats each cell over its block on decode. Partial edge blocks average
// only the pixels they cover.
class LatentCodec {
 public:
  LatentCodec() = default;
  static LatentCodec identity() { return LatentCodec(CodecKind::kIdentity, 1); }
  static LatentCodec avgpool(int k);
  static LatentCodec parse(std::string_view spec);  // "identity" or "avgpool:k"

  CodecKind kind() const { return kind_; }
  int pool_factor() const { return pool_factor_; }

  // Latent grid (width, height) for an image of the given size.
  std::pair<int, int> latent_dims(int width, int height) const;

  Tensor encode(const imaging::RasterImage& img) const;
  // Decodes to a width x height image. Values are not clamped.
  imaging::RasterImage decode(const Tensor& z, int width, int height) const;

  // Resample a single-channel field (e.g. depth) onto the latent grid with
  // the same block averaging as encode.
  Tensor resample(const imaging::DepthMap& field) const;

 private:
  LatentCodec(CodecKind kind, int k) : kind_(kind), pool_factor_(k) {}

  CodecKind kind_ = CodecKind::kIdentity;
  int pool_factor_ = 1;
};

}  // namespace refocus::stack
