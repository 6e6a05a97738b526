#include "refocus/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "refocus/imaging/laplacian.hpp"

namespace refocus::metrics {
namespace {

void require_same_shape(const RasterImage& a, const RasterImage& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("metrics: image shapes differ");
  if (a.empty()) throw std::invalid_argument("metrics: empty image");
}

void require_distinct_levels(std::span<const LevelImage> seq) {
  std::set<double> levels;
  for (const auto& li : seq) levels.insert(li.bokeh_level);
  if (levels.size() < 3) throw std::invalid_argument("lvcorr: need >= 3 distinct bokeh levels");
}

}  // namespace

double mae(const RasterImage& a, const RasterImage& b) {
  require_same_shape(a, b);
  double acc = 0.0;
  const auto da = a.data();
  const auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) acc += std::abs(da[i] - db[i]);
  return acc / static_cast<double>(da.size());
}

double mse(const RasterImage& a, const RasterImage& b) {
  require_same_shape(a, b);
  double acc = 0.0;
  const auto da = a.data();
  const auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) {
    const double d = da[i] - db[i];
    acc += d * d;
  }
  return acc / static_cast<double>(da.size());
}

double psnr(const RasterImage& a, const RasterImage& b, double peak) {
  if (!(peak > 0.0)) throw std::invalid_argument("psnr: peak must be positive");
  const double m = mse(a, b);
  if (m == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / m));
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
  if (x.size() < 2) throw std::invalid_argument("pearson: need at least 2 points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw UndefinedCorrelation("pearson: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double lvcorr(std::span<const LevelImage> generated) {
  require_distinct_levels(generated);
  std::vector<double> levels, neg_lv;
  for (const auto& li : generated) {
    levels.push_back(li.bokeh_level);
    neg_lv.push_back(-imaging::laplacian_variance(li.image));
  }
  return pearson(levels, neg_lv);
}

double lvcorr_against_reference(std::span<const LevelImage> generated,
                                std::span<const LevelImage> reference) {
  if (generated.size() != reference.size()) {
    throw std::invalid_argument("lvcorr_against_reference: length mismatch");
  }
  require_distinct_levels(generated);
  std::vector<double> gen, ref;
  for (std::size_t i = 0; i < generated.size(); ++i) {
    if (generated[i].bokeh_level != reference[i].bokeh_level) {
      throw std::invalid_argument("lvcorr_against_reference: level sequences differ");
    }
    gen.push_back(imaging::laplacian_variance(generated[i].image));
    ref.push_back(imaging::laplacian_variance(reference[i].image));
  }
  return pearson(gen, ref);
}

}  // namespace refocus::metrics
