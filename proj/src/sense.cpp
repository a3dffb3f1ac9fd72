#include "pmri/sense.hpp"

#include <cmath>

#include "pmri/fft.hpp"

namespace pmri {

namespace {

void check_shapes(Grid image, const SensitivityMaps& maps, const SamplingMask& mask) {
  require_same_grid(image, maps.grid(), "sensitivity maps");
  require_same_grid(image, mask.grid(), "sampling mask");
}

}  // namespace

CoilImages expand_coils(const ComplexImage& x, const SensitivityMaps& maps) {
  require_same_grid(x.grid(), maps.grid(), "sensitivity maps");
  CoilImages out(maps.coils(), x.height(), x.width());
  const std::size_t n = x.size();
  for (int c = 0; c < maps.coils(); ++c) {
    auto s = maps.coil(c);
    auto dst = out.coil(c);
    for (std::size_t p = 0; p < n; ++p) dst[p] = s[p] * x[p];
  }
  return out;
}

void apply_mask(MultiCoilKSpace& k, const SamplingMask& mask) {
  require_same_grid(k.grid(), mask.grid(), "sampling mask");
  const int w = k.width();
  for (int c = 0; c < k.coils(); ++c) {
    auto plane = k.coil(c);
    for (std::size_t p = 0; p < plane.size(); ++p) {
      if (!mask.columns()[p % w]) plane[p] = Complex{};
    }
  }
}

MultiCoilKSpace forward_op(const ComplexImage& x, const SensitivityMaps& maps, const SamplingMask& mask) {
  check_shapes(x.grid(), maps, mask);
  if (!x.all_finite()) throw NumericDomainError("forward_op: input contains NaN or Inf");
  MultiCoilKSpace k = expand_coils(x, maps);
  const Grid g = x.grid();
#pragma omp parallel for schedule(static)
  for (int c = 0; c < k.coils(); ++c) fft2c_inplace(k.coil(c), g);
  apply_mask(k, mask);
  return k;
}

ComplexImage adjoint_op(const MultiCoilKSpace& y, const SensitivityMaps& maps, const SamplingMask& mask) {
  check_shapes(y.grid(), maps, mask);
  if (y.coils() != maps.coils()) throw DimensionError("adjoint_op: coil count of data and maps differ");
  CoilImages coils = y;
  apply_mask(coils, mask);
  const Grid g = y.grid();
#pragma omp parallel for schedule(static)
  for (int c = 0; c < coils.coils(); ++c) ifft2c_inplace(coils.coil(c), g);
  return sense_combine(coils, maps);
}

ComplexImage sense_combine(const CoilImages& coil_images, const SensitivityMaps& maps) {
  require_same_grid(coil_images.grid(), maps.grid(), "sensitivity maps");
  if (coil_images.coils() != maps.coils()) throw DimensionError("sense_combine: coil count of images and maps differ");
  ComplexImage out(coil_images.height(), coil_images.width());
  const std::size_t n = out.size();
  // Coil-major accumulation keeps the summation order fixed.
  for (int c = 0; c < maps.coils(); ++c) {
    auto s = maps.coil(c);
    auto img = coil_images.coil(c);
    for (std::size_t p = 0; p < n; ++p) out[p] += std::conj(s[p]) * img[p];
  }
  return out;
}

SensitivityMaps normalize_sensitivities(const CoilStack& raw, const BinaryMask& support) {
  require_same_grid(raw.grid(), support.grid(), "sensitivity support");
  CoilStack maps(raw.coils(), raw.height(), raw.width());
  const std::size_t n = raw.grid().pixels();
  for (std::size_t p = 0; p < n; ++p) {
    if (!support[p]) continue;
    double energy = 0.0;
    for (int c = 0; c < raw.coils(); ++c) energy += std::norm(raw.coil(c)[p]);
    if (!(energy > 0.0) || !std::isfinite(energy)) {
      throw DegenerateSupportError("normalize_sensitivities: pixel " + std::to_string(p) +
                                   " inside the support has no coil signal");
    }
    const double inv = 1.0 / std::sqrt(energy);
    for (int c = 0; c < raw.coils(); ++c) maps.coil(c)[p] = raw.coil(c)[p] * inv;
  }
  return SensitivityMaps(std::move(maps), support);
}

SensitivityMaps normalize_sensitivities(const CoilStack& raw) {
  BinaryMask support(raw.height(), raw.width());
  const std::size_t n = raw.grid().pixels();
  for (std::size_t p = 0; p < n; ++p) {
    for (int c = 0; c < raw.coils(); ++c) {
      if (raw.coil(c)[p] != Complex{}) {
        support[p] = 1;
        break;
      }
    }
  }
  return normalize_sensitivities(raw, support);
}

}  // namespace pmri
