#pragma once

#include <cstdint>

#include "pmri/types.hpp"

namespace pmri {

struct PhantomSlice {
  ComplexImage image;
  BinaryMask foreground;
};

/// Overlapping ellipses with distinct intensities, a few small texture
/// dots and a smooth phase ramp. Magnitude in [0, 1], zero off foreground.
PhantomSlice generate_phantom(int height, int width, std::uint64_t seed);

/// Smooth complex Gaussian lobes centred at distinct points on a ring around
/// the grid, normalized on `support`. Deterministic for a given geometry.
SensitivityMaps generate_sensitivities(int coils, int height, int width, const BinaryMask& support);

struct MaskSpec {
  double acceleration = 4.0;
  double center_fraction = 0.08;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Number of fully sampled central columns for a given width.
int center_columns(int width, double center_fraction);

/// Per-column sampling probabilities (1 on the centre block, otherwise
/// (1 - |d|/(W/2))^p with p solved so the expected count is W/acceleration).
std::vector<double> vd_column_probabilities(int width, const MaskSpec& spec);

/// Variable-density Cartesian column mask. acceleration == 1 gives a full mask.
SamplingMask generate_vd_mask(int height, int width, const MaskSpec& spec);

/// y = M . (F(S_c x) + eps), eps complex Gaussian with std noise_sigma per
/// real component. noise_sigma == 0 returns forward_op(x, S, M) exactly.
MultiCoilKSpace simulate_acquisition(const PhantomSlice& phantom, const SensitivityMaps& maps,
                                     const SamplingMask& mask, double noise_sigma, std::uint64_t seed);

/// Square dilation of a binary mask by `radius` pixels.
BinaryMask dilate(const BinaryMask& mask, int radius);

/// splitmix64-style mixing for deriving per-item seeds.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

}  // namespace pmri
