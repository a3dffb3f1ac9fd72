#pragma once

#include "pmri/types.hpp"

namespace pmri {

/// y_c = M . F(S_c . x). Unsampled entries are exactly zero.
MultiCoilKSpace forward_op(const ComplexImage& x, const SensitivityMaps& maps, const SamplingMask& mask);

/// sum_c conj(S_c) . F^-1(M . y_c): the zero-filled SENSE-combined image.
ComplexImage adjoint_op(const MultiCoilKSpace& y, const SensitivityMaps& maps, const SamplingMask& mask);

/// sum_c conj(S_c) . coil_c; zero off the support.
ComplexImage sense_combine(const CoilImages& coil_images, const SensitivityMaps& maps);

/// S_c . x for every coil.
CoilImages expand_coils(const ComplexImage& x, const SensitivityMaps& maps);

/// Scales raw profiles so sum_c |S_c|^2 = 1 on the support and zeroes them
/// elsewhere. Throws DegenerateSupportError for an all-zero support pixel.
SensitivityMaps normalize_sensitivities(const CoilStack& raw, const BinaryMask& support);
/// Support = every pixel with any nonzero coil value.
SensitivityMaps normalize_sensitivities(const CoilStack& raw);

/// Applies M to every coil plane in place.
void apply_mask(MultiCoilKSpace& k, const SamplingMask& mask);

}  // namespace pmri
