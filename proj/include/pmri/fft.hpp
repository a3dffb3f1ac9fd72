#pragma once

#include <span>

#include "pmri/types.hpp"

namespace pmri {

/// Centered, orthonormal 2D DFT: DC lands at (H/2, W/2) and both directions
/// scale by 1/sqrt(H*W). Throws NumericDomainError on NaN/Inf input.
KSpacePlane fft2c(const ComplexImage& img);
ComplexImage ifft2c(const KSpacePlane& k);

/// In-place variants on a raw H x W plane; no finiteness check.
void fft2c_inplace(std::span<Complex> plane, Grid grid);
void ifft2c_inplace(std::span<Complex> plane, Grid grid);

}  // namespace pmri
