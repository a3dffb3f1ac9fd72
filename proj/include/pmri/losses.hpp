#pragma once

#include "pmri/network.hpp"
#include "pmri/types.hpp"

namespace pmri {

/// How SSIM picks its dynamic range L.
enum class DataRange {
  ReferenceMax,  // L = max of the reference image (per image)
  Fixed,         // L = LossConfig::fixed_range
};

struct LossConfig {
  double lambda = 1e-3;  // L1 weight inside the SN loss
  double gamma = 0.1;    // SN-loss weight inside the SN-GAN loss
  int ssim_window = 7;
  double k1 = 0.01;
  double k2 = 0.03;
  DataRange range = DataRange::ReferenceMax;
  double fixed_range = 1.0;

  void validate() const;
};

/// Scalar loss plus its gradient w.r.t. the first (reconstruction) argument.
struct LossValue {
  double value = 0.0;
  RealImage grad;
};

/// Mean |a - b|; subgradient 0 at ties.
LossValue l1_loss(const RealImage& rec, const RealImage& ref);

/// Local SSIM values, one per valid (fully inside) window, indexed by the
/// window centre: entry (r, c) is the window centred at (r + w/2, c + w/2).
RealImage ssim_map(const RealImage& rec, const RealImage& ref, const LossConfig& config);

/// Mean SSIM over all valid uniform windows, with its gradient.
LossValue ssim(const RealImage& rec, const RealImage& ref, const LossConfig& config);

/// 1 - SSIM + lambda * L1.
LossValue sn_loss(const RealImage& rec, const RealImage& ref, const LossConfig& config);

/// 1/2 [(d_real - 1)^2 + d_fake^2]
double lsgan_d_loss(double d_real, double d_fake);
/// 1/2 (d_fake - 1)^2
double lsgan_g_loss(double d_fake);

/// Elementwise m . x.
RealImage apply_foreground(const RealImage& x, const BinaryMask& mask);

struct GanLossValue {
  double value = 0.0;
  double sn_part = 0.0;
  double adversarial_part = 0.0;
  RealImage grad;             // w.r.t. rec
  bool degenerate_mask = false;  // m is all zero: the critic only sees zeros
};

/// gamma * L_SN(rec, ref) + lsgan_g_loss(D(m . rec)).
GanLossValue sn_gan_loss(const RealImage& rec, const RealImage& ref, const BinaryMask& mask,
                         const ParameterSet& disc_params, const DiscriminatorConfig& disc_config,
                         const LossConfig& config);

/// Chain rule from a magnitude-image gradient to the complex image:
/// d|x|/dx = x/|x| (0 where x = 0).
ComplexImage magnitude_backward(const ComplexImage& x, const RealImage& grad_magnitude);

}  // namespace pmri
