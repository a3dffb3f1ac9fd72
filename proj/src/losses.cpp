#include "pmri/losses.hpp"

#include <algorithm>
#include <cmath>

namespace pmri {

void LossConfig::validate() const {
  if (!(lambda >= 0.0)) throw ConfigError("loss: lambda must be >= 0");
  if (!(gamma >= 0.0)) throw ConfigError("loss: gamma must be >= 0");
  if (ssim_window < 3 || ssim_window % 2 == 0) throw ConfigError("loss: SSIM window must be odd and >= 3");
  if (!(k1 > 0.0) || !(k2 > 0.0)) throw ConfigError("loss: SSIM constants must be > 0");
  if (range == DataRange::Fixed && !(fixed_range > 0.0)) throw ConfigError("loss: fixed data range must be > 0");
}

LossValue l1_loss(const RealImage& rec, const RealImage& ref) {
  require_same_grid(rec.grid(), ref.grid(), "l1_loss");
  LossValue out{0.0, RealImage(rec.height, rec.width)};
  const double inv = 1.0 / static_cast<double>(rec.data.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < rec.data.size(); ++i) {
    const double d = rec.data[i] - ref.data[i];
    sum += std::abs(d);
    out.grad.data[i] = d > 0.0 ? inv : (d < 0.0 ? -inv : 0.0);
  }
  out.value = sum * inv;
  return out;
}

namespace {

double data_range(const RealImage& ref, const LossConfig& config) {
  if (config.range == DataRange::Fixed) return config.fixed_range;
  const double peak = *std::max_element(ref.data.begin(), ref.data.end());
  // An all-zero reference has no range; fall back to unit range.
  return peak > 0.0 ? peak : 1.0;
}

struct WindowStats {
  double mu_a, mu_b, var_a, var_b, cov;
};

WindowStats window_stats(const RealImage& a, const RealImage& b, int r0, int c0, int win) {
  double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  for (int r = r0; r < r0 + win; ++r) {
    for (int c = c0; c < c0 + win; ++c) {
      const double x = a(r, c), y = b(r, c);
      sa += x;
      sb += y;
      saa += x * x;
      sbb += y * y;
      sab += x * y;
    }
  }
  const double n = static_cast<double>(win) * win;
  WindowStats s;
  s.mu_a = sa / n;
  s.mu_b = sb / n;
  s.var_a = saa / n - s.mu_a * s.mu_a;
  s.var_b = sbb / n - s.mu_b * s.mu_b;
  s.cov = sab / n - s.mu_a * s.mu_b;
  return s;
}

void check_ssim_inputs(const RealImage& rec, const RealImage& ref, const LossConfig& config) {
  require_same_grid(rec.grid(), ref.grid(), "ssim");
  config.validate();
  if (config.ssim_window > rec.height || config.ssim_window > rec.width) {
    throw ConfigError("ssim: window is larger than the image");
  }
}

}  // namespace

RealImage ssim_map(const RealImage& rec, const RealImage& ref, const LossConfig& config) {
  check_ssim_inputs(rec, ref, config);
  const int win = config.ssim_window;
  const double L = data_range(ref, config);
  const double c1 = (config.k1 * L) * (config.k1 * L);
  const double c2 = (config.k2 * L) * (config.k2 * L);
  RealImage map(rec.height - win + 1, rec.width - win + 1);
  for (int r = 0; r < map.height; ++r) {
    for (int c = 0; c < map.width; ++c) {
      const WindowStats s = window_stats(rec, ref, r, c, win);
      map(r, c) = ((2 * s.mu_a * s.mu_b + c1) * (2 * s.cov + c2)) /
                  ((s.mu_a * s.mu_a + s.mu_b * s.mu_b + c1) * (s.var_a + s.var_b + c2));
    }
  }
  return map;
}

LossValue ssim(const RealImage& rec, const RealImage& ref, const LossConfig& config) {
  check_ssim_inputs(rec, ref, config);
  const int win = config.ssim_window;
  const double L = data_range(ref, config);
  const double c1 = (config.k1 * L) * (config.k1 * L);
  const double c2 = (config.k2 * L) * (config.k2 * L);
  const int mh = rec.height - win + 1;
  const int mw = rec.width - win + 1;
  const double n = static_cast<double>(win) * win;
  const double inv_windows = 1.0 / (static_cast<double>(mh) * mw);

  LossValue out{0.0, RealImage(rec.height, rec.width)};
  double total = 0.0;
  for (int r = 0; r < mh; ++r) {
    for (int c = 0; c < mw; ++c) {
      const WindowStats s = window_stats(rec, ref, r, c, win);
      const double a1 = 2 * s.mu_a * s.mu_b + c1;
      const double a2 = 2 * s.cov + c2;
      const double b1 = s.mu_a * s.mu_a + s.mu_b * s.mu_b + c1;
      const double b2 = s.var_a + s.var_b + c2;
      const double v = (a1 * a2) / (b1 * b2);
      total += v;

      // dv/da_p = k0 + kb * b_p + ka * a_p for every pixel p of the window.
      const double kb = 2 * v / (n * a2);
      const double ka = -2 * v / (n * b2);
      const double k0 = v * (2 * s.mu_b / a1 - 2 * s.mu_a / b1) / n - kb * s.mu_b - ka * s.mu_a;
      for (int rr = r; rr < r + win; ++rr) {
        for (int cc = c; cc < c + win; ++cc) {
          out.grad(rr, cc) += (k0 + kb * ref(rr, cc) + ka * rec(rr, cc)) * inv_windows;
        }
      }
    }
  }
  out.value = total * inv_windows;
  return out;
}

LossValue sn_loss(const RealImage& rec, const RealImage& ref, const LossConfig& config) {
  LossValue s = ssim(rec, ref, config);
  LossValue l1 = l1_loss(rec, ref);
  LossValue out{1.0 - s.value + config.lambda * l1.value, RealImage(rec.height, rec.width)};
  for (std::size_t i = 0; i < out.grad.data.size(); ++i) {
    out.grad.data[i] = -s.grad.data[i] + config.lambda * l1.grad.data[i];
  }
  return out;
}

double lsgan_d_loss(double d_real, double d_fake) {
  return 0.5 * ((d_real - 1.0) * (d_real - 1.0) + d_fake * d_fake);
}

double lsgan_g_loss(double d_fake) { return 0.5 * (d_fake - 1.0) * (d_fake - 1.0); }

RealImage apply_foreground(const RealImage& x, const BinaryMask& mask) {
  require_same_grid(x.grid(), mask.grid(), "foreground mask");
  RealImage out = x;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    if (!mask[i]) out.data[i] = 0.0;
  }
  return out;
}

GanLossValue sn_gan_loss(const RealImage& rec, const RealImage& ref, const BinaryMask& mask,
                         const ParameterSet& disc_params, const DiscriminatorConfig& disc_config,
                         const LossConfig& config) {
  GanLossValue out;
  LossValue sn = sn_loss(rec, ref, config);
  out.degenerate_mask = mask.count() == 0;

  Tape tape;
  const double d_fake = discriminator_forward(apply_foreground(rec, mask), disc_params, disc_config, &tape);
  DiscriminatorGradients dg = discriminator_backward(std::move(tape), d_fake - 1.0, disc_params);

  out.sn_part = sn.value;
  out.adversarial_part = lsgan_g_loss(d_fake);
  out.value = config.gamma * sn.value + out.adversarial_part;
  out.grad = RealImage(rec.height, rec.width);
  for (std::size_t i = 0; i < out.grad.data.size(); ++i) {
    out.grad.data[i] = config.gamma * sn.grad.data[i] + (mask[i] ? dg.input.data[i] : 0.0);
  }
  return out;
}

ComplexImage magnitude_backward(const ComplexImage& x, const RealImage& grad_magnitude) {
  require_same_grid(x.grid(), grad_magnitude.grid(), "magnitude_backward");
  ComplexImage out(x.height(), x.width());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double m = std::abs(x[i]);
    if (m > 0.0) out[i] = x[i] * (grad_magnitude.data[i] / m);
  }
  return out;
}

}  // namespace pmri
