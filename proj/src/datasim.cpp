#include "pmri/datasim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "pmri/fft.hpp"
#include "pmri/sense.hpp"

namespace pmri {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(base) ^ a) ^ (b * 0x632be59bd9b4e019ULL));
}

namespace {

struct Ellipse {
  double cy, cx, ay, ax, angle, value;

  bool contains(double y, double x) const {
    const double dy = y - cy, dx = x - cx;
    const double c = std::cos(angle), s = std::sin(angle);
    const double u = (dx * c + dy * s) / ax;
    const double v = (-dx * s + dy * c) / ay;
    return u * u + v * v <= 1.0;
  }
};

}  // namespace

PhantomSlice generate_phantom(int height, int width, std::uint64_t seed) {
  if (height < 16 || width < 16) throw ConfigError("generate_phantom: grid must be at least 16x16");
  std::mt19937_64 rng(seed);
  auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };

  const double hh = height / 2.0, hw = width / 2.0;
  Ellipse outer{hh + uni(-0.05, 0.05) * height, hw + uni(-0.05, 0.05) * width, uni(0.55, 0.85) * hh,
                uni(0.55, 0.85) * hw, uni(-0.5, 0.5), uni(0.55, 0.75)};

  std::vector<Ellipse> inner;
  const int n_inner = 4 + static_cast<int>(rng() % 4);
  for (int i = 0; i < n_inner; ++i) {
    const double rad = uni(0.0, 0.55), theta = uni(0.0, 2 * std::numbers::pi);
    inner.push_back({outer.cy + rad * outer.ay * std::sin(theta), outer.cx + rad * outer.ax * std::cos(theta),
                     uni(0.08, 0.35) * outer.ay, uni(0.08, 0.35) * outer.ax, uni(0.0, std::numbers::pi),
                     uni(-0.3, 0.3)});
  }
  // Small high-contrast dots: fine detail that smooth reconstructions lose.
  const int n_dots = 6 + static_cast<int>(rng() % 6);
  for (int i = 0; i < n_dots; ++i) {
    const double rad = uni(0.0, 0.75), theta = uni(0.0, 2 * std::numbers::pi);
    const double size = uni(0.8, 2.0);
    inner.push_back({outer.cy + rad * outer.ay * std::sin(theta), outer.cx + rad * outer.ax * std::cos(theta), size,
                     size * uni(0.7, 1.4), 0.0, uni(-0.25, 0.25)});
  }

  const double gy = uni(-1.0, 1.0) * std::numbers::pi, gx = uni(-1.0, 1.0) * std::numbers::pi;
  const double phase0 = uni(-std::numbers::pi, std::numbers::pi);
  const double fy = uni(0.5, 2.0), fx = uni(0.5, 2.0);

  PhantomSlice out{ComplexImage(height, width), BinaryMask(height, width)};
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      if (!outer.contains(r, c)) continue;
      double mag = outer.value;
      for (const auto& e : inner) {
        if (e.contains(r, c)) mag += e.value;
      }
      // Gentle smooth shading across the object.
      mag *= 1.0 + 0.1 * std::cos(fy * (r - outer.cy) / outer.ay) * std::cos(fx * (c - outer.cx) / outer.ax);
      mag = std::clamp(mag, 0.05, 1.0);
      const double phase = phase0 + gy * (r - outer.cy) / height + gx * (c - outer.cx) / width;
      out.image(r, c) = std::polar(mag, phase);
      out.foreground(r, c) = 1;
    }
  }
  if (out.foreground.count() == 0 || out.foreground.count() == out.foreground.size()) {
    throw ConfigError("generate_phantom: degenerate foreground");
  }
  return out;
}

SensitivityMaps generate_sensitivities(int coils, int height, int width, const BinaryMask& support) {
  if (coils < 1) throw ConfigError("generate_sensitivities: coils must be >= 1");
  require_same_grid({height, width}, support.grid(), "sensitivity support");
  CoilStack raw(coils, height, width);
  const double cy = (height - 1) / 2.0, cx = (width - 1) / 2.0;
  const double ring = 0.75 * std::max(height, width);
  const double sigma = 0.6 * std::max(height, width);
  for (int k = 0; k < coils; ++k) {
    const double theta = 2 * std::numbers::pi * k / coils + std::numbers::pi / 4;
    const double ly = coils == 1 ? cy : cy + ring * std::sin(theta);
    const double lx = coils == 1 ? cx : cx + ring * std::cos(theta);
    for (int r = 0; r < height; ++r) {
      for (int c = 0; c < width; ++c) {
        const double d2 = (r - ly) * (r - ly) + (c - lx) * (c - lx);
        const double mag = std::exp(-d2 / (2 * sigma * sigma));
        // Coil 0 is real; the others carry a smooth coil-specific phase.
        const double phase = k * (0.6 + 0.8 * (r - cy) / height - 0.5 * (c - cx) / width);
        raw(k, r, c) = k == 0 ? Complex(mag, 0.0) : std::polar(mag, phase);
      }
    }
  }
  return normalize_sensitivities(raw, support);
}

void MaskSpec::validate() const {
  if (!(acceleration >= 1.0)) throw ConfigError("mask: acceleration must be >= 1");
  if (!(center_fraction >= 0.0 && center_fraction < 1.0)) throw ConfigError("mask: center fraction must be in [0, 1)");
  if (center_fraction > 1.0 / acceleration) {
    throw ConfigError("mask: centre columns alone exceed the sampling budget (center_fraction > 1/acceleration)");
  }
}

int center_columns(int width, double center_fraction) {
  return static_cast<int>(std::lround(center_fraction * width));
}

std::vector<double> vd_column_probabilities(int width, const MaskSpec& spec) {
  spec.validate();
  std::vector<double> prob(width, 1.0);
  if (spec.acceleration == 1.0) return prob;

  const int n_center = center_columns(width, spec.center_fraction);
  const int start = width / 2 - n_center / 2;
  const double budget = width / spec.acceleration - n_center;
  std::vector<double> dist;  // normalized distance of each non-centre column
  for (int c = 0; c < width; ++c) {
    if (c >= start && c < start + n_center) continue;
    dist.push_back(std::min(1.0, std::abs(c - width / 2) / (width / 2.0)));
  }
  auto expected = [&](double p) {
    double s = 0.0;
    for (double d : dist) s += std::pow(1.0 - d, p);
    return s;
  };
  if (budget < 0.0 || budget > expected(0.0)) throw ConfigError("mask: infeasible sampling budget");

  // expected(p) decreases monotonically in p; bisect on p.
  double lo = 0.0, hi = 1.0;
  while (expected(hi) > budget && hi < 1e6) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (expected(mid) > budget ? lo : hi) = mid;
  }
  const double p = 0.5 * (lo + hi);
  std::size_t j = 0;
  for (int c = 0; c < width; ++c) {
    if (c >= start && c < start + n_center) continue;
    prob[c] = std::pow(1.0 - dist[j++], p);
  }
  return prob;
}

SamplingMask generate_vd_mask(int height, int width, const MaskSpec& spec) {
  if (height < 1 || width < 1) throw ConfigError("mask: grid must be >= 1x1");
  const std::vector<double> prob = vd_column_probabilities(width, spec);
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<std::uint8_t> columns(width);
  for (int c = 0; c < width; ++c) {
    const double u = uni(rng);  // drawn for every column so the stream is fixed
    columns[c] = prob[c] >= 1.0 || u < prob[c] ? 1 : 0;
  }
  return SamplingMask(height, std::move(columns));
}

MultiCoilKSpace simulate_acquisition(const PhantomSlice& phantom, const SensitivityMaps& maps,
                                     const SamplingMask& mask, double noise_sigma, std::uint64_t seed) {
  if (!(noise_sigma >= 0.0)) throw ConfigError("simulate_acquisition: noise sigma must be >= 0");
  if (noise_sigma == 0.0) return forward_op(phantom.image, maps, mask);
  require_same_grid(phantom.image.grid(), maps.grid(), "sensitivity maps");
  require_same_grid(phantom.image.grid(), mask.grid(), "sampling mask");
  MultiCoilKSpace k = expand_coils(phantom.image, maps);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, noise_sigma);
  for (int c = 0; c < k.coils(); ++c) {
    auto plane = k.coil(c);
    fft2c_inplace(plane, k.grid());
    for (auto& v : plane) {
      const double re = noise(rng);
      const double im = noise(rng);
      v += Complex(re, im);
    }
  }
  apply_mask(k, mask);
  return k;
}

BinaryMask dilate(const BinaryMask& mask, int radius) {
  BinaryMask out(mask.height(), mask.width());
  for (int r = 0; r < mask.height(); ++r) {
    for (int c = 0; c < mask.width(); ++c) {
      if (!mask(r, c)) continue;
      for (int dr = -radius; dr <= radius; ++dr) {
        for (int dc = -radius; dc <= radius; ++dc) {
          const int rr = r + dr, cc = c + dc;
          if (rr >= 0 && rr < mask.height() && cc >= 0 && cc < mask.width()) out(rr, cc) = 1;
        }
      }
    }
  }
  return out;
}

}  // namespace pmri
