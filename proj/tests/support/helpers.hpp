#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "pmri/network.hpp"
#include "pmri/sense.hpp"
#include "pmri/types.hpp"

namespace pmri::testing {

inline ComplexImage random_image(int h, int w, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  ComplexImage x(h, w);
  for (auto& v : x.data()) v = {n(rng), n(rng)};
  return x;
}

inline RealImage random_real(int h, int w, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  RealImage x(h, w);
  for (auto& v : x.data) v = u(rng);
  return x;
}

inline CoilStack random_stack(int c, int h, int w, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  CoilStack s(c, h, w);
  for (auto& v : s.data()) v = {n(rng), n(rng)};
  return s;
}

inline SensitivityMaps random_maps(int c, int h, int w, std::mt19937_64& rng) {
  return normalize_sensitivities(random_stack(c, h, w, rng), BinaryMask(h, w, 1));
}

inline SamplingMask random_mask(int h, int w, std::mt19937_64& rng, double p = 0.5) {
  std::bernoulli_distribution b(p);
  std::vector<std::uint8_t> cols(w);
  for (auto& v : cols) v = b(rng) ? 1 : 0;
  return SamplingMask(h, cols);
}

/// sum conj(a) b
template <typename A, typename B>
Complex inner(const A& a, const B& b) {
  Complex s = 0.0;
  const auto da = a.data();
  const auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) s += std::conj(da[i]) * db[i];
  return s;
}

/// Direct evaluation of the centered orthonormal DFT, O(N^2).
inline ComplexImage naive_dft2c(const ComplexImage& x, int sign = -1) {
  const int h = x.height(), w = x.width();
  const int ch = h / 2, cw = w / 2;
  ComplexImage out(h, w);
  const double scale = 1.0 / std::sqrt(static_cast<double>(h) * w);
  for (int u = 0; u < h; ++u) {
    for (int v = 0; v < w; ++v) {
      Complex s = 0.0;
      for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
          const double phase = sign * 2.0 * std::numbers::pi *
                               (static_cast<double>((u - ch) * (r - ch)) / h + static_cast<double>((v - cw) * (c - cw)) / w);
          s += x(r, c) * Complex(std::cos(phase), std::sin(phase));
        }
      }
      out(u, v) = s * scale;
    }
  }
  return out;
}

inline double norm2(std::span<const Complex> v) {
  double s = 0.0;
  for (const auto& z : v) s += std::norm(z);
  return std::sqrt(s);
}

inline double max_abs_diff(std::span<const Complex> a, std::span<const Complex> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline ModelConfig tiny_model(int cascades = 1, int size = 8, int coils = 2) {
  ModelConfig c;
  c.cascades = cascades;
  c.widths = {4, 4};
  c.height = size;
  c.width = size;
  c.coils = coils;
  c.seed = 11;
  return c;
}

/// Central difference of `f` w.r.t. one float parameter. The realized step is
/// measured after rounding to float.
template <typename F>
double central_difference(ParameterSet& params, std::size_t p, std::size_t k, double h, F&& f) {
  const float original = params[p].values[k];
  params[p].values[k] = static_cast<float>(original + h);
  const double hi_step = static_cast<double>(params[p].values[k]);
  const double up = f();
  params[p].values[k] = static_cast<float>(original - h);
  const double lo_step = static_cast<double>(params[p].values[k]);
  const double down = f();
  params[p].values[k] = original;
  return (up - down) / (hi_step - lo_step);
}

/// False when the +-h stencil straddles a kink of a piecewise-linear
/// activation: the one-sided slopes then disagree by more than `tol`.
template <typename F>
bool smooth_stencil(ParameterSet& params, std::size_t p, std::size_t k, double h, F&& f, double tol = 1e-4) {
  const float original = params[p].values[k];
  const double mid = f();
  params[p].values[k] = static_cast<float>(original + h);
  const double hi = static_cast<double>(params[p].values[k]) - original;
  const double up = f();
  params[p].values[k] = static_cast<float>(original - h);
  const double lo = original - static_cast<double>(params[p].values[k]);
  const double down = f();
  params[p].values[k] = original;
  const double fwd = (up - mid) / hi, bwd = (mid - down) / lo;
  return std::abs(fwd - bwd) <= tol * std::max(std::abs(fwd), std::abs(bwd));
}

inline double relative_error(double a, double b) {
  const double d = std::max(std::abs(a), std::abs(b));
  return d == 0.0 ? 0.0 : std::abs(a - b) / d;
}

}  // namespace pmri::testing
