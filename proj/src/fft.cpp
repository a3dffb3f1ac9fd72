#include "pmri/fft.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <tuple>
#include <vector>

namespace pmri {

namespace {

// fftw_plan creation is not thread-safe; execution with new arrays is.
class PlanCache {
 public:
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  fftw_plan get(int height, int width, int sign) {
    std::lock_guard lock(mutex_);
    auto key = std::make_tuple(height, width, sign);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    std::vector<Complex> scratch(static_cast<std::size_t>(height) * width);
    auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
    fftw_plan plan = fftw_plan_dft_2d(height, width, buf, buf, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
    plans_.emplace(key, plan);
    return plan;
  }

 private:
  std::mutex mutex_;
  std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

PlanCache& plans() {
  static PlanCache cache;
  return cache;
}

// Circular shift by (dy, dx): out(r, c) = in((r + dy) mod H, (c + dx) mod W).
void circshift(std::span<const Complex> in, std::span<Complex> out, Grid g, int dy, int dx) {
  for (int r = 0; r < g.height; ++r) {
    const int sr = (r + dy) % g.height;
    const Complex* src = in.data() + static_cast<std::size_t>(sr) * g.width;
    Complex* dst = out.data() + static_cast<std::size_t>(r) * g.width;
    for (int c = 0; c < g.width; ++c) dst[c] = src[(c + dx) % g.width];
  }
}

void centered_transform(std::span<Complex> plane, Grid g, int sign) {
  std::vector<Complex> work(plane.size());
  // ifftshift
  circshift(plane, work, g, g.height / 2, g.width / 2);
  auto* buf = reinterpret_cast<fftw_complex*>(work.data());
  fftw_execute_dft(plans().get(g.height, g.width, sign), buf, buf);
  // fftshift
  circshift(work, plane, g, g.height - g.height / 2, g.width - g.width / 2);
  const double scale = 1.0 / std::sqrt(static_cast<double>(g.pixels()));
  for (auto& v : plane) v *= scale;
}

void require_finite(const ComplexImage& x, const char* what) {
  if (!x.all_finite()) throw NumericDomainError(std::string(what) + ": input contains NaN or Inf");
}

}  // namespace

void fft2c_inplace(std::span<Complex> plane, Grid grid) { centered_transform(plane, grid, FFTW_FORWARD); }

void ifft2c_inplace(std::span<Complex> plane, Grid grid) { centered_transform(plane, grid, FFTW_BACKWARD); }

KSpacePlane fft2c(const ComplexImage& img) {
  require_finite(img, "fft2c");
  KSpacePlane out = img;
  fft2c_inplace(out.data(), out.grid());
  return out;
}

ComplexImage ifft2c(const KSpacePlane& k) {
  require_finite(k, "ifft2c");
  ComplexImage out = k;
  ifft2c_inplace(out.data(), out.grid());
  return out;
}

}  // namespace pmri
