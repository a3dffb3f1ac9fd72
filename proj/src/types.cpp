#include "pmri/types.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace pmri {

namespace {

void check_grid(int height, int width) {
  if (height < 1 || width < 1) {
    throw DimensionError("grid dimensions must be >= 1");
  }
}

}  // namespace

ComplexImage::ComplexImage(int height, int width) : grid_{height, width} {
  check_grid(height, width);
  data_.assign(grid_.pixels(), Complex{});
}

ComplexImage::ComplexImage(int height, int width, std::vector<Complex> data)
    : grid_{height, width}, data_(std::move(data)) {
  check_grid(height, width);
  if (data_.size() != grid_.pixels()) {
    throw DimensionError("complex image data length does not match height x width");
  }
}

bool ComplexImage::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](Complex v) { return std::isfinite(v.real()) && std::isfinite(v.imag()); });
}

CoilStack::CoilStack(int coils, int height, int width) : coils_(coils), grid_{height, width} {
  check_grid(height, width);
  if (coils < 1) throw DimensionError("coil count must be >= 1");
  data_.assign(coils * grid_.pixels(), Complex{});
}

CoilStack::CoilStack(int coils, int height, int width, std::vector<Complex> data)
    : coils_(coils), grid_{height, width}, data_(std::move(data)) {
  check_grid(height, width);
  if (coils < 1) throw DimensionError("coil count must be >= 1");
  if (data_.size() != coils * grid_.pixels()) {
    throw DimensionError("coil stack data length does not match coils x height x width");
  }
}

BinaryMask::BinaryMask(int height, int width, std::uint8_t fill)
    : grid_{height, width}, data_(grid_.pixels(), fill ? 1 : 0) {
  check_grid(height, width);
}

BinaryMask::BinaryMask(int height, int width, std::vector<std::uint8_t> data)
    : grid_{height, width}, data_(std::move(data)) {
  check_grid(height, width);
  if (data_.size() != grid_.pixels()) throw DimensionError("mask data length does not match height x width");
  for (auto v : data_) {
    if (v > 1) throw DimensionError("mask values must be 0 or 1");
  }
}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
}

SamplingMask::SamplingMask(int height, std::vector<std::uint8_t> columns)
    : grid_{height, static_cast<int>(columns.size())}, columns_(std::move(columns)) {
  check_grid(grid_.height, grid_.width);
  for (auto v : columns_) {
    if (v > 1) throw DimensionError("sampling mask values must be 0 or 1");
  }
}

SamplingMask SamplingMask::from_array(int height, int width, std::span<const std::uint8_t> values) {
  check_grid(height, width);
  if (values.size() != static_cast<std::size_t>(height) * width) {
    throw DimensionError("sampling mask data length does not match height x width");
  }
  std::vector<std::uint8_t> columns(values.begin(), values.begin() + width);
  for (int r = 1; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      if (values[static_cast<std::size_t>(r) * width + c] != columns[c]) {
        std::ostringstream msg;
        msg << "sampling mask column " << c << " is not constant along the readout dimension";
        throw DimensionError(msg.str());
      }
    }
  }
  return SamplingMask(height, std::move(columns));
}

std::vector<std::uint8_t> SamplingMask::to_array() const {
  std::vector<std::uint8_t> out(grid_.pixels());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = at(i);
  return out;
}

std::size_t SamplingMask::sampled_columns() const {
  return static_cast<std::size_t>(std::count(columns_.begin(), columns_.end(), std::uint8_t{1}));
}

double SamplingMask::sampled_fraction() const {
  return static_cast<double>(sampled_columns()) / grid_.width;
}

SamplingMask SamplingMask::full(int height, int width) {
  return SamplingMask(height, std::vector<std::uint8_t>(width, 1));
}

SamplingMask SamplingMask::empty(int height, int width) {
  return SamplingMask(height, std::vector<std::uint8_t>(width, 0));
}

SensitivityMaps SensitivityMaps::from_normalized(CoilStack maps, BinaryMask support, double tolerance) {
  require_same_grid(maps.grid(), support.grid(), "sensitivity support");
  const std::size_t n = maps.grid().pixels();
  for (std::size_t p = 0; p < n; ++p) {
    double energy = 0.0;
    for (int c = 0; c < maps.coils(); ++c) energy += std::norm(maps.coil(c)[p]);
    if (support[p]) {
      if (std::abs(energy - 1.0) > tolerance) {
        throw DegenerateSupportError("sensitivity maps are not normalized on the support");
      }
    } else if (energy != 0.0) {
      throw DegenerateSupportError("sensitivity maps are nonzero off the support");
    }
  }
  return SensitivityMaps(std::move(maps), std::move(support));
}

RealImage magnitude(const ComplexImage& x) {
  RealImage out(x.height(), x.width());
  for (std::size_t i = 0; i < x.size(); ++i) out.data[i] = std::abs(x[i]);
  return out;
}

void require_same_grid(Grid a, Grid b, const char* what) {
  if (a != b) {
    std::ostringstream msg;
    msg << what << ": grid " << a.height << "x" << a.width << " does not match " << b.height << "x" << b.width;
    throw DimensionError(msg.str());
  }
}

}  // namespace pmri
