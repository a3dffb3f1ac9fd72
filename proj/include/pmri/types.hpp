#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pmri/errors.hpp"

namespace pmri {

using Complex = std::complex<double>;

/// Height x width grid. Rows are the readout dimension, columns phase-encode.
struct Grid {
  int height = 0;
  int width = 0;

  std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }
  bool operator==(const Grid&) const = default;
};

/// H x W complex image, row-major. Also used for a single k-space plane.
class ComplexImage {
 public:
  ComplexImage() = default;
  ComplexImage(int height, int width);
  ComplexImage(int height, int width, std::vector<Complex> data);

  int height() const { return grid_.height; }
  int width() const { return grid_.width; }
  Grid grid() const { return grid_; }
  std::size_t size() const { return data_.size(); }

  Complex& operator()(int row, int col) { return data_[static_cast<std::size_t>(row) * grid_.width + col]; }
  Complex operator()(int row, int col) const { return data_[static_cast<std::size_t>(row) * grid_.width + col]; }
  Complex& operator[](std::size_t i) { return data_[i]; }
  Complex operator[](std::size_t i) const { return data_[i]; }

  std::span<Complex> data() { return data_; }
  std::span<const Complex> data() const { return data_; }

  bool all_finite() const;

 private:
  Grid grid_;
  std::vector<Complex> data_;
};

using KSpacePlane = ComplexImage;

/// C x H x W complex array: one plane per coil. Holds either multi-coil
/// k-space or coil images.
class CoilStack {
 public:
  CoilStack() = default;
  CoilStack(int coils, int height, int width);
  CoilStack(int coils, int height, int width, std::vector<Complex> data);

  int coils() const { return coils_; }
  int height() const { return grid_.height; }
  int width() const { return grid_.width; }
  Grid grid() const { return grid_; }
  std::size_t size() const { return data_.size(); }

  std::span<Complex> coil(int c) { return {data_.data() + c * grid_.pixels(), grid_.pixels()}; }
  std::span<const Complex> coil(int c) const { return {data_.data() + c * grid_.pixels(), grid_.pixels()}; }
  Complex& operator()(int c, int row, int col) { return data_[c * grid_.pixels() + static_cast<std::size_t>(row) * grid_.width + col]; }
  Complex operator()(int c, int row, int col) const { return data_[c * grid_.pixels() + static_cast<std::size_t>(row) * grid_.width + col]; }

  std::span<Complex> data() { return data_; }
  std::span<const Complex> data() const { return data_; }

 private:
  int coils_ = 0;
  Grid grid_;
  std::vector<Complex> data_;
};

using MultiCoilKSpace = CoilStack;
using CoilImages = CoilStack;

/// Binary H x W mask (foreground, support).
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int height, int width, std::uint8_t fill = 0);
  BinaryMask(int height, int width, std::vector<std::uint8_t> data);

  int height() const { return grid_.height; }
  int width() const { return grid_.width; }
  Grid grid() const { return grid_; }
  std::size_t size() const { return data_.size(); }
  std::size_t count() const;

  std::uint8_t& operator()(int row, int col) { return data_[static_cast<std::size_t>(row) * grid_.width + col]; }
  std::uint8_t operator()(int row, int col) const { return data_[static_cast<std::size_t>(row) * grid_.width + col]; }
  std::uint8_t operator[](std::size_t i) const { return data_[i]; }
  std::uint8_t& operator[](std::size_t i) { return data_[i]; }

  std::span<const std::uint8_t> data() const { return data_; }

 private:
  Grid grid_;
  std::vector<std::uint8_t> data_;
};

/// Cartesian line-sampling mask. Values depend only on the column.
class SamplingMask {
 public:
  SamplingMask() = default;
  /// Builds the H x W mask from per-column flags.
  SamplingMask(int height, std::vector<std::uint8_t> columns);
  /// Builds from a full H x W array; throws DimensionError if a column is not
  /// constant along the readout dimension.
  static SamplingMask from_array(int height, int width, std::span<const std::uint8_t> values);

  int height() const { return grid_.height; }
  int width() const { return grid_.width; }
  Grid grid() const { return grid_; }

  std::uint8_t operator()(int /*row*/, int col) const { return columns_[col]; }
  std::uint8_t at(std::size_t i) const { return columns_[i % grid_.width]; }
  std::span<const std::uint8_t> columns() const { return columns_; }
  std::vector<std::uint8_t> to_array() const;

  std::size_t sampled_columns() const;
  double sampled_fraction() const;

  static SamplingMask full(int height, int width);
  static SamplingMask empty(int height, int width);

 private:
  Grid grid_;
  std::vector<std::uint8_t> columns_;
};

/// Coil profiles with sum-of-squares normalization on the support and exact
/// zeros elsewhere. Obtain through normalize_sensitivities().
class SensitivityMaps {
 public:
  SensitivityMaps() = default;

  int coils() const { return maps_.coils(); }
  int height() const { return maps_.height(); }
  int width() const { return maps_.width(); }
  Grid grid() const { return maps_.grid(); }

  const CoilStack& maps() const { return maps_; }
  const BinaryMask& support() const { return support_; }
  std::span<const Complex> coil(int c) const { return maps_.coil(c); }

  /// Wraps already-normalized maps; throws DegenerateSupportError if the
  /// invariant fails by more than `tolerance`.
  static SensitivityMaps from_normalized(CoilStack maps, BinaryMask support, double tolerance = 1e-6);

 private:
  friend SensitivityMaps normalize_sensitivities(const CoilStack& raw, const BinaryMask& support);
  SensitivityMaps(CoilStack maps, BinaryMask support) : maps_(std::move(maps)), support_(std::move(support)) {}

  CoilStack maps_;
  BinaryMask support_;
};

/// H x W real image, row-major (magnitude images for losses and metrics).
struct RealImage {
  int height = 0;
  int width = 0;
  std::vector<double> data;

  RealImage() = default;
  RealImage(int h, int w, double fill = 0.0) : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill) {}

  Grid grid() const { return {height, width}; }
  double& operator()(int row, int col) { return data[static_cast<std::size_t>(row) * width + col]; }
  double operator()(int row, int col) const { return data[static_cast<std::size_t>(row) * width + col]; }
};

RealImage magnitude(const ComplexImage& x);

void require_same_grid(Grid a, Grid b, const char* what);

}  // namespace pmri
