#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace pmri {

/// Planar C x H x W real activations (64-bit).
struct Tensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int c, int h, int w, double fill = 0.0)
      : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, fill) {}

  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  double* channel(int c) { return data.data() + c * plane(); }
  const double* channel(int c) const { return data.data() + c * plane(); }
  double& operator()(int c, int y, int x) { return data[c * plane() + static_cast<std::size_t>(y) * width + x]; }
  double operator()(int c, int y, int x) const { return data[c * plane() + static_cast<std::size_t>(y) * width + x]; }
  bool same_shape(const Tensor& o) const { return channels == o.channels && height == o.height && width == o.width; }
};

/// Geometry of a square-kernel 2D convolution with "same" padding (k/2).
/// Weights are [out][in][k][k], stored 32-bit; all arithmetic is 64-bit.
struct ConvShape {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 3;
  int stride = 1;

  int pad() const { return kernel / 2; }
  int out_size(int n) const { return (n + 2 * pad() - kernel) / stride + 1; }
  std::size_t weight_count() const { return static_cast<std::size_t>(out_channels) * in_channels * kernel * kernel; }
};

namespace kernels {

// OpenMP-parallel kernels. Every output element is owned by one thread and
// summed in a fixed order, so results do not depend on the thread count.

Tensor conv2d_forward(const Tensor& in, std::span<const float> weight, std::span<const float> bias, const ConvShape& shape);

/// Gradient w.r.t. the convolution input.
Tensor conv2d_backward_input(const Tensor& grad_out, std::span<const float> weight, const ConvShape& shape,
                             int in_height, int in_width);

/// Accumulates (+=) weight and bias gradients.
void conv2d_backward_params(const Tensor& in, const Tensor& grad_out, const ConvShape& shape,
                            std::span<double> grad_weight, std::span<double> grad_bias);

/// Nearest-neighbour upsampling by `factor`, cropped/extended to out_h x out_w.
Tensor upsample_nearest(const Tensor& in, int factor, int out_h, int out_w);
Tensor upsample_nearest_backward(const Tensor& grad_out, int factor, int in_h, int in_w);

namespace reference {

// Straightforward serial loops, one output element at a time. Kept as the
// oracle for the parallel kernels and as the benchmark baseline.

Tensor conv2d_forward(const Tensor& in, std::span<const float> weight, std::span<const float> bias, const ConvShape& shape);
Tensor conv2d_backward_input(const Tensor& grad_out, std::span<const float> weight, const ConvShape& shape,
                             int in_height, int in_width);
void conv2d_backward_params(const Tensor& in, const Tensor& grad_out, const ConvShape& shape,
                            std::span<double> grad_weight, std::span<double> grad_bias);

}  // namespace reference
}  // namespace kernels
}  // namespace pmri
