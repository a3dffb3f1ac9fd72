#include "pmri/kernels.hpp"

#include <algorithm>

#include "pmri/errors.hpp"

namespace pmri::kernels {

namespace {

void check_conv(const Tensor& in, std::span<const float> weight, std::span<const float> bias, const ConvShape& s) {
  if (in.channels != s.in_channels) throw DimensionError("conv2d: input channel count mismatch");
  if (weight.size() != s.weight_count()) throw DimensionError("conv2d: weight size mismatch");
  if (!bias.empty() && bias.size() != static_cast<std::size_t>(s.out_channels)) {
    throw DimensionError("conv2d: bias size mismatch");
  }
  if (s.kernel % 2 == 0 || s.stride < 1) throw DimensionError("conv2d: kernel must be odd and stride >= 1");
}

// Output columns ox with 0 <= ox*stride + kx - pad < in_w, as [lo, hi).
inline void valid_range(int kx, int pad, int stride, int in_w, int out_w, int& lo, int& hi) {
  const int off = kx - pad;
  lo = off >= 0 ? 0 : (-off + stride - 1) / stride;
  const int last = in_w - 1 - off;
  hi = last < 0 ? 0 : std::min(out_w, last / stride + 1);
  if (lo > hi) lo = hi;
}

}  // namespace

Tensor conv2d_forward(const Tensor& in, std::span<const float> weight, std::span<const float> bias, const ConvShape& s) {
  check_conv(in, weight, bias, s);
  const int oh = s.out_size(in.height);
  const int ow = s.out_size(in.width);
  const int k = s.kernel;
  const int pad = s.pad();
  Tensor out(s.out_channels, oh, ow);

#pragma omp parallel for schedule(static)
  for (int o = 0; o < s.out_channels; ++o) {
    double* dst = out.channel(o);
    const double b = bias.empty() ? 0.0 : static_cast<double>(bias[o]);
    std::fill(dst, dst + out.plane(), b);
    for (int ic = 0; ic < s.in_channels; ++ic) {
      const double* src = in.channel(ic);
      const float* wk = weight.data() + (static_cast<std::size_t>(o) * s.in_channels + ic) * k * k;
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          const double wv = wk[ky * k + kx];
          if (wv == 0.0) continue;
          int lo, hi;
          valid_range(kx, pad, s.stride, in.width, ow, lo, hi);
          const int off = kx - pad;
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * s.stride + ky - pad;
            if (iy < 0 || iy >= in.height) continue;
            const double* row = src + static_cast<std::size_t>(iy) * in.width;
            double* orow = dst + static_cast<std::size_t>(oy) * ow;
            for (int ox = lo; ox < hi; ++ox) orow[ox] += wv * row[ox * s.stride + off];
          }
        }
      }
    }
  }
  return out;
}

Tensor conv2d_backward_input(const Tensor& grad_out, std::span<const float> weight, const ConvShape& s, int in_height,
                             int in_width) {
  if (grad_out.channels != s.out_channels || grad_out.height != s.out_size(in_height) ||
      grad_out.width != s.out_size(in_width)) {
    throw DimensionError("conv2d backward: gradient shape mismatch");
  }
  const int k = s.kernel;
  const int pad = s.pad();
  const int oh = grad_out.height;
  const int ow = grad_out.width;
  Tensor grad_in(s.in_channels, in_height, in_width);

#pragma omp parallel for schedule(static)
  for (int ic = 0; ic < s.in_channels; ++ic) {
    double* dst = grad_in.channel(ic);
    for (int o = 0; o < s.out_channels; ++o) {
      const double* g = grad_out.channel(o);
      const float* wk = weight.data() + (static_cast<std::size_t>(o) * s.in_channels + ic) * k * k;
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          const double wv = wk[ky * k + kx];
          if (wv == 0.0) continue;
          int lo, hi;
          valid_range(kx, pad, s.stride, in_width, ow, lo, hi);
          const int off = kx - pad;
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * s.stride + ky - pad;
            if (iy < 0 || iy >= in_height) continue;
            double* row = dst + static_cast<std::size_t>(iy) * in_width;
            const double* grow = g + static_cast<std::size_t>(oy) * ow;
            for (int ox = lo; ox < hi; ++ox) row[ox * s.stride + off] += wv * grow[ox];
          }
        }
      }
    }
  }
  return grad_in;
}

void conv2d_backward_params(const Tensor& in, const Tensor& grad_out, const ConvShape& s, std::span<double> grad_weight,
                            std::span<double> grad_bias) {
  if (grad_weight.size() != s.weight_count() || grad_bias.size() != static_cast<std::size_t>(s.out_channels)) {
    throw DimensionError("conv2d backward: parameter gradient size mismatch");
  }
  const int k = s.kernel;
  const int pad = s.pad();
  const int oh = grad_out.height;
  const int ow = grad_out.width;

#pragma omp parallel for schedule(static)
  for (int o = 0; o < s.out_channels; ++o) {
    const double* g = grad_out.channel(o);
    double bsum = 0.0;
    for (std::size_t i = 0; i < grad_out.plane(); ++i) bsum += g[i];
    grad_bias[o] += bsum;
    for (int ic = 0; ic < s.in_channels; ++ic) {
      const double* src = in.channel(ic);
      double* gw = grad_weight.data() + (static_cast<std::size_t>(o) * s.in_channels + ic) * k * k;
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          int lo, hi;
          valid_range(kx, pad, s.stride, in.width, ow, lo, hi);
          const int off = kx - pad;
          double acc = 0.0;
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * s.stride + ky - pad;
            if (iy < 0 || iy >= in.height) continue;
            const double* row = src + static_cast<std::size_t>(iy) * in.width;
            const double* grow = g + static_cast<std::size_t>(oy) * ow;
            for (int ox = lo; ox < hi; ++ox) acc += grow[ox] * row[ox * s.stride + off];
          }
          gw[ky * k + kx] += acc;
        }
      }
    }
  }
}

Tensor upsample_nearest(const Tensor& in, int factor, int out_h, int out_w) {
  Tensor out(in.channels, out_h, out_w);
#pragma omp parallel for schedule(static)
  for (int c = 0; c < in.channels; ++c) {
    for (int y = 0; y < out_h; ++y) {
      const int sy = std::min(y / factor, in.height - 1);
      for (int x = 0; x < out_w; ++x) out(c, y, x) = in(c, sy, std::min(x / factor, in.width - 1));
    }
  }
  return out;
}

Tensor upsample_nearest_backward(const Tensor& grad_out, int factor, int in_h, int in_w) {
  Tensor grad_in(grad_out.channels, in_h, in_w);
#pragma omp parallel for schedule(static)
  for (int c = 0; c < grad_out.channels; ++c) {
    for (int y = 0; y < grad_out.height; ++y) {
      const int sy = std::min(y / factor, in_h - 1);
      for (int x = 0; x < grad_out.width; ++x) grad_in(c, sy, std::min(x / factor, in_w - 1)) += grad_out(c, y, x);
    }
  }
  return grad_in;
}

namespace reference {

Tensor conv2d_forward(const Tensor& in, std::span<const float> weight, std::span<const float> bias, const ConvShape& s) {
  check_conv(in, weight, bias, s);
  const int oh = s.out_size(in.height);
  const int ow = s.out_size(in.width);
  const int k = s.kernel;
  Tensor out(s.out_channels, oh, ow);
  for (int o = 0; o < s.out_channels; ++o) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        double acc = bias.empty() ? 0.0 : static_cast<double>(bias[o]);
        for (int ic = 0; ic < s.in_channels; ++ic) {
          for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
              const int iy = oy * s.stride + ky - s.pad();
              const int ix = ox * s.stride + kx - s.pad();
              if (iy < 0 || iy >= in.height || ix < 0 || ix >= in.width) continue;
              acc += static_cast<double>(weight[((o * s.in_channels + ic) * k + ky) * k + kx]) * in(ic, iy, ix);
            }
          }
        }
        out(o, oy, ox) = acc;
      }
    }
  }
  return out;
}

Tensor conv2d_backward_input(const Tensor& grad_out, std::span<const float> weight, const ConvShape& s, int in_height,
                             int in_width) {
  const int k = s.kernel;
  Tensor grad_in(s.in_channels, in_height, in_width);
  for (int ic = 0; ic < s.in_channels; ++ic) {
    for (int iy = 0; iy < in_height; ++iy) {
      for (int ix = 0; ix < in_width; ++ix) {
        double acc = 0.0;
        for (int o = 0; o < s.out_channels; ++o) {
          for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
              const int ny = iy + s.pad() - ky;
              const int nx = ix + s.pad() - kx;
              if (ny < 0 || nx < 0 || ny % s.stride || nx % s.stride) continue;
              const int oy = ny / s.stride;
              const int ox = nx / s.stride;
              if (oy >= grad_out.height || ox >= grad_out.width) continue;
              acc += static_cast<double>(weight[((o * s.in_channels + ic) * k + ky) * k + kx]) * grad_out(o, oy, ox);
            }
          }
        }
        grad_in(ic, iy, ix) = acc;
      }
    }
  }
  return grad_in;
}

void conv2d_backward_params(const Tensor& in, const Tensor& grad_out, const ConvShape& s, std::span<double> grad_weight,
                            std::span<double> grad_bias) {
  const int k = s.kernel;
  for (int o = 0; o < s.out_channels; ++o) {
    for (int oy = 0; oy < grad_out.height; ++oy) {
      for (int ox = 0; ox < grad_out.width; ++ox) {
        const double g = grad_out(o, oy, ox);
        grad_bias[o] += g;
        for (int ic = 0; ic < s.in_channels; ++ic) {
          for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
              const int iy = oy * s.stride + ky - s.pad();
              const int ix = ox * s.stride + kx - s.pad();
              if (iy < 0 || iy >= in.height || ix < 0 || ix >= in.width) continue;
              grad_weight[((o * s.in_channels + ic) * k + ky) * k + kx] += g * in(ic, iy, ix);
            }
          }
        }
      }
    }
  }
}

}  // namespace reference
}  // namespace pmri::kernels
