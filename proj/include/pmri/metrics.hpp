#pragma once

#include <functional>
#include <string>
#include <vector>

#include "pmri/dataset.hpp"
#include "pmri/losses.hpp"
#include "pmri/network.hpp"

namespace pmri {

// All metrics compare magnitude images restricted to a foreground mask.

/// ||m.(|rec| - |ref|)||^2 / ||m.|ref|||^2. UndefinedMetricError on zero
/// reference energy.
double nmse(const ComplexImage& rec, const ComplexImage& ref, const BinaryMask& mask);

/// 10 log10(L^2 / MSE_m), L = max of m.|ref|. Returns +inf for zero error.
double psnr(const ComplexImage& rec, const ComplexImage& ref, const BinaryMask& mask);

/// Mean of the SSIM map over windows whose centre lies in the mask.
double ssim_metric(const ComplexImage& rec, const ComplexImage& ref, const BinaryMask& mask,
                   const LossConfig& config = {});

/// Threshold at 5% of the peak magnitude, then one 3x3 dilation. For images
/// that come without a stored foreground.
BinaryMask estimate_foreground(const ComplexImage& x);

struct SliceMetrics {
  int slice = 0;
  double nmse = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct Aggregate {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};

Aggregate aggregate(const std::vector<double>& values);

struct MetricReport {
  std::string model;
  int acceleration = 0;
  std::vector<SliceMetrics> slices;
  Aggregate nmse, psnr, ssim;

  /// Recomputes the aggregates from the per-slice rows.
  void finalize();
  std::string to_json() const;
  /// Header "slice,nmse,psnr,ssim" plus one row per slice.
  std::string to_csv() const;
};

using Reconstructor = std::function<ComplexImage(const PreparedSample&)>;

/// Network reconstruction of a prepared sample, scaled back to data units.
ComplexImage reconstruct(const Model& model, const PreparedSample& sample);
/// Zero-filled SENSE baseline, in data units.
ComplexImage reconstruct_zero_filled(const PreparedSample& sample);

MetricReport evaluate(const Reconstructor& recon, const Dataset& dataset, int acceleration,
                      const std::vector<int>& slices, std::string identity);
MetricReport evaluate(const Model& model, const Dataset& dataset, int acceleration, const std::vector<int>& slices,
                      std::string identity);
MetricReport evaluate_zero_filled(const Dataset& dataset, int acceleration, const std::vector<int>& slices);

}  // namespace pmri
