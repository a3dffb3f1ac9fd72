#include "pmri/metrics.hpp"

#include <cmath>
#include <exception>
#include <iomanip>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "pmri/datasim.hpp"
#include "pmri/sense.hpp"

namespace pmri {

namespace {

struct MaskedSums {
  double err2 = 0.0;   // sum m (|rec| - |ref|)^2
  double ref2 = 0.0;   // sum m |ref|^2
  double peak = 0.0;   // max m |ref|
  std::size_t count = 0;
};

MaskedSums masked_sums(const ComplexImage& rec, const ComplexImage& ref, const BinaryMask& mask) {
  require_same_grid(rec.grid(), ref.grid(), "metric images");
  require_same_grid(rec.grid(), mask.grid(), "metric mask");
  MaskedSums s;
  for (std::size_t i = 0; i < rec.size(); ++i) {
    if (!mask[i]) continue;
    const double a = std::abs(rec[i]), b = std::abs(ref[i]);
    s.err2 += (a - b) * (a - b);
    s.ref2 += b * b;
    s.peak = std::max(s.peak, b);
    ++s.count;
  }
  if (s.count == 0) throw UndefinedMetricError("metric mask is empty");
  if (!(s.ref2 > 0.0)) throw UndefinedMetricError("reference has zero energy on the mask");
  return s;
}

nlohmann::json number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  return v;
}

}  // namespace

double nmse(const ComplexImage& rec, const ComplexImage& ref, const BinaryMask& mask) {
  const MaskedSums s = masked_sums(rec, ref, mask);
  return s.err2 / s.ref2;
}

double psnr(const ComplexImage& rec, const ComplexImage& ref, const BinaryMask& mask) {
  const MaskedSums s = masked_sums(rec, ref, mask);
  if (s.err2 == 0.0) return std::numeric_limits<double>::infinity();
  const double mse = s.err2 / static_cast<double>(s.count);
  return 10.0 * std::log10(s.peak * s.peak / mse);
}

double ssim_metric(const ComplexImage& rec, const ComplexImage& ref, const BinaryMask& mask, const LossConfig& config) {
  require_same_grid(rec.grid(), mask.grid(), "metric mask");
  const RealImage map = ssim_map(magnitude(rec), magnitude(ref), config);
  const int half = config.ssim_window / 2;
  double sum = 0.0;
  std::size_t n = 0;
  for (int r = 0; r < map.height; ++r) {
    for (int c = 0; c < map.width; ++c) {
      if (!mask(r + half, c + half)) continue;
      sum += map(r, c);
      ++n;
    }
  }
  if (n == 0) throw UndefinedMetricError("no SSIM window is centred inside the mask");
  return sum / static_cast<double>(n);
}

BinaryMask estimate_foreground(const ComplexImage& x) {
  double peak = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) peak = std::max(peak, std::abs(x[i]));
  BinaryMask m(x.height(), x.width());
  for (std::size_t i = 0; i < x.size(); ++i) m[i] = std::abs(x[i]) > 0.05 * peak ? 1 : 0;
  return dilate(m, 1);
}

Aggregate aggregate(const std::vector<double>& values) {
  Aggregate a;
  if (values.empty()) return a;
  double sum = 0.0;
  for (double v : values) sum += v;
  a.mean = sum / static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - a.mean) * (v - a.mean);
  a.std = std::sqrt(var / static_cast<double>(values.size()));
  return a;
}

void MetricReport::finalize() {
  std::vector<double> n, p, s;
  for (const auto& row : slices) {
    n.push_back(row.nmse);
    p.push_back(row.psnr);
    s.push_back(row.ssim);
  }
  nmse = aggregate(n);
  psnr = aggregate(p);
  ssim = aggregate(s);
}

std::string MetricReport::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : slices) {
    rows.push_back({{"slice", r.slice}, {"nmse", number(r.nmse)}, {"psnr", number(r.psnr)}, {"ssim", number(r.ssim)}});
  }
  auto agg = [](const Aggregate& a) { return nlohmann::json{{"mean", number(a.mean)}, {"std", number(a.std)}}; };
  nlohmann::json j = {{"model", model},
                      {"acceleration", acceleration},
                      {"slice_count", slices.size()},
                      {"nmse", agg(nmse)},
                      {"psnr", agg(psnr)},
                      {"ssim", agg(ssim)},
                      {"slices", rows}};
  return j.dump(2);
}

std::string MetricReport::to_csv() const {
  std::ostringstream s;
  s << "slice,nmse,psnr,ssim\n" << std::setprecision(17);
  for (const auto& r : slices) s << r.slice << "," << r.nmse << "," << r.psnr << "," << r.ssim << "\n";
  return s.str();
}

ComplexImage reconstruct(const Model& model, const PreparedSample& sample) {
  ComplexImage x = model_forward(model, sample.y, sample.mask, sample.maps);
  for (auto& v : x.data()) v *= sample.scale;
  return x;
}

ComplexImage reconstruct_zero_filled(const PreparedSample& sample) {
  ComplexImage x = adjoint_op(sample.y, sample.maps, sample.mask);
  for (auto& v : x.data()) v *= sample.scale;
  return x;
}

MetricReport evaluate(const Reconstructor& recon, const Dataset& dataset, int acceleration,
                      const std::vector<int>& slices, std::string identity) {
  dataset.acceleration_index(acceleration);
  MetricReport report;
  report.model = std::move(identity);
  report.acceleration = acceleration;
  report.slices.resize(slices.size());
  std::exception_ptr failure;

#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < slices.size(); ++i) {
    try {
      const PreparedSample sample = prepare_sample(dataset, slices[i], acceleration);
      const ComplexImage x = recon(sample);
      const ComplexImage gt = dataset.ground_truth(slices[i]);
      report.slices[i] = {slices[i], nmse(x, gt, sample.foreground), psnr(x, gt, sample.foreground),
                          ssim_metric(x, gt, sample.foreground)};
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  report.finalize();
  return report;
}

MetricReport evaluate(const Model& model, const Dataset& dataset, int acceleration, const std::vector<int>& slices,
                      std::string identity) {
  require_same_grid(dataset.grid(), {model.config.height, model.config.width}, "model vs dataset");
  return evaluate([&](const PreparedSample& s) { return reconstruct(model, s); }, dataset, acceleration, slices,
                  std::move(identity));
}

MetricReport evaluate_zero_filled(const Dataset& dataset, int acceleration, const std::vector<int>& slices) {
  return evaluate(reconstruct_zero_filled, dataset, acceleration, slices, "zero-filled");
}

}  // namespace pmri
