#pragma once

#include <cstddef>
#include <memory>
#include <string>

#include "pmri/dataset.hpp"
#include "pmri/interp.hpp"
#include "pmri/metrics.hpp"

namespace pmri {

struct ReconMetrics {
  double nmse = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct ReconResult {
  RealImage magnitude;  // data units
  ReconMetrics metrics;
};

/// Alpha-parameterized reconstruction over an immutable SN / SN-GAN pair and
/// the validation split of a dataset. Thread-safe.
class ReconService {
 public:
  /// Throws IncompatibleModelsError or DimensionError on bad inputs.
  ReconService(ModelCheckpoint sn, ModelCheckpoint gan, Dataset dataset, int acceleration,
               std::size_t cache_entries = 32);
  ~ReconService();

  int slice_count() const;
  std::string meta_json() const;
  RealImage ground_truth(int slice) const;

  /// Alpha follows the interp rules (InterpSpecError outside [0, 1]);
  /// slice out of range is a DimensionError.
  std::shared_ptr<const ReconResult> reconstruct(int slice, double alpha) const;

  std::size_t cached_models() const;
  std::size_t cached_reconstructions() const;

 private:
  struct State;
  std::unique_ptr<State> state_;
};

/// HTTP front end:
///   GET /api/meta
///   GET /api/slices/{i}/groundtruth[?format=png|raw]
///   GET /api/recon?slice=i&alpha=a[&format=png|raw][&metrics=1]
/// Raw bodies are little-endian float32 magnitudes, row-major. Every recon
/// response carries an X-Metrics JSON header; metrics=1 returns that JSON as
/// the body instead of the image.
class HttpServer {
 public:
  explicit HttpServer(const ReconService& service);
  ~HttpServer();

  /// Port 0 picks a free port. Returns the bound port; IoError on failure.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace pmri
