#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pmri/types.hpp"

namespace pmri {

struct DataConfig {
  int height = 64;
  int width = 64;
  int coils = 4;
  int train_slices = 200;
  int validation_slices = 40;
  std::vector<int> accelerations{4, 8};
  double center_fraction = 0.08;
  double noise_sigma = 0.0;
  int support_margin = 3;  // sensitivity support = foreground dilated by this
  std::uint64_t seed = 1;

  void validate() const;
};

struct DatasetManifest {
  int slice_count = 0;
  int train_count = 0;
  int validation_count = 0;
  int height = 0;
  int width = 0;
  int coils = 0;
  std::vector<int> accelerations;
  double center_fraction = 0.0;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t record_bytes = 0;
  std::vector<std::uint64_t> offsets;  // per slice, relative to the record section

  Grid grid() const { return {height, width}; }
};

/// One stored slice. Arrays are 32-bit as on disk.
struct SliceRecord {
  std::vector<std::complex<float>> ground_truth;   // H x W
  std::vector<std::uint8_t> foreground;            // H x W
  std::vector<std::uint8_t> support;               // H x W
  std::vector<std::complex<float>> sensitivities;  // C x H x W
  std::vector<std::vector<std::uint8_t>> masks;    // per acceleration, H x W
  std::vector<std::vector<std::complex<float>>> kspace;  // per acceleration, C x H x W

  bool operator==(const SliceRecord&) const = default;
};

class Dataset {
 public:
  Dataset() = default;
  Dataset(DatasetManifest manifest, std::vector<SliceRecord> slices);

  const DatasetManifest& manifest() const { return manifest_; }
  const std::vector<SliceRecord>& slices() const { return slices_; }
  int size() const { return static_cast<int>(slices_.size()); }
  Grid grid() const { return manifest_.grid(); }

  /// Training slices are [0, train_count); validation follow.
  std::vector<int> train_indices() const;
  std::vector<int> validation_indices() const;

  /// Position of `acceleration` in the manifest list; ConfigError if absent.
  int acceleration_index(int acceleration) const;

  ComplexImage ground_truth(int slice) const;
  BinaryMask foreground(int slice) const;
  SensitivityMaps sensitivities(int slice) const;
  SamplingMask mask(int slice, int acceleration) const;
  MultiCoilKSpace kspace(int slice, int acceleration) const;

 private:
  DatasetManifest manifest_;
  std::vector<SliceRecord> slices_;
};

/// Simulates every slice: phantom, maps on the dilated foreground, one VD
/// mask and k-space set per acceleration factor.
Dataset build_dataset(const DataConfig& config);

/// MRDS container; byte layout documented in docs/formats.md.
void write_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset read_dataset(const std::filesystem::path& path);

inline constexpr std::uint32_t kDatasetVersion = 1;

/// A slice ready for the network: everything divided by `scale`, the 99th
/// percentile magnitude of the zero-filled image.
struct PreparedSample {
  int index = 0;
  MultiCoilKSpace y;
  SamplingMask mask;
  SensitivityMaps maps;
  ComplexImage target;
  BinaryMask foreground;
  double scale = 1.0;
};

PreparedSample prepare_sample(const Dataset& dataset, int slice, int acceleration);

/// 99th-percentile magnitude (nearest-rank on sorted values).
double percentile99(const ComplexImage& x);

}  // namespace pmri
