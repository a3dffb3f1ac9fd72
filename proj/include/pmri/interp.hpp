#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "pmri/network.hpp"

namespace pmri {

enum class LossTag { SN, SNGAN, Interp };

std::string to_string(LossTag tag);
LossTag loss_tag_from_string(const std::string& s);

/// Sources and coefficients of an interpolated checkpoint.
struct Provenance {
  std::vector<std::string> sources;
  std::vector<double> coefficients;

  bool operator==(const Provenance&) const = default;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct ModelCheckpoint {
  std::uint32_t version = kCheckpointVersion;
  ModelConfig config;
  LossTag tag = LossTag::SN;
  Provenance provenance;
  ParameterSet params;

  Model model() const { return {config, params}; }
  std::string descriptor() const { return config.descriptor(); }
};

/// MRIN format; byte layout in docs/formats.md. Saving then loading is
/// bit-exact for every parameter.
void save_checkpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_checkpoint(const ModelCheckpoint& ckpt);

/// Validates magic, version, descriptor, parameter names/shapes and
/// provenance before returning. Errors: BadMagicError, VersionError,
/// TruncationError, DescriptorError.
ModelCheckpoint load_checkpoint(const std::filesystem::path& path);
ModelCheckpoint decode_checkpoint(std::span<const std::uint8_t> bytes, const std::string& context = "checkpoint");

struct CompatibilityReport {
  bool ok = true;
  std::string mismatch;  // names the first differing entry
};

/// ok iff descriptors and parameter name/shape lists are identical.
CompatibilityReport validate_compatibility(const ModelCheckpoint& a, const ModelCheckpoint& b);

struct InterpSpec {
  std::vector<const ModelCheckpoint*> sources;
  std::vector<std::string> labels;  // provenance names, optional
  std::vector<double> coefficients;
  bool allow_extrapolation = false;

  /// (1 - alpha) * first + alpha * second.
  static InterpSpec pair(const ModelCheckpoint& first, const ModelCheckpoint& second, double alpha,
                         std::string first_label = "SN", std::string second_label = "SN-GAN");

  /// Throws InterpSpecError for bad lengths, sums != 1 (1e-9) or coefficients
  /// outside [0, 1] without allow_extrapolation.
  void validate() const;
};

/// Coefficient-weighted sum of every parameter (weights and biases alike),
/// accumulated in 64-bit and stored in 32-bit. Throws IncompatibleModelsError
/// with the mismatch report if the sources differ structurally.
ModelCheckpoint interpolate(const InterpSpec& spec);

struct SweepRow {
  double alpha = 0.0;
  std::vector<double> values;
};

struct SweepTable {
  std::vector<std::string> columns;  // metric names (alpha column implicit)
  std::vector<SweepRow> rows;

  /// Header row "alpha,<columns...>", then one line per row.
  std::string to_csv() const;
};

struct SweepMetrics {
  std::vector<std::string> names;
  std::vector<double> values;
};

using SweepHook = std::function<SweepMetrics(const ModelCheckpoint& model, double alpha)>;

/// Builds each interpolated model on demand and evaluates it with `hook`.
SweepTable sweep(const std::vector<double>& grid, const ModelCheckpoint& first, const ModelCheckpoint& second,
                 const SweepHook& hook, bool allow_extrapolation = false);

/// Evenly spaced grid of `points` values over [0, 1].
std::vector<double> uniform_grid(int points);

}  // namespace pmri
