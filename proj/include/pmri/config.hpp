#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pmri/dataset.hpp"
#include "pmri/losses.hpp"
#include "pmri/network.hpp"
#include "pmri/trainer.hpp"

namespace pmri {

struct TrainSchedule {
  int batch_size = 4;
  double rho = 0.99;
  double epsilon = 1e-8;
  std::vector<int> accelerations{4};
  int pretrain_epochs = 15;
  double pretrain_learning_rate = 1e-4;
  int finetune_epochs = 5;
  double finetune_learning_rate = 5e-5;
};

struct InterpSettings {
  double alpha = 0.5;
  int grid_points = 5;
  bool allow_extrapolation = false;
};

struct MetricSettings {
  int acceleration = 4;
  std::vector<int> sweep_slices{0};  // positions within the validation split
};

struct ServeSettings {
  std::string host = "127.0.0.1";
  int port = 8080;
  int cache_entries = 32;
};

/// Whole-pipeline configuration. JSON with sections data, model,
/// discriminator, train, loss, interp, metrics, serve and a top-level seed.
/// Every section and key is optional; unknown keys are a ConfigError.
struct RunConfig {
  std::uint64_t seed = 1;
  DataConfig data;
  ModelConfig model;  // grid and coil count follow `data`
  DiscriminatorConfig discriminator;
  TrainSchedule train;
  LossConfig loss;
  InterpSettings interp;
  MetricSettings metrics;
  ServeSettings serve;

  static RunConfig from_json(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);
  /// Full echo, defaults included.
  std::string to_json() const;

  /// Replaces the top-level seed and re-derives the per-component seeds.
  void set_seed(std::uint64_t s);
  void validate() const;

  TrainConfig train_config(Phase phase) const;
};

}  // namespace pmri
