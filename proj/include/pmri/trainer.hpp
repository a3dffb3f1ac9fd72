#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pmri/dataset.hpp"
#include "pmri/interp.hpp"
#include "pmri/losses.hpp"
#include "pmri/network.hpp"

namespace pmri {

enum class Phase { SnPretrain, SnFinetune, SnGanFinetune };

std::string to_string(Phase phase);
Phase phase_from_string(const std::string& s);  // "sn-pretrain", "sn-finetune", "sn-gan-finetune"

struct TrainConfig {
  Phase phase = Phase::SnPretrain;
  int epochs = 15;
  int batch_size = 4;
  double learning_rate = 1e-4;
  double rho = 0.99;
  double epsilon = 1e-8;
  std::uint64_t seed = 1;  // shuffle order
  std::vector<int> accelerations{4};
  LossConfig loss;
  DiscriminatorConfig discriminator;  // SN-GAN phase only

  void validate() const;
};

/// Per-parameter squared-gradient averages.
using RmsState = std::vector<std::vector<double>>;
RmsState zero_state(const ParameterSet& params);

/// s <- rho s + (1 - rho) g^2; theta <- theta - lr g / (sqrt(s) + eps).
/// DimensionError if params, grads and state disagree.
void rmsprop_step(ParameterSet& params, const Gradients& grads, RmsState& state, double lr, double rho, double eps);

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;                // mean generator loss over the epoch
  double discriminator_loss = 0.0;  // SN-GAN phase only
};

struct ValidationRecord {
  int acceleration = 0;
  double nmse = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct TrainReport {
  Phase phase = Phase::SnPretrain;
  std::uint64_t seed = 0;
  std::vector<EpochRecord> epochs;
  std::vector<ValidationRecord> validation;
  double wall_seconds = 0.0;
  std::string config_echo;  // JSON of the TrainConfig

  std::string to_json() const;
};

struct TrainResult {
  ModelCheckpoint checkpoint;
  TrainReport report;
};

/// Minimizes 1 - SSIM + lambda L1 from a fresh initialization of `model`.
TrainResult train_sn(const Dataset& dataset, const ModelConfig& model, const TrainConfig& config);

/// Same loss, starting from `pretrained`.
TrainResult finetune_sn(const ModelCheckpoint& pretrained, const Dataset& dataset, const TrainConfig& config);

/// Alternates one discriminator step and one generator step per batch. The
/// discriminator starts fresh from config.discriminator.seed.
TrainResult finetune_sn_gan(const ModelCheckpoint& pretrained, const Dataset& dataset, const TrainConfig& config);

/// Dispatch on config.phase; finetune phases require `pretrained`.
TrainResult train(const Dataset& dataset, const ModelConfig& model, const TrainConfig& config,
                  const ModelCheckpoint* pretrained);

}  // namespace pmri
