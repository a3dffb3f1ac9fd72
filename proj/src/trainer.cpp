#include "pmri/trainer.hpp"

#include <chrono>
#include <cmath>
#include <exception>
#include <numeric>
#include <random>

#include "json.hpp"
#include "pmri/datasim.hpp"
#include "pmri/metrics.hpp"

namespace pmri {

using nlohmann::json;

namespace {

struct SampleStep {
  double loss = 0.0;
  Gradients grads;
};

struct DiscriminatorStep {
  double loss = 0.0;
  Gradients grads;
};

// Fisher-Yates with the raw engine output so the order does not depend on
// the standard library's distribution implementations.
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(derive_seed(seed, 0x5348, static_cast<std::uint64_t>(epoch)));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  return order;
}

std::vector<PreparedSample> training_samples(const Dataset& dataset, const std::vector<int>& accelerations) {
  const std::vector<int> slices = dataset.train_indices();
  if (slices.empty()) throw ConfigError("dataset has no training slices");
  std::vector<PreparedSample> samples(slices.size() * accelerations.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < samples.size(); ++i) {
    samples[i] = prepare_sample(dataset, slices[i % slices.size()], accelerations[i / slices.size()]);
  }
  return samples;
}

SampleStep generator_sn_step(const Model& model, const PreparedSample& s, const LossConfig& loss) {
  Tape tape;
  const ComplexImage x = model_forward(model, s.y, s.mask, s.maps, &tape);
  const LossValue l = sn_loss(magnitude(x), magnitude(s.target), loss);
  ModelGradients g = model_backward(std::move(tape), magnitude_backward(x, l.grad), model.params);
  return {l.value, std::move(g.params)};
}

SampleStep generator_gan_step(const Model& model, const PreparedSample& s, const ParameterSet& disc,
                              const TrainConfig& config) {
  Tape tape;
  const ComplexImage x = model_forward(model, s.y, s.mask, s.maps, &tape);
  const GanLossValue l =
      sn_gan_loss(magnitude(x), magnitude(s.target), s.foreground, disc, config.discriminator, config.loss);
  ModelGradients g = model_backward(std::move(tape), magnitude_backward(x, l.grad), model.params);
  return {l.value, std::move(g.params)};
}

DiscriminatorStep discriminator_step(const Model& model, const PreparedSample& s, const ParameterSet& disc,
                                     const DiscriminatorConfig& config) {
  const RealImage real = apply_foreground(magnitude(s.target), s.foreground);
  const RealImage fake = apply_foreground(magnitude(model_forward(model, s.y, s.mask, s.maps)), s.foreground);

  Tape real_tape, fake_tape;
  const double d_real = discriminator_forward(real, disc, config, &real_tape);
  const double d_fake = discriminator_forward(fake, disc, config, &fake_tape);
  DiscriminatorGradients gr = discriminator_backward(std::move(real_tape), d_real - 1.0, disc);
  DiscriminatorGradients gf = discriminator_backward(std::move(fake_tape), d_fake, disc);
  for (std::size_t p = 0; p < gr.params.size(); ++p) {
    for (std::size_t k = 0; k < gr.params[p].size(); ++k) gr.params[p][k] += gf.params[p][k];
  }
  return {lsgan_d_loss(d_real, d_fake), std::move(gr.params)};
}

// Evaluates `step` on every sample of the batch (possibly concurrently), then
// reduces the gradients in batch order.
template <typename Step>
SampleStep batch_mean(const std::vector<std::size_t>& batch, const ParameterSet& shape_of, Step&& step) {
  std::vector<SampleStep> results(batch.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (std::size_t b = 0; b < batch.size(); ++b) {
    try {
      results[b] = step(batch[b]);
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  SampleStep mean{0.0, zero_gradients(shape_of)};
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (const SampleStep& r : results) {
    mean.loss += r.loss * inv;
    for (std::size_t p = 0; p < mean.grads.size(); ++p) {
      for (std::size_t k = 0; k < mean.grads[p].size(); ++k) mean.grads[p][k] += r.grads[p][k] * inv;
    }
  }
  return mean;
}

void guard(double loss, const char* what, int epoch, std::size_t batch) {
  if (!std::isfinite(loss)) {
    throw DivergenceError(std::string(what) + " loss became non-finite at epoch " + std::to_string(epoch) +
                          ", batch " + std::to_string(batch));
  }
}

std::vector<ValidationRecord> validate_model(const Model& model, const Dataset& dataset,
                                             const std::vector<int>& accelerations) {
  std::vector<ValidationRecord> out;
  const std::vector<int> slices = dataset.validation_indices();
  if (slices.empty()) return out;
  for (int af : accelerations) {
    const MetricReport r = evaluate(model, dataset, af, slices, "validation");
    out.push_back({af, r.nmse.mean, r.psnr.mean, r.ssim.mean});
  }
  return out;
}

json config_json(const TrainConfig& c) {
  return {{"phase", to_string(c.phase)},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"rho", c.rho},
          {"epsilon", c.epsilon},
          {"seed", c.seed},
          {"accelerations", c.accelerations},
          {"loss",
           {{"lambda", c.loss.lambda},
            {"gamma", c.loss.gamma},
            {"ssim_window", c.loss.ssim_window},
            {"k1", c.loss.k1},
            {"k2", c.loss.k2}}},
          {"discriminator",
           {{"widths", c.discriminator.widths},
            {"kernel", c.discriminator.kernel},
            {"slope", c.discriminator.slope},
            {"seed", c.discriminator.seed}}}};
}

void check_grid(const Dataset& dataset, const ModelConfig& model) {
  const DatasetManifest& m = dataset.manifest();
  if (m.height != model.height || m.width != model.width || m.coils != model.coils) {
    throw DimensionError("model expects " + std::to_string(model.height) + "x" + std::to_string(model.width) + " with " +
                         std::to_string(model.coils) + " coils, dataset is " + std::to_string(m.height) + "x" +
                         std::to_string(m.width) + " with " + std::to_string(m.coils) + " coils");
  }
}

TrainResult run(Model model, const Dataset& dataset, const TrainConfig& config, LossTag tag) {
  config.validate();
  check_grid(dataset, model.config);
  for (int af : config.accelerations) dataset.acceleration_index(af);

  const auto start = std::chrono::steady_clock::now();
  TrainReport report;
  report.phase = config.phase;
  report.seed = config.seed;
  report.config_echo = config_json(config).dump();

  const bool gan = config.phase == Phase::SnGanFinetune;
  ParameterSet disc;
  RmsState g_state = zero_state(model.params), d_state;
  if (gan) {
    config.discriminator.validate();
    disc = init_discriminator(config.discriminator);
    d_state = zero_state(disc);
  }

  std::vector<PreparedSample> samples;
  if (config.epochs > 0) samples = training_samples(dataset, config.accelerations);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const std::vector<std::size_t> order = epoch_order(samples.size(), config.seed, epoch);
    EpochRecord rec{epoch + 1, 0.0, 0.0};
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(config.batch_size));
      const std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                           order.begin() + static_cast<std::ptrdiff_t>(end));
      if (gan) {
        const SampleStep d = batch_mean(batch, disc, [&](std::size_t i) {
          DiscriminatorStep s = discriminator_step(model, samples[i], disc, config.discriminator);
          return SampleStep{s.loss, std::move(s.grads)};
        });
        guard(d.loss, "discriminator", epoch + 1, batches);
        rmsprop_step(disc, d.grads, d_state, config.learning_rate, config.rho, config.epsilon);
        rec.discriminator_loss += d.loss;

        const SampleStep g = batch_mean(batch, model.params, [&](std::size_t i) {
          return generator_gan_step(model, samples[i], disc, config);
        });
        guard(g.loss, "generator", epoch + 1, batches);
        rmsprop_step(model.params, g.grads, g_state, config.learning_rate, config.rho, config.epsilon);
        rec.loss += g.loss;
      } else {
        const SampleStep g = batch_mean(batch, model.params, [&](std::size_t i) {
          return generator_sn_step(model, samples[i], config.loss);
        });
        guard(g.loss, "SN", epoch + 1, batches);
        rmsprop_step(model.params, g.grads, g_state, config.learning_rate, config.rho, config.epsilon);
        rec.loss += g.loss;
      }
      ++batches;
    }
    rec.loss /= static_cast<double>(batches);
    rec.discriminator_loss /= static_cast<double>(batches);
    report.epochs.push_back(rec);
  }

  report.validation = validate_model(model, dataset, config.accelerations);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  ModelCheckpoint ckpt;
  ckpt.config = model.config;
  ckpt.tag = tag;
  ckpt.params = std::move(model.params);
  return {std::move(ckpt), std::move(report)};
}

}  // namespace

std::string to_string(Phase phase) {
  switch (phase) {
    case Phase::SnPretrain:
      return "sn-pretrain";
    case Phase::SnFinetune:
      return "sn-finetune";
    case Phase::SnGanFinetune:
      return "sn-gan-finetune";
  }
  return "?";
}

Phase phase_from_string(const std::string& s) {
  if (s == "sn-pretrain") return Phase::SnPretrain;
  if (s == "sn-finetune") return Phase::SnFinetune;
  if (s == "sn-gan-finetune") return Phase::SnGanFinetune;
  throw ConfigError("unknown training phase '" + s + "' (expected sn-pretrain, sn-finetune or sn-gan-finetune)");
}

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be > 0");
  if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("rho must lie in (0, 1)");
  if (!(epsilon >= 0.0)) throw ConfigError("epsilon must be >= 0");
  if (accelerations.empty()) throw ConfigError("training needs at least one acceleration factor");
  loss.validate();
}

RmsState zero_state(const ParameterSet& params) { return zero_gradients(params); }

void rmsprop_step(ParameterSet& params, const Gradients& grads, RmsState& state, double lr, double rho, double eps) {
  if (grads.size() != params.size() || state.size() != params.size()) {
    throw DimensionError("rmsprop_step: parameter, gradient and state counts differ");
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& theta = params[p].values;
    if (grads[p].size() != theta.size() || state[p].size() != theta.size()) {
      throw DimensionError("rmsprop_step: size mismatch for '" + params[p].name + "'");
    }
    for (std::size_t k = 0; k < theta.size(); ++k) {
      const double g = grads[p][k];
      state[p][k] = rho * state[p][k] + (1.0 - rho) * g * g;
      theta[k] = static_cast<float>(static_cast<double>(theta[k]) - lr * g / (std::sqrt(state[p][k]) + eps));
    }
  }
}

std::string TrainReport::to_json() const {
  json epochs_json = json::array();
  for (const auto& e : epochs) {
    json row = {{"epoch", e.epoch}, {"loss", e.loss}};
    if (phase == Phase::SnGanFinetune) row["discriminator_loss"] = e.discriminator_loss;
    epochs_json.push_back(row);
  }
  json val = json::array();
  for (const auto& v : validation) {
    val.push_back({{"acceleration", v.acceleration}, {"nmse", v.nmse}, {"psnr", v.psnr}, {"ssim", v.ssim}});
  }
  json j = {{"phase", to_string(phase)},
            {"seed", seed},
            {"epochs", epochs_json},
            {"validation", val},
            {"wall_seconds", wall_seconds},
            {"config", json::parse(config_echo.empty() ? "{}" : config_echo)}};
  return j.dump(2);
}

TrainResult train_sn(const Dataset& dataset, const ModelConfig& model, const TrainConfig& config) {
  model.validate();
  return run(Model{model, init_model(model)}, dataset, config, LossTag::SN);
}

TrainResult finetune_sn(const ModelCheckpoint& pretrained, const Dataset& dataset, const TrainConfig& config) {
  return run(pretrained.model(), dataset, config, LossTag::SN);
}

TrainResult finetune_sn_gan(const ModelCheckpoint& pretrained, const Dataset& dataset, const TrainConfig& config) {
  TrainConfig c = config;
  c.phase = Phase::SnGanFinetune;
  return run(pretrained.model(), dataset, c, LossTag::SNGAN);
}

TrainResult train(const Dataset& dataset, const ModelConfig& model, const TrainConfig& config,
                  const ModelCheckpoint* pretrained) {
  switch (config.phase) {
    case Phase::SnPretrain:
      return train_sn(dataset, model, config);
    case Phase::SnFinetune:
    case Phase::SnGanFinetune:
      if (!pretrained) throw UsageError(to_string(config.phase) + " needs a pretrained SN checkpoint");
      if (pretrained->config.descriptor() != model.descriptor()) {
        throw IncompatibleModelsError("pretrained checkpoint architecture does not match the model config");
      }
      return config.phase == Phase::SnFinetune ? finetune_sn(*pretrained, dataset, config)
                                               : finetune_sn_gan(*pretrained, dataset, config);
  }
  throw ConfigError("unknown phase");
}

}  // namespace pmri
