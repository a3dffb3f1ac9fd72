#include "pmri/cli.hpp"

#include <cmath>
#include <cstdio>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "binary_io.hpp"
#include "pmri/png.hpp"
#include "pmri/service.hpp"

namespace pmri {

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  io::write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

std::string alpha_label(double alpha) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(4) << alpha;
  return s.str();
}

RunConfig load_config(const std::string& path, std::optional<std::uint64_t> seed) {
  RunConfig c = path.empty() ? RunConfig{} : RunConfig::load(path);
  if (seed) {
    c.set_seed(*seed);
    c.validate();
  }
  return c;
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> grid;
  std::stringstream s(text);
  std::string item;
  while (std::getline(s, item, ',')) {
    try {
      std::size_t used = 0;
      grid.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw UsageError("grid entry '" + item + "' is not a number");
    }
  }
  if (grid.empty()) throw UsageError("grid is empty");
  return grid;
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const DivergenceError*>(&e)) return kExitDivergence;
  if (dynamic_cast<const UsageError*>(&e) || dynamic_cast<const ConfigError*>(&e) ||
      dynamic_cast<const InterpSpecError*>(&e)) {
    return kExitUsage;
  }
  if (dynamic_cast<const FormatError*>(&e) || dynamic_cast<const IoError*>(&e) ||
      dynamic_cast<const IncompatibleModelsError*>(&e) || dynamic_cast<const DimensionError*>(&e) ||
      dynamic_cast<const DegenerateSupportError*>(&e) || dynamic_cast<const UndefinedMetricError*>(&e) ||
      dynamic_cast<const NumericDomainError*>(&e) || dynamic_cast<const fs::filesystem_error*>(&e)) {
    return kExitData;
  }
  return kExitFailure;
}

Dataset cmd_simulate(const RunConfig& config, const fs::path& out) {
  Dataset ds = build_dataset(config.data);
  ensure_parent(out);
  write_dataset(ds, out);
  return ds;
}

TrainResult cmd_train(const RunConfig& config, const fs::path& dataset, Phase phase, const fs::path& pretrained,
                      const fs::path& out) {
  if (phase != Phase::SnPretrain && pretrained.empty()) {
    throw UsageError(to_string(phase) + " needs --pretrained <SN checkpoint>");
  }
  std::optional<ModelCheckpoint> base;
  if (!pretrained.empty()) base = load_checkpoint(pretrained);
  const Dataset ds = read_dataset(dataset);
  TrainResult r = train(ds, config.model, config.train_config(phase), base ? &*base : nullptr);
  ensure_parent(out);
  save_checkpoint(r.checkpoint, out);
  write_text(fs::path(out.string() + ".report.json"), r.report.to_json());
  return r;
}

ModelCheckpoint cmd_interp(const fs::path& first, const fs::path& second, double alpha, bool allow_extrapolation,
                           const fs::path& out) {
  return cmd_interp(std::vector<fs::path>{first, second}, {1.0 - alpha, alpha}, allow_extrapolation, out);
}

ModelCheckpoint cmd_interp(const std::vector<fs::path>& sources, const std::vector<double>& coefficients,
                           bool allow_extrapolation, const fs::path& out) {
  InterpSpec probe;
  probe.sources.assign(sources.size(), nullptr);
  probe.coefficients = coefficients;
  probe.allow_extrapolation = allow_extrapolation;
  probe.validate();

  std::vector<ModelCheckpoint> models;
  models.reserve(sources.size());
  for (const auto& p : sources) models.push_back(load_checkpoint(p));
  InterpSpec spec;
  for (std::size_t i = 0; i < models.size(); ++i) {
    spec.sources.push_back(&models[i]);
    spec.labels.push_back(sources[i].filename().string());
  }
  spec.coefficients = coefficients;
  spec.allow_extrapolation = allow_extrapolation;
  ModelCheckpoint result = interpolate(spec);
  ensure_parent(out);
  save_checkpoint(result, out);
  return result;
}

std::vector<MetricReport> cmd_eval(const RunConfig&, const fs::path& checkpoint, const fs::path& dataset,
                                   const fs::path& out_dir, const std::string& name) {
  const Dataset ds = read_dataset(dataset);
  std::optional<ModelCheckpoint> ckpt;
  if (!checkpoint.empty()) ckpt = load_checkpoint(checkpoint);
  std::vector<MetricReport> reports;
  for (int af : ds.manifest().accelerations) {
    MetricReport r = ckpt ? evaluate(ckpt->model(), ds, af, ds.validation_indices(), to_string(ckpt->tag))
                          : evaluate_zero_filled(ds, af, ds.validation_indices());
    const std::string stem = name + "_af" + std::to_string(af);
    write_text(out_dir / (stem + ".json"), r.to_json());
    write_text(out_dir / (stem + ".csv"), r.to_csv());
    reports.push_back(std::move(r));
  }
  return reports;
}

SweepTable cmd_sweep(const RunConfig& config, const fs::path& sn, const fs::path& gan, const std::vector<double>& grid,
                     const fs::path& dataset, const fs::path& out_dir) {
  const ModelCheckpoint a = load_checkpoint(sn);
  const ModelCheckpoint b = load_checkpoint(gan);
  const Dataset ds = read_dataset(dataset);
  const int af = config.metrics.acceleration;
  const std::vector<int> val = ds.validation_indices();
  for (int s : config.metrics.sweep_slices) {
    if (s < 0 || s >= static_cast<int>(val.size())) throw ConfigError("sweep slice " + std::to_string(s) + " out of range");
  }
  fs::create_directories(out_dir);

  const SweepHook hook = [&](const ModelCheckpoint& model, double alpha) {
    const Model m = model.model();
    const MetricReport r = evaluate(m, ds, af, val, "alpha=" + alpha_label(alpha));
    for (int s : config.metrics.sweep_slices) {
      const PreparedSample sample = prepare_sample(ds, val[s], af);
      const RealImage image = magnitude(reconstruct(m, sample));
      const RealImage gt = magnitude(ds.ground_truth(val[s]));
      double window = 0.0;
      for (double v : gt.data) window = std::max(window, v);
      const std::string png = encode_png_gray8(window_gray8(image, window), image.width, image.height);
      write_text(out_dir / ("slice" + std::to_string(s) + "_alpha" + alpha_label(alpha) + ".png"), png);
    }
    return SweepMetrics{{"nmse", "psnr", "ssim"}, {r.nmse.mean, r.psnr.mean, r.ssim.mean}};
  };
  SweepTable table = sweep(grid, a, b, hook, config.interp.allow_extrapolation);
  write_text(out_dir / "sweep.csv", table.to_csv());
  return table;
}

void cmd_serve(const RunConfig& config, const fs::path& sn, const fs::path& gan, const fs::path& dataset,
               const std::string& host, int port) {
  const ReconService service(load_checkpoint(sn), load_checkpoint(gan), read_dataset(dataset),
                             config.metrics.acceleration, static_cast<std::size_t>(config.serve.cache_entries));
  HttpServer server(service);
  const int bound = server.bind(host, port);
  std::cerr << "serving on http://" << host << ":" << bound << "\n";
  server.listen();
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Parallel MRI reconstruction with deep network interpolation"};
  app.require_subcommand(1);

  std::string config_path, out;
  std::optional<std::uint64_t> seed;
  auto common = [&](CLI::App* sub, bool needs_out) {
    sub->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Override the top-level seed");
    auto* o = sub->add_option("--out", out, "Output path");
    if (needs_out) o->required();
  };

  auto* simulate = app.add_subcommand("simulate", "Simulate a multi-coil dataset");
  common(simulate, true);

  std::string data, phase_name = "sn-pretrain", pretrained;
  auto* train_cmd = app.add_subcommand("train", "Train one phase (sn-pretrain, sn-finetune, sn-gan-finetune)");
  common(train_cmd, true);
  train_cmd->add_option("--data", data, "Dataset file")->required();
  train_cmd->add_option("--phase", phase_name, "Training phase");
  train_cmd->add_option("--pretrained", pretrained, "Pretrained SN checkpoint (finetune phases)");

  std::string sn, gan;
  std::optional<double> alpha;
  std::vector<std::string> models;
  std::vector<double> coefficients;
  bool extrapolate = false;
  auto* interp_cmd = app.add_subcommand("interp", "Interpolate checkpoints");
  common(interp_cmd, true);
  interp_cmd->add_option("--sn", sn, "SN checkpoint (alpha = 0)");
  interp_cmd->add_option("--gan", gan, "SN-GAN checkpoint (alpha = 1)");
  interp_cmd->add_option("--alpha", alpha, "Interpolation coefficient");
  interp_cmd->add_option("--models", models, "Checkpoints for a multi-model combination");
  interp_cmd->add_option("--coefficients", coefficients, "One coefficient per --models entry");
  interp_cmd->add_flag("--allow-extrapolation", extrapolate, "Accept coefficients outside [0, 1]");

  std::string checkpoint, name = "metrics";
  bool zero_filled = false;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on the validation split");
  common(eval_cmd, true);
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint to evaluate");
  eval_cmd->add_flag("--zero-filled", zero_filled, "Evaluate the zero-filled baseline instead");
  eval_cmd->add_option("--data", data, "Dataset file")->required();
  eval_cmd->add_option("--name", name, "Report file stem");

  std::string grid_text;
  auto* sweep_cmd = app.add_subcommand("sweep", "Sweep alpha between two checkpoints");
  common(sweep_cmd, true);
  sweep_cmd->add_option("--sn", sn, "SN checkpoint")->required();
  sweep_cmd->add_option("--gan", gan, "SN-GAN checkpoint")->required();
  sweep_cmd->add_option("--data", data, "Dataset file")->required();
  sweep_cmd->add_option("--grid", grid_text, "Comma-separated alpha values (default: interp.grid_points)");

  std::string host;
  int port = -1;
  auto* serve_cmd = app.add_subcommand("serve", "Serve alpha-parameterized reconstructions over HTTP");
  common(serve_cmd, false);
  serve_cmd->add_option("--sn", sn, "SN checkpoint")->required();
  serve_cmd->add_option("--gan", gan, "SN-GAN checkpoint")->required();
  serve_cmd->add_option("--data", data, "Dataset file")->required();
  serve_cmd->add_option("--host", host, "Bind address (default: serve.host)");
  serve_cmd->add_option("--port", port, "Port (default: serve.port)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    const RunConfig config = load_config(config_path, seed);
    if (simulate->parsed()) {
      const Dataset ds = cmd_simulate(config, out);
      std::cout << "wrote " << ds.size() << " slices to " << out << "\n";
    } else if (train_cmd->parsed()) {
      const TrainResult r = cmd_train(config, data, phase_from_string(phase_name), pretrained, out);
      std::cout << "wrote " << to_string(r.checkpoint.tag) << " checkpoint to " << out << "\n";
      for (const auto& v : r.report.validation) {
        std::cout << "  validation AF" << v.acceleration << ": NMSE " << v.nmse << ", PSNR " << v.psnr << ", SSIM "
                  << v.ssim << "\n";
      }
    } else if (interp_cmd->parsed()) {
      if (!models.empty()) {
        if (alpha || !sn.empty() || !gan.empty()) throw UsageError("use either --models/--coefficients or --sn/--gan/--alpha");
        std::vector<fs::path> paths(models.begin(), models.end());
        cmd_interp(paths, coefficients, extrapolate, out);
      } else {
        if (sn.empty() || gan.empty()) throw UsageError("interp needs --sn and --gan (or --models)");
        cmd_interp(sn, gan, alpha.value_or(config.interp.alpha), extrapolate || config.interp.allow_extrapolation, out);
      }
      std::cout << "wrote interpolated checkpoint to " << out << "\n";
    } else if (eval_cmd->parsed()) {
      if (zero_filled == !checkpoint.empty()) throw UsageError("eval needs exactly one of --checkpoint or --zero-filled");
      for (const auto& r : cmd_eval(config, checkpoint, data, out, name)) {
        std::cout << r.model << " AF" << r.acceleration << ": NMSE " << r.nmse.mean << " +- " << r.nmse.std << ", PSNR "
                  << r.psnr.mean << " +- " << r.psnr.std << ", SSIM " << r.ssim.mean << " +- " << r.ssim.std << "\n";
      }
    } else if (sweep_cmd->parsed()) {
      const std::vector<double> grid =
          grid_text.empty() ? uniform_grid(config.interp.grid_points) : parse_grid(grid_text);
      std::cout << cmd_sweep(config, sn, gan, grid, data, out).to_csv();
    } else if (serve_cmd->parsed()) {
      cmd_serve(config, sn, gan, data, host.empty() ? config.serve.host : host, port < 0 ? config.serve.port : port);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kExitOk;
}

}  // namespace pmri
