#include "pmri/config.hpp"

#include <set>

#include "binary_io.hpp"
#include "json.hpp"
#include "pmri/datasim.hpp"

namespace pmri {

using nlohmann::json;

namespace {

// Reads typed keys from one JSON object and rejects the ones nobody asked for.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("config section '" + path_ + "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config key '" + path_ + "." + key + "' has the wrong type");
    }
  }

  Section child(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    static const json empty = json::object();
    return Section(it == j_.end() ? empty : *it, path_.empty() ? key : path_ + "." + key);
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError("unknown config key '" + (path_.empty() ? key : path_ + "." + key) + "'");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace

RunConfig RunConfig::from_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  Section top(root, "");
  std::uint64_t seed = c.seed;
  top.get("seed", seed);
  c.set_seed(seed);

  Section d = top.child("data");
  d.get("height", c.data.height);
  d.get("width", c.data.width);
  d.get("coils", c.data.coils);
  d.get("train_slices", c.data.train_slices);
  d.get("validation_slices", c.data.validation_slices);
  d.get("accelerations", c.data.accelerations);
  d.get("center_fraction", c.data.center_fraction);
  d.get("noise_sigma", c.data.noise_sigma);
  d.get("support_margin", c.data.support_margin);
  d.finish();

  Section m = top.child("model");
  m.get("cascades", c.model.cascades);
  m.get("widths", c.model.widths);
  m.get("kernel", c.model.kernel);
  m.get("downsample", c.model.downsample);
  m.finish();
  c.model.height = c.data.height;
  c.model.width = c.data.width;
  c.model.coils = c.data.coils;

  Section disc = top.child("discriminator");
  disc.get("widths", c.discriminator.widths);
  disc.get("kernel", c.discriminator.kernel);
  disc.get("slope", c.discriminator.slope);
  disc.finish();

  Section t = top.child("train");
  t.get("batch_size", c.train.batch_size);
  t.get("rho", c.train.rho);
  t.get("epsilon", c.train.epsilon);
  t.get("accelerations", c.train.accelerations);
  t.get("pretrain_epochs", c.train.pretrain_epochs);
  t.get("pretrain_learning_rate", c.train.pretrain_learning_rate);
  t.get("finetune_epochs", c.train.finetune_epochs);
  t.get("finetune_learning_rate", c.train.finetune_learning_rate);
  t.finish();

  Section l = top.child("loss");
  l.get("lambda", c.loss.lambda);
  l.get("gamma", c.loss.gamma);
  l.get("ssim_window", c.loss.ssim_window);
  l.get("k1", c.loss.k1);
  l.get("k2", c.loss.k2);
  l.finish();

  Section i = top.child("interp");
  i.get("alpha", c.interp.alpha);
  i.get("grid_points", c.interp.grid_points);
  i.get("allow_extrapolation", c.interp.allow_extrapolation);
  i.finish();

  Section me = top.child("metrics");
  me.get("acceleration", c.metrics.acceleration);
  me.get("sweep_slices", c.metrics.sweep_slices);
  me.finish();

  Section s = top.child("serve");
  s.get("host", c.serve.host);
  s.get("port", c.serve.port);
  s.get("cache_entries", c.serve.cache_entries);
  s.finish();

  top.finish();
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  return from_json(std::string(bytes.begin(), bytes.end()));
}

std::string RunConfig::to_json() const {
  const json j = {
      {"seed", seed},
      {"data",
       {{"height", data.height},
        {"width", data.width},
        {"coils", data.coils},
        {"train_slices", data.train_slices},
        {"validation_slices", data.validation_slices},
        {"accelerations", data.accelerations},
        {"center_fraction", data.center_fraction},
        {"noise_sigma", data.noise_sigma},
        {"support_margin", data.support_margin}}},
      {"model",
       {{"cascades", model.cascades},
        {"widths", model.widths},
        {"kernel", model.kernel},
        {"downsample", model.downsample}}},
      {"discriminator",
       {{"widths", discriminator.widths}, {"kernel", discriminator.kernel}, {"slope", discriminator.slope}}},
      {"train",
       {{"batch_size", train.batch_size},
        {"rho", train.rho},
        {"epsilon", train.epsilon},
        {"accelerations", train.accelerations},
        {"pretrain_epochs", train.pretrain_epochs},
        {"pretrain_learning_rate", train.pretrain_learning_rate},
        {"finetune_epochs", train.finetune_epochs},
        {"finetune_learning_rate", train.finetune_learning_rate}}},
      {"loss",
       {{"lambda", loss.lambda}, {"gamma", loss.gamma}, {"ssim_window", loss.ssim_window}, {"k1", loss.k1},
        {"k2", loss.k2}}},
      {"interp",
       {{"alpha", interp.alpha},
        {"grid_points", interp.grid_points},
        {"allow_extrapolation", interp.allow_extrapolation}}},
      {"metrics", {{"acceleration", metrics.acceleration}, {"sweep_slices", metrics.sweep_slices}}},
      {"serve", {{"host", serve.host}, {"port", serve.port}, {"cache_entries", serve.cache_entries}}}};
  return j.dump(2);
}

void RunConfig::set_seed(std::uint64_t s) {
  seed = s;
  data.seed = s;
  model.seed = derive_seed(s, 1);
  discriminator.seed = derive_seed(s, 2);
}

void RunConfig::validate() const {
  data.validate();
  model.validate();
  discriminator.validate();
  loss.validate();
  for (int af : train.accelerations) {
    bool found = false;
    for (int d : data.accelerations) found = found || d == af;
    if (!found) throw ConfigError("train.accelerations contains " + std::to_string(af) + " which data does not simulate");
  }
  bool metric_af = false;
  for (int d : data.accelerations) metric_af = metric_af || d == metrics.acceleration;
  if (!metric_af) throw ConfigError("metrics.acceleration is not among data.accelerations");
  if (interp.grid_points < 1) throw ConfigError("interp.grid_points must be >= 1");
  for (int s : metrics.sweep_slices) {
    if (s < 0 || s >= data.validation_slices) throw ConfigError("metrics.sweep_slices entry out of range");
  }
  if (serve.port < 0 || serve.port > 65535) throw ConfigError("serve.port out of range");
  if (serve.cache_entries < 1) throw ConfigError("serve.cache_entries must be >= 1");
  train_config(Phase::SnPretrain).validate();
  train_config(Phase::SnFinetune).validate();
}

TrainConfig RunConfig::train_config(Phase phase) const {
  TrainConfig t;
  t.phase = phase;
  const bool pre = phase == Phase::SnPretrain;
  t.epochs = pre ? train.pretrain_epochs : train.finetune_epochs;
  t.learning_rate = pre ? train.pretrain_learning_rate : train.finetune_learning_rate;
  t.batch_size = train.batch_size;
  t.rho = train.rho;
  t.epsilon = train.epsilon;
  t.seed = derive_seed(seed, 3, static_cast<std::uint64_t>(phase));
  t.accelerations = train.accelerations;
  t.loss = loss;
  t.discriminator = discriminator;
  return t;
}

}  // namespace pmri
