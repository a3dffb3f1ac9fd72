#include "pmri/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "json.hpp"
#include "pmri/fft.hpp"
#include "pmri/sense.hpp"

namespace pmri {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Configs and parameter layout

void ModelConfig::validate() const {
  if (cascades < 1) throw ConfigError("model: cascades must be >= 1");
  if (widths.size() != 2) throw ConfigError("model: widths must list {encoder, bottleneck}");
  for (int w : widths) {
    if (w < 1) throw ConfigError("model: widths must be >= 1");
  }
  if (kernel < 1 || kernel % 2 == 0) throw ConfigError("model: kernel size must be odd");
  if (downsample < 1) throw ConfigError("model: downsample factor must be >= 1");
  if (height < 1 || width < 1) throw ConfigError("model: grid must be >= 1x1");
  if (coils < 1) throw ConfigError("model: coils must be >= 1");
}

std::string ModelConfig::descriptor() const {
  json j = {{"type", "sensitivity-network"},
            {"cascades", cascades},
            {"widths", widths},
            {"kernel", kernel},
            {"downsample", downsample},
            {"height", height},
            {"width", width},
            {"coils", coils}};
  return j.dump();
}

ModelConfig ModelConfig::from_descriptor(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DescriptorError(std::string("architecture descriptor is not valid JSON: ") + e.what());
  }
  static const std::set<std::string> keys{"type", "cascades", "widths", "kernel", "downsample", "height", "width", "coils"};
  if (!j.is_object()) throw DescriptorError("architecture descriptor must be an object");
  for (auto& [k, v] : j.items()) {
    if (!keys.count(k)) throw DescriptorError("architecture descriptor has unknown field '" + k + "'");
  }
  ModelConfig c;
  try {
    if (j.at("type").get<std::string>() != "sensitivity-network") {
      throw DescriptorError("architecture descriptor has unsupported type");
    }
    c.cascades = j.at("cascades").get<int>();
    c.widths = j.at("widths").get<std::vector<int>>();
    c.kernel = j.at("kernel").get<int>();
    c.downsample = j.at("downsample").get<int>();
    c.height = j.at("height").get<int>();
    c.width = j.at("width").get<int>();
    c.coils = j.at("coils").get<int>();
  } catch (const json::exception& e) {
    throw DescriptorError(std::string("architecture descriptor is incomplete: ") + e.what());
  }
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw DescriptorError(e.what());
  }
  return c;
}

void DiscriminatorConfig::validate() const {
  if (widths.empty()) throw ConfigError("discriminator: widths must be nonempty");
  for (int w : widths) {
    if (w < 1) throw ConfigError("discriminator: widths must be >= 1");
  }
  if (kernel < 1 || kernel % 2 == 0) throw ConfigError("discriminator: kernel size must be odd");
  if (!(slope >= 0.0 && slope < 1.0)) throw ConfigError("discriminator: leaky slope must be in [0, 1)");
}

ParameterSet::ParameterSet(std::vector<Parameter> params) : params_(std::move(params)) {
  std::set<std::string> seen;
  for (const auto& p : params_) {
    if (!seen.insert(p.name).second) throw ConfigError("duplicate parameter name '" + p.name + "'");
    const std::size_t n = std::accumulate(p.shape.begin(), p.shape.end(), std::size_t{1},
                                          [](std::size_t a, int d) { return a * static_cast<std::size_t>(d); });
    if (n != p.values.size()) throw DimensionError("parameter '" + p.name + "' size does not match its shape");
  }
}

std::size_t ParameterSet::total_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.count();
  return n;
}

const Parameter* ParameterSet::find(std::string_view name) const {
  for (const auto& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

Gradients zero_gradients(const ParameterSet& params) {
  Gradients g;
  g.reserve(params.size());
  for (const auto& p : params) g.emplace_back(p.count(), 0.0);
  return g;
}

namespace {

constexpr const char* kBlockLayers[] = {"enc", "down", "mid", "dec", "out"};
constexpr std::size_t kParamsPerCascade = 10;

struct LayerDims {
  int in, out, stride;
};

std::vector<LayerDims> block_layers(const ModelConfig& c) {
  const int w0 = c.widths[0], w1 = c.widths[1];
  return {{2, w0, 1}, {w0, w1, c.downsample}, {w1, w1, 1}, {w1, w0, 1}, {w0, 2, 1}};
}

void add_conv(std::vector<ParameterSpec>& out, const std::string& prefix, int in, int o, int k) {
  out.push_back({prefix + ".weight", {o, in, k, k}});
  out.push_back({prefix + ".bias", {o}});
}

ParameterSet init_layout(const std::vector<ParameterSpec>& layout, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Parameter> params;
  for (const auto& spec : layout) {
    Parameter p{spec.name, spec.shape, {}};
    const std::size_t n = std::accumulate(spec.shape.begin(), spec.shape.end(), std::size_t{1},
                                          [](std::size_t a, int d) { return a * static_cast<std::size_t>(d); });
    p.values.assign(n, 0.0f);
    if (spec.name.ends_with(".weight")) {
      std::size_t fan_in = 1;
      for (std::size_t i = 1; i < spec.shape.size(); ++i) fan_in *= static_cast<std::size_t>(spec.shape[i]);
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (auto& v : p.values) v = static_cast<float>(dist(rng));
    }
    params.push_back(std::move(p));
  }
  return ParameterSet(std::move(params));
}

}  // namespace

std::vector<ParameterSpec> model_layout(const ModelConfig& config) {
  config.validate();
  std::vector<ParameterSpec> out;
  const auto layers = block_layers(config);
  for (int t = 0; t < config.cascades; ++t) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
      add_conv(out, "cascade" + std::to_string(t) + "." + kBlockLayers[l], layers[l].in, layers[l].out, config.kernel);
    }
  }
  return out;
}

std::vector<ParameterSpec> discriminator_layout(const DiscriminatorConfig& config) {
  config.validate();
  std::vector<ParameterSpec> out;
  int in = 1;
  for (std::size_t i = 0; i < config.widths.size(); ++i) {
    add_conv(out, "disc.conv" + std::to_string(i), in, config.widths[i], config.kernel);
    in = config.widths[i];
  }
  out.push_back({"disc.fc.weight", {1, in}});
  out.push_back({"disc.fc.bias", {1}});
  return out;
}

ParameterSet init_model(const ModelConfig& config) { return init_layout(model_layout(config), config.seed); }

ParameterSet init_discriminator(const DiscriminatorConfig& config) {
  return init_layout(discriminator_layout(config), config.seed);
}

ParameterSet zero_parameters(const std::vector<ParameterSpec>& layout) {
  std::vector<Parameter> params;
  for (const auto& spec : layout) {
    std::size_t n = 1;
    for (int d : spec.shape) n *= static_cast<std::size_t>(d);
    params.push_back({spec.name, spec.shape, std::vector<float>(n, 0.0f)});
  }
  return ParameterSet(std::move(params));
}

// ---------------------------------------------------------------------------
// Tape

struct DcContext {
  SensitivityMaps maps;
  SamplingMask mask;
};

void Tape::record(TapeNode node) {
  head_ = node.output;
  nodes_.push_back(std::move(node));
}

void Tape::bind_parameters(const ParameterSet& params) {
  std::vector<std::size_t> sizes;
  for (const auto& p : params) sizes.push_back(p.count());
  if (!parameter_sizes_.empty() && parameter_sizes_ != sizes) {
    throw DimensionError("tape already bound to a different parameter set");
  }
  parameter_sizes_ = std::move(sizes);
}

std::vector<TapeNode> Tape::take_nodes() {
  if (consumed_) throw Error("tape has already been consumed by a backward pass");
  consumed_ = true;
  return std::move(nodes_);
}

Tensor to_channels(const ComplexImage& x) {
  Tensor t(2, x.height(), x.width());
  for (std::size_t i = 0; i < x.size(); ++i) {
    t.data[i] = x[i].real();
    t.data[x.size() + i] = x[i].imag();
  }
  return t;
}

ComplexImage from_channels(const Tensor& t) {
  if (t.channels != 2) throw DimensionError("complex image needs exactly 2 channels");
  ComplexImage x(t.height, t.width);
  const std::size_t n = t.plane();
  for (std::size_t i = 0; i < n; ++i) x[i] = Complex(t.data[i], t.data[n + i]);
  return x;
}

namespace {

std::span<const float> values(const ParameterSet& params, std::size_t i) { return params[i].values; }

/// A value flowing through the forward pass plus its tape id (-1 untracked).
struct Var {
  Tensor value;
  int id = -1;
};

Var leaf(Tensor value, Tape* tape) {
  Var v{std::move(value), -1};
  if (tape) v.id = tape->new_value();
  return v;
}

Var conv(const Var& in, const ParameterSet& params, std::size_t weight, const ConvShape& shape, Tape* tape) {
  Var out{kernels::conv2d_forward(in.value, values(params, weight), values(params, weight + 1), shape), -1};
  if (tape) {
    out.id = tape->new_value();
    TapeNode n{OpKind::Conv2d, {in.id}, out.id, {in.value}};
    n.weight = weight;
    n.bias = weight + 1;
    n.conv = shape;
    tape->record(std::move(n));
  }
  return out;
}

Var relu(Var in, Tape* tape, double slope = 0.0) {
  Tensor input_copy;
  if (tape && slope != 0.0) input_copy = in.value;
  for (auto& v : in.value.data) {
    if (v < 0.0) v *= slope;
  }
  Var out{std::move(in.value), -1};
  if (tape) {
    out.id = tape->new_value();
    TapeNode n{slope == 0.0 ? OpKind::Relu : OpKind::LeakyRelu, {in.id}, out.id, {}};
    n.slope = slope;
    // ReLU keeps its output (sign is recoverable); leaky ReLU keeps its input.
    n.cache.push_back(slope == 0.0 ? out.value : std::move(input_copy));
    tape->record(std::move(n));
  }
  return out;
}

Var upsample(const Var& in, int factor, int h, int w, Tape* tape) {
  Var out{kernels::upsample_nearest(in.value, factor, h, w), -1};
  if (tape) {
    out.id = tape->new_value();
    TapeNode n{OpKind::Upsample, {in.id}, out.id, {Tensor(in.value.channels, in.value.height, in.value.width)}};
    n.factor = factor;
    n.cache.front().data.clear();  // shape only
    tape->record(std::move(n));
  }
  return out;
}

Var add(const Var& a, const Var& b, Tape* tape) {
  Var out{a.value, -1};
  for (std::size_t i = 0; i < out.value.data.size(); ++i) out.value.data[i] += b.value.data[i];
  if (tape) {
    out.id = tape->new_value();
    tape->record(TapeNode{OpKind::Add, {a.id, b.id}, out.id, {}});
  }
  return out;
}

// L(v) = S^H F^-1 (1-M) F (S v): the x-dependent part of the DC layer.
ComplexImage dc_complement(const ComplexImage& x, const SensitivityMaps& maps, const SamplingMask& mask) {
  CoilImages k = expand_coils(x, maps);
  const Grid g = x.grid();
  const int w = x.width();
#pragma omp parallel for schedule(static)
  for (int c = 0; c < k.coils(); ++c) {
    auto plane = k.coil(c);
    fft2c_inplace(plane, g);
    for (std::size_t p = 0; p < plane.size(); ++p) {
      if (mask.columns()[p % w]) plane[p] = Complex{};
    }
    ifft2c_inplace(plane, g);
  }
  return sense_combine(k, maps);
}

Var block(const Var& x, const Model& model, int cascade, Tape* tape) {
  const auto& cfg = model.config;
  const auto layers = block_layers(cfg);
  const std::size_t base = static_cast<std::size_t>(cascade) * kParamsPerCascade;
  auto shape = [&](std::size_t l) { return ConvShape{layers[l].in, layers[l].out, cfg.kernel, layers[l].stride}; };

  Var h1 = relu(conv(x, model.params, base + 0, shape(0), tape), tape);
  Var h2 = relu(conv(h1, model.params, base + 2, shape(1), tape), tape);
  Var h3 = relu(conv(h2, model.params, base + 4, shape(2), tape), tape);
  Var up = upsample(h3, cfg.downsample, h1.value.height, h1.value.width, tape);
  Var h4 = relu(conv(up, model.params, base + 6, shape(3), tape), tape);
  Var r = conv(h4, model.params, base + 8, shape(4), tape);
  return add(x, r, tape);
}

Var data_consistency(const Var& x, const MultiCoilKSpace& y, const std::shared_ptr<const DcContext>& ctx, Tape* tape) {
  const ComplexImage out = dc_layer(from_channels(x.value), y, ctx->mask, ctx->maps, nullptr);
  Var v{to_channels(out), -1};
  if (tape) {
    v.id = tape->new_value();
    TapeNode n{OpKind::DataConsistency, {x.id}, v.id, {}};
    n.dc = ctx;
    tape->record(std::move(n));
  }
  return v;
}

void check_model_inputs(const Model& model, const MultiCoilKSpace& y, const SamplingMask& mask,
                        const SensitivityMaps& maps) {
  const Grid g{model.config.height, model.config.width};
  require_same_grid(y.grid(), g, "model input k-space");
  require_same_grid(mask.grid(), g, "model sampling mask");
  require_same_grid(maps.grid(), g, "model sensitivity maps");
  if (y.coils() != maps.coils()) throw DimensionError("model: coil count of data and maps differ");
  if (y.coils() != model.config.coils) {
    throw DimensionError("model: configured for " + std::to_string(model.config.coils) + " coils, data has " +
                         std::to_string(y.coils()));
  }
  if (model.params.size() != static_cast<std::size_t>(model.config.cascades) * kParamsPerCascade) {
    throw DimensionError("model: parameter set does not match the configured cascades");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Public forward ops

ComplexImage recon_block_forward(const ComplexImage& x, const Model& model, int cascade, Tape* tape) {
  require_same_grid(x.grid(), {model.config.height, model.config.width}, "reconstruction block input");
  if (cascade < 0 || cascade >= model.config.cascades) throw DimensionError("cascade index out of range");
  if (tape) tape->bind_parameters(model.params);
  Var in{to_channels(x), -1};
  if (tape) in.id = tape->empty() ? tape->new_value() : tape->head();
  return from_channels(block(in, model, cascade, tape).value);
}

ComplexImage dc_layer(const ComplexImage& x, const MultiCoilKSpace& y, const SamplingMask& mask,
                      const SensitivityMaps& maps, Tape* tape) {
  require_same_grid(x.grid(), y.grid(), "dc_layer k-space");
  require_same_grid(x.grid(), mask.grid(), "dc_layer mask");
  require_same_grid(x.grid(), maps.grid(), "dc_layer maps");
  if (y.coils() != maps.coils()) throw DimensionError("dc_layer: coil count of data and maps differ");

  CoilImages k = expand_coils(x, maps);
  const Grid g = x.grid();
  const int w = x.width();
#pragma omp parallel for schedule(static)
  for (int c = 0; c < k.coils(); ++c) {
    auto plane = k.coil(c);
    auto measured = y.coil(c);
    fft2c_inplace(plane, g);
    for (std::size_t p = 0; p < plane.size(); ++p) {
      if (mask.columns()[p % w]) plane[p] = measured[p];
    }
    ifft2c_inplace(plane, g);
  }
  ComplexImage out = sense_combine(k, maps);

  if (tape) {
    Var in{{}, tape->empty() ? tape->new_value() : tape->head()};
    const int id = tape->new_value();
    TapeNode n{OpKind::DataConsistency, {in.id}, id, {}};
    n.dc = std::make_shared<const DcContext>(DcContext{maps, mask});
    tape->record(std::move(n));
  }
  return out;
}

ComplexImage model_forward(const Model& model, const MultiCoilKSpace& y, const SamplingMask& mask,
                           const SensitivityMaps& maps, Tape* tape) {
  check_model_inputs(model, y, mask, maps);
  if (tape) {
    if (!tape->empty()) throw Error("model_forward needs a fresh tape");
    tape->bind_parameters(model.params);
  }
  auto ctx = std::make_shared<const DcContext>(DcContext{maps, mask});
  Var x = leaf(to_channels(adjoint_op(y, maps, mask)), tape);
  for (int t = 0; t < model.config.cascades; ++t) {
    x = block(x, model, t, tape);
    x = data_consistency(x, y, ctx, tape);
  }
  return from_channels(x.value);
}

double discriminator_forward(const RealImage& image, const ParameterSet& params, const DiscriminatorConfig& config,
                             Tape* tape) {
  const std::size_t layers = config.widths.size();
  if (params.size() != 2 * layers + 2) throw DimensionError("discriminator: parameter set does not match config");
  if (image.height < 1 || image.width < 1) throw DimensionError("discriminator: empty image");
  if (tape) {
    if (!tape->empty()) throw Error("discriminator_forward needs a fresh tape");
    tape->bind_parameters(params);
  }
  Tensor in(1, image.height, image.width);
  in.data = image.data;
  Var x = leaf(std::move(in), tape);
  int channels = 1;
  for (std::size_t l = 0; l < layers; ++l) {
    ConvShape shape{channels, config.widths[l], config.kernel, 2};
    x = relu(conv(x, params, 2 * l, shape, tape), tape, config.slope);
    channels = config.widths[l];
  }

  // Global average over each channel.
  Tensor pooled(channels, 1, 1);
  for (int c = 0; c < channels; ++c) {
    const double* ch = x.value.channel(c);
    double s = 0.0;
    for (std::size_t i = 0; i < x.value.plane(); ++i) s += ch[i];
    pooled.data[c] = s / static_cast<double>(x.value.plane());
  }
  Var pooled_var{std::move(pooled), -1};
  if (tape) {
    pooled_var.id = tape->new_value();
    TapeNode n{OpKind::GlobalAverage, {x.id}, pooled_var.id, {}};
    n.cache.push_back(Tensor(x.value.channels, x.value.height, x.value.width));
    n.cache.front().data.clear();  // shape only
    tape->record(std::move(n));
  }

  const std::size_t fc = 2 * layers;
  double score = params[fc + 1].values[0];
  for (int c = 0; c < channels; ++c) score += static_cast<double>(params[fc].values[c]) * pooled_var.value.data[c];
  if (tape) {
    const int id = tape->new_value();
    TapeNode n{OpKind::Dense, {pooled_var.id}, id, {pooled_var.value}};
    n.weight = fc;
    n.bias = fc + 1;
    tape->record(std::move(n));
  }
  return score;
}

// ---------------------------------------------------------------------------
// Backward

BackwardResult backward(Tape&& tape, const Tensor& output_grad, const ParameterSet& params) {
  std::vector<std::size_t> sizes;
  for (const auto& p : params) sizes.push_back(p.count());
  if (sizes != tape.parameter_sizes()) throw DimensionError("backward: tape was recorded with a different parameter set");
  const int head = tape.head();
  std::vector<TapeNode> nodes = tape.take_nodes();

  BackwardResult result{zero_gradients(params), {}};
  std::vector<Tensor> grads(tape.value_count());
  std::vector<bool> has(tape.value_count(), false);
  auto accumulate = [&](int id, Tensor g) {
    if (!has[id]) {
      grads[id] = std::move(g);
      has[id] = true;
      return;
    }
    for (std::size_t i = 0; i < g.data.size(); ++i) grads[id].data[i] += g.data[i];
  };
  accumulate(head, output_grad);

  for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
    TapeNode& n = *it;
    if (!has[n.output]) continue;
    Tensor g = std::move(grads[n.output]);
    has[n.output] = false;
    switch (n.op) {
      case OpKind::Conv2d: {
        Tensor input = std::move(n.cache.front());
        kernels::conv2d_backward_params(input, g, n.conv, result.params[n.weight], result.params[n.bias]);
        accumulate(n.inputs[0], kernels::conv2d_backward_input(g, params[n.weight].values, n.conv, input.height, input.width));
        break;
      }
      case OpKind::Relu: {
        Tensor out = std::move(n.cache.front());
        for (std::size_t i = 0; i < g.data.size(); ++i) {
          if (!(out.data[i] > 0.0)) g.data[i] = 0.0;
        }
        accumulate(n.inputs[0], std::move(g));
        break;
      }
      case OpKind::LeakyRelu: {
        Tensor in = std::move(n.cache.front());
        for (std::size_t i = 0; i < g.data.size(); ++i) {
          if (in.data[i] < 0.0) g.data[i] *= n.slope;
        }
        accumulate(n.inputs[0], std::move(g));
        break;
      }
      case OpKind::Upsample: {
        const Tensor shape = std::move(n.cache.front());
        accumulate(n.inputs[0], kernels::upsample_nearest_backward(g, n.factor, shape.height, shape.width));
        break;
      }
      case OpKind::Add:
        accumulate(n.inputs[0], g);
        accumulate(n.inputs[1], std::move(g));
        break;
      case OpKind::DataConsistency: {
        // The DC map is affine in x with a self-adjoint linear part.
        accumulate(n.inputs[0], to_channels(dc_complement(from_channels(g), n.dc->maps, n.dc->mask)));
        break;
      }
      case OpKind::GlobalAverage: {
        const Tensor shape = std::move(n.cache.front());
        Tensor gi(shape.channels, shape.height, shape.width);
        const double inv = 1.0 / static_cast<double>(gi.plane());
        for (int c = 0; c < gi.channels; ++c) std::fill(gi.channel(c), gi.channel(c) + gi.plane(), g.data[c] * inv);
        accumulate(n.inputs[0], std::move(gi));
        break;
      }
      case OpKind::Dense: {
        Tensor in = std::move(n.cache.front());
        const double go = g.data[0];
        result.params[n.bias][0] += go;
        Tensor gi(in.channels, 1, 1);
        for (int c = 0; c < in.channels; ++c) {
          result.params[n.weight][c] += go * in.data[c];
          gi.data[c] = go * static_cast<double>(params[n.weight].values[c]);
        }
        accumulate(n.inputs[0], std::move(gi));
        break;
      }
    }
  }
  if (tape.value_count() > 0 && has[0]) result.input = std::move(grads[0]);
  return result;
}

ModelGradients model_backward(Tape&& tape, const ComplexImage& output_grad, const ParameterSet& params) {
  if (tape.empty()) throw Error("model_backward: empty tape");
  BackwardResult r = backward(std::move(tape), to_channels(output_grad), params);
  ModelGradients out{std::move(r.params), ComplexImage(output_grad.height(), output_grad.width())};
  if (!r.input.data.empty()) out.input = from_channels(r.input);
  return out;
}

DiscriminatorGradients discriminator_backward(Tape&& tape, double score_grad, const ParameterSet& params) {
  if (tape.empty()) throw Error("discriminator_backward: empty tape");
  Tensor g(1, 1, 1);
  g.data[0] = score_grad;
  BackwardResult r = backward(std::move(tape), g, params);
  DiscriminatorGradients out{std::move(r.params), {}};
  if (!r.input.data.empty()) {
    out.input = RealImage(r.input.height, r.input.width);
    out.input.data = std::move(r.input.data);
  }
  return out;
}

}  // namespace pmri
