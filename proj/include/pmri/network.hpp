#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "pmri/kernels.hpp"
#include "pmri/types.hpp"

namespace pmri {

/// Architecture of the unrolled sensitivity network.
///
/// Each cascade is a residual encoder-decoder block
///   enc (2 -> w0) . down (w0 -> w1, stride d) . mid (w1 -> w1)
///   . nearest upsample x d . dec (w1 -> w0) . out (w0 -> 2)
/// with ReLU after every conv except `out`, followed by a hard coil-wise
/// data-consistency layer.
struct ModelConfig {
  int cascades = 3;
  std::vector<int> widths{8, 16};  // {encoder width, bottleneck width}
  int kernel = 3;
  int downsample = 2;
  int height = 64;
  int width = 64;
  int coils = 4;
  std::uint64_t seed = 1;  // initialization only; not part of the descriptor

  void validate() const;
  /// Canonical architecture text (sorted-key JSON, seed excluded).
  std::string descriptor() const;
  static ModelConfig from_descriptor(std::string_view text);

  bool operator==(const ModelConfig&) const = default;
};

/// LSGAN critic over masked magnitude images: strided convs with leaky ReLU,
/// global average, affine scalar. No terminal squashing.
struct DiscriminatorConfig {
  std::vector<int> widths{8, 16, 16};
  int kernel = 3;
  double slope = 0.2;
  std::uint64_t seed = 7;

  void validate() const;
};

struct Parameter {
  std::string name;
  std::vector<int> shape;
  std::vector<float> values;

  std::size_t count() const { return values.size(); }

  bool operator==(const Parameter&) const = default;
};

/// Ordered named parameter arrays. Order is a function of the config.
class ParameterSet {
 public:
  ParameterSet() = default;
  explicit ParameterSet(std::vector<Parameter> params);

  std::size_t size() const { return params_.size(); }
  std::size_t total_count() const;
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter* find(std::string_view name) const;

  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }

  bool operator==(const ParameterSet&) const = default;

 private:
  std::vector<Parameter> params_;
};

/// One 64-bit gradient array per parameter, same order as the ParameterSet.
using Gradients = std::vector<std::vector<double>>;
Gradients zero_gradients(const ParameterSet& params);

struct ParameterSpec {
  std::string name;
  std::vector<int> shape;
};

/// Names and shapes implied by a config, in canonical order.
std::vector<ParameterSpec> model_layout(const ModelConfig& config);
std::vector<ParameterSpec> discriminator_layout(const DiscriminatorConfig& config);

/// Fan-in scaled uniform weights U(-1/sqrt(fan_in), 1/sqrt(fan_in)), zero biases.
ParameterSet init_model(const ModelConfig& config);
ParameterSet init_discriminator(const DiscriminatorConfig& config);

/// All-zero parameters for the given layout.
ParameterSet zero_parameters(const std::vector<ParameterSpec>& layout);

struct Model {
  ModelConfig config;
  ParameterSet params;
};

enum class OpKind { Conv2d, Relu, LeakyRelu, Upsample, Add, DataConsistency, GlobalAverage, Dense };

struct DcContext;

/// One recorded operation. `cache` holds the activations its backward needs.
struct TapeNode {
  OpKind op;
  std::vector<int> inputs;
  int output = -1;
  std::vector<Tensor> cache;
  std::size_t weight = 0;  // parameter indices (Conv2d, Dense)
  std::size_t bias = 0;
  ConvShape conv;
  int factor = 1;  // Upsample
  double slope = 0.0;
  std::shared_ptr<const DcContext> dc;
};

/// Reverse-mode record of one forward pass. Single use: backward consumes it.
class Tape {
 public:
  bool empty() const { return value_count_ == 0; }
  bool consumed() const { return consumed_; }
  std::size_t node_count() const { return nodes_.size(); }
  /// Value id of the most recent output.
  int head() const { return head_; }

  int new_value() { return value_count_++; }
  void record(TapeNode node);
  void set_head(int id) { head_ = id; }
  void bind_parameters(const ParameterSet& params);

  std::vector<TapeNode> take_nodes();
  int value_count() const { return value_count_; }
  const std::vector<std::size_t>& parameter_sizes() const { return parameter_sizes_; }

 private:
  std::vector<TapeNode> nodes_;
  std::vector<std::size_t> parameter_sizes_;
  int value_count_ = 0;
  int head_ = -1;
  bool consumed_ = false;
};

struct BackwardResult {
  Gradients params;
  Tensor input;  // gradient w.r.t. the first recorded value
};

/// Runs the tape in reverse from `output_grad` at the tape head.
BackwardResult backward(Tape&& tape, const Tensor& output_grad, const ParameterSet& params);

Tensor to_channels(const ComplexImage& x);
ComplexImage from_channels(const Tensor& t);

/// One residual reconstruction block (cascade index `cascade`).
ComplexImage recon_block_forward(const ComplexImage& x, const Model& model, int cascade, Tape* tape = nullptr);

/// k_c = F(S_c x); k_c' = (1-M) k_c + M y_c; returns sum_c conj(S_c) F^-1(k_c').
ComplexImage dc_layer(const ComplexImage& x, const MultiCoilKSpace& y, const SamplingMask& mask,
                      const SensitivityMaps& maps, Tape* tape = nullptr);

/// x0 = adjoint_op(y); then T times: block, data consistency.
ComplexImage model_forward(const Model& model, const MultiCoilKSpace& y, const SamplingMask& mask,
                           const SensitivityMaps& maps, Tape* tape = nullptr);

struct ModelGradients {
  Gradients params;
  ComplexImage input;  // w.r.t. the zero-filled start image
};

ModelGradients model_backward(Tape&& tape, const ComplexImage& output_grad, const ParameterSet& params);

double discriminator_forward(const RealImage& image, const ParameterSet& params, const DiscriminatorConfig& config,
                             Tape* tape = nullptr);

struct DiscriminatorGradients {
  Gradients params;
  RealImage input;
};

DiscriminatorGradients discriminator_backward(Tape&& tape, double score_grad, const ParameterSet& params);

}  // namespace pmri
