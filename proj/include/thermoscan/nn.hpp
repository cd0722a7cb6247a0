#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "thermoscan/learners.hpp"
#include "thermoscan/rng.hpp"

namespace thermoscan::nn {

enum class Activation { linear, relu, elu, sigmoid, tanh };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

enum class LayerKind { conv2d, maxpool2d, batch_norm, dropout, flatten, global_average_pool, dense };

struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  int units = 0;      // dense units / conv filters
  int kernel = 3;     // conv kernel size (odd)
  Activation activation = Activation::linear;
  double rate = 0.0;  // dropout rate

  static LayerSpec conv2d(int filters, int kernel, Activation act) { return {LayerKind::conv2d, filters, kernel, act, 0.0}; }
  static LayerSpec maxpool2d() { return {LayerKind::maxpool2d, 0, 2, Activation::linear, 0.0}; }
  static LayerSpec batch_norm() { return {LayerKind::batch_norm, 0, 0, Activation::linear, 0.0}; }
  static LayerSpec dropout(double rate) { return {LayerKind::dropout, 0, 0, Activation::linear, rate}; }
  static LayerSpec flatten() { return {LayerKind::flatten, 0, 0, Activation::linear, 0.0}; }
  static LayerSpec global_average_pool() { return {LayerKind::global_average_pool, 0, 0, Activation::linear, 0.0}; }
  static LayerSpec dense(int units, Activation act) { return {LayerKind::dense, units, 0, act, 0.0}; }
};

struct OptimizerSpec {
  enum class Kind { sgd, adam } kind = Kind::adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Per-sample tensor shape (channels, height, width); flat vectors use h = w = 1.
struct Shape {
  std::size_t c = 1, h = 1, w = 1;
  std::size_t size() const { return c * h * w; }
  bool operator==(const Shape&) const = default;
};

/// Layer stack ending in dense(1, sigmoid), trained on binary cross-entropy.
struct NetworkSpec {
  Shape input;
  std::vector<LayerSpec> layers;
  OptimizerSpec optimizer;

  /// Throws ConfigError on inconsistent shapes or a missing sigmoid output.
  void validate() const;
  nlohmann::json to_json() const;
  static NetworkSpec from_json(const nlohmann::json& j);
};

/// Activations for a batch: n samples of `shape`, sample-major.
struct Batch {
  std::size_t n = 0;
  Shape shape;
  std::vector<double> values;
};

class Layer;

/// A network instance. The final dense layer produces the logit; the sigmoid
/// is applied by predict() and folded into the loss during training.
class Network {
 public:
  Network(const NetworkSpec& spec, std::uint64_t seed);
  Network(const Network&);
  Network& operator=(const Network&);
  Network(Network&&) noexcept;
  Network& operator=(Network&&) noexcept;
  ~Network();

  const NetworkSpec& spec() const { return spec_; }

  /// Logits for a batch. `training` enables dropout and batch statistics.
  std::vector<double> forward(const Batch& input, bool training, Rng* rng = nullptr);
  /// Mean binary cross-entropy of the last forward pass; fills parameter gradients.
  double backward(std::span<const int> labels);
  /// Forward (training mode) + loss, without touching gradients.
  double loss(const Batch& input, std::span<const int> labels, bool dropout_active, Rng* rng = nullptr);

  struct Param {
    std::vector<double>* values;
    std::vector<double>* grads;
    std::string name;
  };
  std::vector<Param> parameters();
  void zero_grads();

  /// Buffers that are state but not trained (batch-norm running moments).
  std::vector<std::vector<double>*> state_buffers();

  void set_dropout_enabled(bool enabled) { dropout_enabled_ = enabled; }

 private:
  NetworkSpec spec_;
  std::vector<std::unique_ptr<Layer>> layers_;
  std::vector<Batch> activations_;
  bool dropout_enabled_ = true;
};

struct TrainOptions {
  int epochs = 20;
  int batch_size = 32;
  std::uint64_t seed = 0;
};

/// Trained network exposed as a Classifier over flattened (c,h,w) inputs.
/// Optional per-feature standardisation is applied before the first layer.
class NeuralNet final : public Classifier {
 public:
  NeuralNet(Network net, std::optional<Standardizer> input_scaler = std::nullopt);

  std::string family() const override { return "nn"; }
  std::size_t width() const override { return net_.spec().input.size(); }
  double predict_score(std::span<const double> x) const override;
  std::vector<double> predict_scores(const Matrix& rows) const override;
  nlohmann::json to_json() const override;
  static NeuralNet from_json(const nlohmann::json& j);

  const std::vector<double>& loss_history() const { return loss_history_; }
  void set_loss_history(std::vector<double> h) { loss_history_ = std::move(h); }
  const Network& network() const { return net_; }

 private:
  mutable Network net_;
  std::optional<Standardizer> scaler_;
  std::vector<double> loss_history_;
};

/// Mini-batch training with per-epoch shuffling. `inputs` holds one flattened
/// sample per row; labels are 0/1.
NeuralNet nn_train(const NetworkSpec& spec, const Matrix& inputs, std::span<const int> labels,
                   const TrainOptions& options, bool standardize_inputs = false);

/// Largest relative difference between analytic and central-difference
/// gradients over every trainable value, with dropout disabled and batch norm
/// in training mode. Relative error is |a - f| / max(|a|, |f|, 1e-6).
double nn_gradient_check(const NetworkSpec& spec, const Matrix& inputs, std::span<const int> labels,
                         double eps = 1e-5, std::uint64_t seed = 0);

/// Small conv net: [conv(f) -> batch_norm -> maxpool] x blocks, then flatten,
/// dense(hidden, elu), dropout, dense(1, sigmoid).
NetworkSpec standard_cnn(Shape input, int blocks = 2, int filters = 8, int hidden = 16, double dropout = 0.25,
                         double learning_rate = 1e-3);

/// Dense network for flat inputs: hidden layers with batch norm and dropout.
NetworkSpec standard_mlp(std::size_t features, std::vector<int> hidden = {32, 16}, double dropout = 0.1,
                         double learning_rate = 1e-2);

}  // namespace thermoscan::nn
