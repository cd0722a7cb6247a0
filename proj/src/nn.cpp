#include "thermoscan/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "thermoscan/kernels.hpp"
#include "thermoscan/model_io.hpp"

namespace thermoscan::nn {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::linear: return "linear";
    case Activation::relu: return "relu";
    case Activation::elu: return "elu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
  }
  return "linear";
}

Activation activation_from_string(const std::string& name) {
  for (auto a : {Activation::linear, Activation::relu, Activation::elu, Activation::sigmoid, Activation::tanh}) {
    if (to_string(a) == name) return a;
  }
  throw ConfigError("unknown activation '" + name + "'");
}

namespace {

constexpr double kEluAlpha = 1.0;
constexpr double kBnEpsilon = 1e-5;
constexpr double kBnMomentum = 0.9;

double activate(Activation a, double z) {
  switch (a) {
    case Activation::linear: return z;
    case Activation::relu: return z > 0 ? z : 0.0;
    case Activation::elu: return z > 0 ? z : kEluAlpha * std::expm1(z);
    case Activation::sigmoid: return sigmoid(z);
    case Activation::tanh: return std::tanh(z);
  }
  return z;
}

double activation_slope(Activation a, double z) {
  switch (a) {
    case Activation::linear: return 1.0;
    case Activation::relu: return z > 0 ? 1.0 : 0.0;
    case Activation::elu: return z > 0 ? 1.0 : kEluAlpha * std::exp(z);
    case Activation::sigmoid: {
      const double s = sigmoid(z);
      return s * (1 - s);
    }
    case Activation::tanh: {
      const double t = std::tanh(z);
      return 1 - t * t;
    }
  }
  return 1.0;
}

std::string kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::maxpool2d: return "maxpool2d";
    case LayerKind::batch_norm: return "batch_norm";
    case LayerKind::dropout: return "dropout";
    case LayerKind::flatten: return "flatten";
    case LayerKind::global_average_pool: return "global_average_pool";
    case LayerKind::dense: return "dense";
  }
  return "dense";
}

LayerKind kind_from_name(const std::string& name) {
  for (auto k : {LayerKind::conv2d, LayerKind::maxpool2d, LayerKind::batch_norm, LayerKind::dropout,
                 LayerKind::flatten, LayerKind::global_average_pool, LayerKind::dense}) {
    if (kind_name(k) == name) return k;
  }
  throw ConfigError("unknown layer kind '" + name + "'");
}

/// Shape after `layer`, or ConfigError when the layer cannot accept `in`.
Shape infer_shape(const LayerSpec& layer, Shape in, std::size_t position) {
  const std::string where = "layer " + std::to_string(position) + " (" + kind_name(layer.kind) + ")";
  switch (layer.kind) {
    case LayerKind::conv2d:
      if (layer.units < 1) throw ConfigError(where + ": filters must be >= 1");
      if (layer.kernel < 1 || layer.kernel % 2 == 0) throw ConfigError(where + ": kernel must be odd");
      if (in.h == 1 && in.w == 1) throw ConfigError(where + ": needs a spatial input");
      return {static_cast<std::size_t>(layer.units), in.h, in.w};
    case LayerKind::maxpool2d:
      if (in.h < 2 || in.w < 2) throw ConfigError(where + ": input smaller than the 2x2 window");
      return {in.c, in.h / 2, in.w / 2};
    case LayerKind::batch_norm:
      return in;
    case LayerKind::dropout:
      if (layer.rate < 0.0 || layer.rate >= 1.0) throw ConfigError(where + ": rate must lie in [0,1)");
      return in;
    case LayerKind::flatten:
      return {in.size(), 1, 1};
    case LayerKind::global_average_pool:
      if (in.h == 1 && in.w == 1) throw ConfigError(where + ": needs a spatial input");
      return {in.c, 1, 1};
    case LayerKind::dense:
      if (layer.units < 1) throw ConfigError(where + ": units must be >= 1");
      if (in.h != 1 || in.w != 1) throw ConfigError(where + ": spatial input must be flattened first");
      return {static_cast<std::size_t>(layer.units), 1, 1};
  }
  return in;
}

}  // namespace

void NetworkSpec::validate() const {
  if (input.size() == 0) throw ConfigError("network input shape is empty");
  if (layers.empty()) throw ConfigError("network has no layers");
  Shape s = input;
  for (std::size_t i = 0; i < layers.size(); ++i) s = infer_shape(layers[i], s, i);
  const auto& last = layers.back();
  if (last.kind != LayerKind::dense || last.units != 1 || last.activation != Activation::sigmoid) {
    throw ConfigError("network must end in dense(1, sigmoid)");
  }
  if (optimizer.learning_rate <= 0) throw ConfigError("optimizer learning rate must be positive");
}

nlohmann::json NetworkSpec::to_json() const {
  nlohmann::json ls = nlohmann::json::array();
  for (const auto& l : layers) {
    nlohmann::json j = {{"kind", kind_name(l.kind)}};
    if (l.kind == LayerKind::conv2d || l.kind == LayerKind::dense) {
      j["units"] = l.units;
      j["activation"] = to_string(l.activation);
    }
    if (l.kind == LayerKind::conv2d) j["kernel"] = l.kernel;
    if (l.kind == LayerKind::dropout) j["rate"] = l.rate;
    ls.push_back(j);
  }
  return {{"input", {input.c, input.h, input.w}},
          {"layers", ls},
          {"optimizer",
           {{"kind", optimizer.kind == OptimizerSpec::Kind::adam ? "adam" : "sgd"},
            {"learning_rate", optimizer.learning_rate},
            {"beta1", optimizer.beta1},
            {"beta2", optimizer.beta2},
            {"epsilon", optimizer.epsilon}}}};
}

NetworkSpec NetworkSpec::from_json(const nlohmann::json& j) {
  NetworkSpec s;
  auto in = j.at("input");
  s.input = {in.at(0).get<std::size_t>(), in.at(1).get<std::size_t>(), in.at(2).get<std::size_t>()};
  for (const auto& l : j.at("layers")) {
    LayerSpec ls;
    ls.kind = kind_from_name(l.at("kind").get<std::string>());
    ls.units = l.value("units", 0);
    ls.kernel = l.value("kernel", ls.kind == LayerKind::maxpool2d ? 2 : 0);
    ls.activation = activation_from_string(l.value("activation", std::string("linear")));
    ls.rate = l.value("rate", 0.0);
    s.layers.push_back(ls);
  }
  const auto& o = j.at("optimizer");
  s.optimizer.kind = o.at("kind").get<std::string>() == "sgd" ? OptimizerSpec::Kind::sgd : OptimizerSpec::Kind::adam;
  s.optimizer.learning_rate = o.at("learning_rate").get<double>();
  s.optimizer.beta1 = o.value("beta1", 0.9);
  s.optimizer.beta2 = o.value("beta2", 0.999);
  s.optimizer.epsilon = o.value("epsilon", 1e-8);
  s.validate();
  return s;
}

// --- layers ---------------------------------------------------------------------

class Layer {
 public:
  virtual ~Layer() = default;
  virtual std::unique_ptr<Layer> clone() const = 0;
  virtual Shape output_shape() const = 0;
  virtual void forward(const Batch& in, Batch& out, bool training, Rng* rng) = 0;
  /// Accumulates parameter gradients; writes dL/d(input) into grad_in.
  virtual void backward(const Batch& in, const Batch& grad_out, Batch& grad_in) = 0;
  virtual std::vector<Network::Param> params() { return {}; }
  virtual std::vector<std::vector<double>*> state() { return {}; }
  virtual void set_dropout(bool) {}
  /// Final layers skip their activation so the network can emit logits.
  virtual void set_emit_logits(bool) {}
};

namespace {

Batch like(std::size_t n, Shape s) { return Batch{n, s, std::vector<double>(n * s.size(), 0.0)}; }

void glorot_uniform(std::vector<double>& w, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : w) v = (2.0 * uniform01(rng) - 1.0) * limit;
}

class Conv2D final : public Layer {
 public:
  Conv2D(Shape in, std::size_t filters, std::size_t k, Activation act, Rng& rng)
      : in_(in), out_{filters, in.h, in.w}, k_(k), act_(act),
        w_(filters * in.c * k * k), b_(filters, 0.0), gw_(w_.size(), 0.0), gb_(filters, 0.0) {
    glorot_uniform(w_, in.c * k * k, filters * k * k, rng);
  }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2D>(*this); }
  Shape output_shape() const override { return out_; }

  void forward(const Batch& in, Batch& out, bool, Rng*) override {
    out = like(in.n, out_);
    z_.assign(out.values.size(), 0.0);
    kernels::ConvShape s{in.n, in_.c, in_.h, in_.w, out_.c, k_};
    kernels::conv2d_forward(s, in.values, w_, b_, z_);
    for (std::size_t i = 0; i < z_.size(); ++i) out.values[i] = activate(act_, z_[i]);
  }

  void backward(const Batch& in, const Batch& grad_out, Batch& grad_in) override {
    grad_in = like(in.n, in_);
    const std::size_t h = in_.h, w = in_.w, k = k_, cin = in_.c, cout = out_.c;
    const auto half = static_cast<std::ptrdiff_t>(k / 2);
    std::vector<double> dz(grad_out.values.size());
    for (std::size_t i = 0; i < dz.size(); ++i) dz[i] = grad_out.values[i] * activation_slope(act_, z_[i]);
    for (std::size_t b = 0; b < in.n; ++b) {
      for (std::size_t o = 0; o < cout; ++o) {
        const double* dplane = dz.data() + (b * cout + o) * h * w;
        for (std::size_t y = 0; y < h; ++y)
          for (std::size_t x = 0; x < w; ++x) gb_[o] += dplane[y * w + x];
        for (std::size_t ci = 0; ci < cin; ++ci) {
          const double* plane = in.values.data() + (b * cin + ci) * h * w;
          double* gplane = grad_in.values.data() + (b * cin + ci) * h * w;
          const double* kern = w_.data() + (o * cin + ci) * k * k;
          double* gkern = gw_.data() + (o * cin + ci) * k * k;
          for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
              const double g = dplane[y * w + x];
              if (g == 0.0) continue;
              for (std::size_t ky = 0; ky < k; ++ky) {
                const auto sy = static_cast<std::ptrdiff_t>(y + ky) - half;
                if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
                for (std::size_t kx = 0; kx < k; ++kx) {
                  const auto sx = static_cast<std::ptrdiff_t>(x + kx) - half;
                  if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w)) continue;
                  const auto src = static_cast<std::size_t>(sy) * w + static_cast<std::size_t>(sx);
                  gkern[ky * k + kx] += g * plane[src];
                  gplane[src] += g * kern[ky * k + kx];
                }
              }
            }
          }
        }
      }
    }
  }

  std::vector<Network::Param> params() override {
    return {{&w_, &gw_, "conv.weight"}, {&b_, &gb_, "conv.bias"}};
  }
  void set_emit_logits(bool on) override {
    if (on) act_ = Activation::linear;
  }

 private:
  Shape in_, out_;
  std::size_t k_;
  Activation act_;
  std::vector<double> w_, b_, gw_, gb_, z_;
};

class MaxPool2D final : public Layer {
 public:
  explicit MaxPool2D(Shape in) : in_(in), out_{in.c, in.h / 2, in.w / 2} {}
  std::unique_ptr<Layer> clone() const override { return std::make_unique<MaxPool2D>(*this); }
  Shape output_shape() const override { return out_; }

  void forward(const Batch& in, Batch& out, bool, Rng*) override {
    out = like(in.n, out_);
    argmax_.assign(out.values.size(), 0);
    for (std::size_t p = 0; p < in.n * in_.c; ++p) {
      const std::size_t in_base = p * in_.h * in_.w;
      const std::size_t out_base = p * out_.h * out_.w;
      for (std::size_t y = 0; y < out_.h; ++y) {
        for (std::size_t x = 0; x < out_.w; ++x) {
          std::size_t best = in_base + (2 * y) * in_.w + 2 * x;
          for (std::size_t dy = 0; dy < 2; ++dy)
            for (std::size_t dx = 0; dx < 2; ++dx) {
              const std::size_t idx = in_base + (2 * y + dy) * in_.w + 2 * x + dx;
              if (in.values[idx] > in.values[best]) best = idx;
            }
          out.values[out_base + y * out_.w + x] = in.values[best];
          argmax_[out_base + y * out_.w + x] = best;
        }
      }
    }
  }

  void backward(const Batch& in, const Batch& grad_out, Batch& grad_in) override {
    grad_in = like(in.n, in_);
    for (std::size_t i = 0; i < grad_out.values.size(); ++i) grad_in.values[argmax_[i]] += grad_out.values[i];
  }

 private:
  Shape in_, out_;
  std::vector<std::size_t> argmax_;
};

/// Normalises each channel over (batch, height, width).
class BatchNorm final : public Layer {
 public:
  explicit BatchNorm(Shape in)
      : in_(in), gamma_(in.c, 1.0), beta_(in.c, 0.0), ggamma_(in.c, 0.0), gbeta_(in.c, 0.0),
        running_mean_(in.c, 0.0), running_var_(in.c, 1.0) {}
  std::unique_ptr<Layer> clone() const override { return std::make_unique<BatchNorm>(*this); }
  Shape output_shape() const override { return in_; }

  void forward(const Batch& in, Batch& out, bool training, Rng*) override {
    out = like(in.n, in_);
    const std::size_t hw = in_.h * in_.w, c = in_.c;
    const double m = static_cast<double>(in.n * hw);
    xhat_.assign(in.values.size(), 0.0);
    inv_std_.assign(c, 0.0);
    for (std::size_t ch = 0; ch < c; ++ch) {
      double mean, var;
      if (training) {
        double s = 0.0;
        for (std::size_t b = 0; b < in.n; ++b)
          for (std::size_t i = 0; i < hw; ++i) s += in.values[(b * c + ch) * hw + i];
        mean = s / m;
        double ss = 0.0;
        for (std::size_t b = 0; b < in.n; ++b)
          for (std::size_t i = 0; i < hw; ++i) {
            const double dv = in.values[(b * c + ch) * hw + i] - mean;
            ss += dv * dv;
          }
        var = ss / m;
        running_mean_[ch] = kBnMomentum * running_mean_[ch] + (1 - kBnMomentum) * mean;
        running_var_[ch] = kBnMomentum * running_var_[ch] + (1 - kBnMomentum) * var;
      } else {
        mean = running_mean_[ch];
        var = running_var_[ch];
      }
      const double inv = 1.0 / std::sqrt(var + kBnEpsilon);
      inv_std_[ch] = inv;
      for (std::size_t b = 0; b < in.n; ++b)
        for (std::size_t i = 0; i < hw; ++i) {
          const std::size_t idx = (b * c + ch) * hw + i;
          xhat_[idx] = (in.values[idx] - mean) * inv;
          out.values[idx] = gamma_[ch] * xhat_[idx] + beta_[ch];
        }
    }
  }

  void backward(const Batch& in, const Batch& grad_out, Batch& grad_in) override {
    grad_in = like(in.n, in_);
    const std::size_t hw = in_.h * in_.w, c = in_.c;
    const double m = static_cast<double>(in.n * hw);
    for (std::size_t ch = 0; ch < c; ++ch) {
      double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
      for (std::size_t b = 0; b < in.n; ++b)
        for (std::size_t i = 0; i < hw; ++i) {
          const std::size_t idx = (b * c + ch) * hw + i;
          const double dy = grad_out.values[idx];
          ggamma_[ch] += dy * xhat_[idx];
          gbeta_[ch] += dy;
          const double dxhat = dy * gamma_[ch];
          sum_dxhat += dxhat;
          sum_dxhat_xhat += dxhat * xhat_[idx];
        }
      for (std::size_t b = 0; b < in.n; ++b)
        for (std::size_t i = 0; i < hw; ++i) {
          const std::size_t idx = (b * c + ch) * hw + i;
          const double dxhat = grad_out.values[idx] * gamma_[ch];
          grad_in.values[idx] = inv_std_[ch] / m * (m * dxhat - sum_dxhat - xhat_[idx] * sum_dxhat_xhat);
        }
    }
  }

  std::vector<Network::Param> params() override {
    return {{&gamma_, &ggamma_, "bn.gamma"}, {&beta_, &gbeta_, "bn.beta"}};
  }
  std::vector<std::vector<double>*> state() override { return {&running_mean_, &running_var_}; }

 private:
  Shape in_;
  std::vector<double> gamma_, beta_, ggamma_, gbeta_, running_mean_, running_var_, xhat_, inv_std_;
};

/// Inverted dropout: kept units are scaled by 1/(1-rate) during training.
class Dropout final : public Layer {
 public:
  Dropout(Shape in, double rate) : in_(in), rate_(rate) {}
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Dropout>(*this); }
  Shape output_shape() const override { return in_; }

  void forward(const Batch& in, Batch& out, bool training, Rng* rng) override {
    out = in;
    active_ = training && enabled_ && rate_ > 0.0 && rng != nullptr;
    if (!active_) return;
    mask_.assign(in.values.size(), 0.0);
    const double keep = 1.0 - rate_;
    for (std::size_t i = 0; i < mask_.size(); ++i) {
      mask_[i] = uniform01(*rng) < keep ? 1.0 / keep : 0.0;
      out.values[i] *= mask_[i];
    }
  }

  void backward(const Batch&, const Batch& grad_out, Batch& grad_in) override {
    grad_in = grad_out;
    if (!active_) return;
    for (std::size_t i = 0; i < grad_in.values.size(); ++i) grad_in.values[i] *= mask_[i];
  }

  void set_dropout(bool enabled) override { enabled_ = enabled; }

 private:
  Shape in_;
  double rate_;
  bool enabled_ = true;
  bool active_ = false;
  std::vector<double> mask_;
};

class Flatten final : public Layer {
 public:
  explicit Flatten(Shape in) : in_(in) {}
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Flatten>(*this); }
  Shape output_shape() const override { return {in_.size(), 1, 1}; }
  void forward(const Batch& in, Batch& out, bool, Rng*) override {
    out = in;
    out.shape = output_shape();
  }
  void backward(const Batch&, const Batch& grad_out, Batch& grad_in) override {
    grad_in = grad_out;
    grad_in.shape = in_;
  }

 private:
  Shape in_;
};

class GlobalAveragePool final : public Layer {
 public:
  explicit GlobalAveragePool(Shape in) : in_(in) {}
  std::unique_ptr<Layer> clone() const override { return std::make_unique<GlobalAveragePool>(*this); }
  Shape output_shape() const override { return {in_.c, 1, 1}; }
  void forward(const Batch& in, Batch& out, bool, Rng*) override {
    out = like(in.n, output_shape());
    const std::size_t hw = in_.h * in_.w;
    for (std::size_t p = 0; p < in.n * in_.c; ++p) {
      double s = 0.0;
      for (std::size_t i = 0; i < hw; ++i) s += in.values[p * hw + i];
      out.values[p] = s / static_cast<double>(hw);
    }
  }
  void backward(const Batch& in, const Batch& grad_out, Batch& grad_in) override {
    grad_in = like(in.n, in_);
    const std::size_t hw = in_.h * in_.w;
    for (std::size_t p = 0; p < in.n * in_.c; ++p)
      for (std::size_t i = 0; i < hw; ++i) grad_in.values[p * hw + i] = grad_out.values[p] / static_cast<double>(hw);
  }

 private:
  Shape in_;
};

class Dense final : public Layer {
 public:
  Dense(Shape in, std::size_t units, Activation act, Rng& rng)
      : in_(in), units_(units), act_(act), w_(units * in.size()), b_(units, 0.0), gw_(w_.size(), 0.0),
        gb_(units, 0.0) {
    glorot_uniform(w_, in.size(), units, rng);
  }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Dense>(*this); }
  Shape output_shape() const override { return {units_, 1, 1}; }

  void forward(const Batch& in, Batch& out, bool, Rng*) override {
    const std::size_t f = in_.size();
    out = like(in.n, output_shape());
    z_.assign(out.values.size(), 0.0);
    for (std::size_t b = 0; b < in.n; ++b) {
      const double* x = in.values.data() + b * f;
      for (std::size_t u = 0; u < units_; ++u) {
        const double* wrow = w_.data() + u * f;
        double z = b_[u];
        for (std::size_t j = 0; j < f; ++j) z += wrow[j] * x[j];
        z_[b * units_ + u] = z;
        out.values[b * units_ + u] = activate(act_, z);
      }
    }
  }

  void backward(const Batch& in, const Batch& grad_out, Batch& grad_in) override {
    const std::size_t f = in_.size();
    grad_in = like(in.n, in_);
    for (std::size_t b = 0; b < in.n; ++b) {
      const double* x = in.values.data() + b * f;
      double* gx = grad_in.values.data() + b * f;
      for (std::size_t u = 0; u < units_; ++u) {
        const double dz = grad_out.values[b * units_ + u] * activation_slope(act_, z_[b * units_ + u]);
        if (dz == 0.0) continue;
        gb_[u] += dz;
        const double* wrow = w_.data() + u * f;
        double* gwrow = gw_.data() + u * f;
        for (std::size_t j = 0; j < f; ++j) {
          gwrow[j] += dz * x[j];
          gx[j] += dz * wrow[j];
        }
      }
    }
  }

  std::vector<Network::Param> params() override {
    return {{&w_, &gw_, "dense.weight"}, {&b_, &gb_, "dense.bias"}};
  }
  void set_emit_logits(bool on) override {
    if (on) act_ = Activation::linear;
  }

 private:
  Shape in_;
  std::size_t units_;
  Activation act_;
  std::vector<double> w_, b_, gw_, gb_, z_;
};

}  // namespace

// --- network ---------------------------------------------------------------------

Network::Network(const NetworkSpec& spec, std::uint64_t seed) : spec_(spec) {
  spec_.validate();
  auto rng = make_rng(seed, {0x1417u});
  Shape s = spec_.input;
  for (const auto& l : spec_.layers) {
    std::unique_ptr<Layer> layer;
    switch (l.kind) {
      case LayerKind::conv2d:
        layer = std::make_unique<Conv2D>(s, static_cast<std::size_t>(l.units), static_cast<std::size_t>(l.kernel), l.activation, rng);
        break;
      case LayerKind::maxpool2d: layer = std::make_unique<MaxPool2D>(s); break;
      case LayerKind::batch_norm: layer = std::make_unique<BatchNorm>(s); break;
      case LayerKind::dropout: layer = std::make_unique<Dropout>(s, l.rate); break;
      case LayerKind::flatten: layer = std::make_unique<Flatten>(s); break;
      case LayerKind::global_average_pool: layer = std::make_unique<GlobalAveragePool>(s); break;
      case LayerKind::dense:
        layer = std::make_unique<Dense>(s, static_cast<std::size_t>(l.units), l.activation, rng);
        break;
    }
    s = layer->output_shape();
    layers_.push_back(std::move(layer));
  }
  layers_.back()->set_emit_logits(true);
}

Network::Network(const Network& other) : spec_(other.spec_), dropout_enabled_(other.dropout_enabled_) {
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Network& Network::operator=(const Network& other) {
  if (this != &other) {
    Network tmp(other);
    *this = std::move(tmp);
  }
  return *this;
}

Network::Network(Network&&) noexcept = default;
Network& Network::operator=(Network&&) noexcept = default;
Network::~Network() = default;

std::vector<double> Network::forward(const Batch& input, bool training, Rng* rng) {
  if (input.shape.size() != spec_.input.size() || input.values.size() != input.n * spec_.input.size()) {
    throw DataError("network input does not match the declared shape");
  }
  for (auto& l : layers_) l->set_dropout(dropout_enabled_);
  activations_.resize(layers_.size() + 1);
  activations_[0] = input;
  activations_[0].shape = spec_.input;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i]->forward(activations_[i], activations_[i + 1], training, rng);
  }
  return activations_.back().values;
}

double Network::backward(std::span<const int> labels) {
  const Batch& logits = activations_.back();
  if (labels.size() != logits.n) throw DataError("label count does not match batch");
  const double n = static_cast<double>(logits.n);
  Batch grad{logits.n, logits.shape, std::vector<double>(logits.n)};
  double loss = 0.0;
  for (std::size_t i = 0; i < logits.n; ++i) {
    const double z = logits.values[i];
    const double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    loss += softplus - (labels[i] == 1 ? z : 0.0);
    grad.values[i] = (sigmoid(z) - labels[i]) / n;
  }
  for (std::size_t i = layers_.size(); i-- > 0;) {
    Batch grad_in;
    layers_[i]->backward(activations_[i], grad, grad_in);
    grad = std::move(grad_in);
  }
  return loss / n;
}

double Network::loss(const Batch& input, std::span<const int> labels, bool dropout_active, Rng* rng) {
  const bool saved = dropout_enabled_;
  dropout_enabled_ = dropout_active;
  auto logits = forward(input, true, rng);
  dropout_enabled_ = saved;
  double loss = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double z = logits[i];
    const double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    loss += softplus - (labels[i] == 1 ? z : 0.0);
  }
  return loss / static_cast<double>(logits.size());
}

std::vector<Network::Param> Network::parameters() {
  std::vector<Param> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    for (auto p : layers_[i]->params()) {
      p.name = "layer" + std::to_string(i) + "." + p.name;
      out.push_back(p);
    }
  }
  return out;
}

void Network::zero_grads() {
  for (auto& p : parameters()) std::fill(p.grads->begin(), p.grads->end(), 0.0);
}

std::vector<std::vector<double>*> Network::state_buffers() {
  std::vector<std::vector<double>*> out;
  for (auto& l : layers_) {
    auto s = l->state();
    out.insert(out.end(), s.begin(), s.end());
  }
  return out;
}

// --- classifier wrapper ---------------------------------------------------------

NeuralNet::NeuralNet(Network net, std::optional<Standardizer> input_scaler)
    : net_(std::move(net)), scaler_(std::move(input_scaler)) {}

double NeuralNet::predict_score(std::span<const double> x) const {
  check_width(x);
  Batch b{1, net_.spec().input, std::vector<double>(x.begin(), x.end())};
  if (scaler_) scaler_->apply(x, b.values);
  return sigmoid(net_.forward(b, false).at(0));
}

std::vector<double> NeuralNet::predict_scores(const Matrix& rows) const {
  if (rows.cols() != width()) throw DataError("nn: input width mismatch");
  std::vector<double> out;
  out.reserve(rows.rows());
  const std::size_t chunk = 64;
  for (std::size_t start = 0; start < rows.rows(); start += chunk) {
    const std::size_t n = std::min(chunk, rows.rows() - start);
    Batch b{n, net_.spec().input, std::vector<double>(n * width())};
    for (std::size_t i = 0; i < n; ++i) {
      auto src = rows.row(start + i);
      std::span<double> dst(b.values.data() + i * width(), width());
      if (scaler_) {
        scaler_->apply(src, dst);
      } else {
        std::copy(src.begin(), src.end(), dst.begin());
      }
    }
    for (double z : net_.forward(b, false)) out.push_back(sigmoid(z));
  }
  return out;
}

nlohmann::json NeuralNet::to_json() const {
  nlohmann::json params = nlohmann::json::array();
  for (auto& p : net_.parameters()) params.push_back({{"name", p.name}, {"size", p.values->size()}, {"data", encode_f32(*p.values)}});
  nlohmann::json state = nlohmann::json::array();
  for (auto* s : net_.state_buffers()) state.push_back(encode_f32(*s));
  nlohmann::json j = {{"spec", net_.spec().to_json()}, {"params", params}, {"state", state}};
  if (scaler_) j["input_scaler"] = {{"means", encode_f32(scaler_->means)}, {"scales", encode_f32(scaler_->scales)}};
  return j;
}

NeuralNet NeuralNet::from_json(const nlohmann::json& j) {
  Network net(NetworkSpec::from_json(j.at("spec")), 0);
  auto params = net.parameters();
  const auto& stored = j.at("params");
  if (stored.size() != params.size()) throw DataError("nn: parameter tensor count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto values = decode_f32(stored[i].at("data").get<std::string>());
    if (values.size() != params[i].values->size()) throw DataError("nn: parameter tensor size mismatch");
    *params[i].values = std::move(values);
  }
  auto state = net.state_buffers();
  const auto& stored_state = j.at("state");
  if (stored_state.size() != state.size()) throw DataError("nn: state buffer count mismatch");
  for (std::size_t i = 0; i < state.size(); ++i) {
    auto values = decode_f32(stored_state[i].get<std::string>());
    if (values.size() != state[i]->size()) throw DataError("nn: state buffer size mismatch");
    *state[i] = std::move(values);
  }
  std::optional<Standardizer> scaler;
  if (j.contains("input_scaler")) {
    scaler = Standardizer{decode_f32(j["input_scaler"].at("means").get<std::string>()),
                          decode_f32(j["input_scaler"].at("scales").get<std::string>())};
  }
  return NeuralNet(std::move(net), std::move(scaler));
}

// --- training ---------------------------------------------------------------------

NeuralNet nn_train(const NetworkSpec& spec, const Matrix& inputs, std::span<const int> labels,
                   const TrainOptions& options, bool standardize_inputs) {
  spec.validate();
  if (inputs.cols() != spec.input.size()) throw DataError("nn_train: input width does not match spec");
  if (inputs.rows() != labels.size() || inputs.rows() == 0) throw DataError("nn_train: bad sample count");
  for (int y : labels) {
    if (y != 0 && y != 1) throw DataError("nn_train: labels must be 0/1");
  }
  if (options.epochs < 0 || options.batch_size < 1) throw ConfigError("nn_train: invalid epochs or batch size");

  std::optional<Standardizer> scaler;
  Matrix x = inputs;
  if (standardize_inputs) {
    scaler = Standardizer::fit(inputs);
    for (std::size_t i = 0; i < x.rows(); ++i) scaler->apply(inputs.row(i), x.row(i));
  }

  Network net(spec, options.seed);
  auto params = net.parameters();
  const auto& opt = spec.optimizer;
  std::vector<std::vector<double>> m1, m2;
  for (auto& p : params) {
    m1.emplace_back(p.values->size(), 0.0);
    m2.emplace_back(p.values->size(), 0.0);
  }
  const std::size_t n = x.rows(), width = x.cols();
  const auto bs = static_cast<std::size_t>(options.batch_size);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> history;
  long step = 0;
  auto dropout_rng = make_rng(options.seed, {0xD60u});

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    auto rng = make_rng(options.seed, {0xE90u, static_cast<std::uint64_t>(epoch)});
    shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t count = std::min(bs, n - start);
      // A trailing batch of one sample gives degenerate batch statistics.
      if (count < 2 && n >= 2) continue;
      Batch batch{count, spec.input, std::vector<double>(count * width)};
      std::vector<int> y(count);
      for (std::size_t i = 0; i < count; ++i) {
        auto src = x.row(order[start + i]);
        std::copy(src.begin(), src.end(), batch.values.begin() + static_cast<std::ptrdiff_t>(i * width));
        y[i] = labels[order[start + i]];
      }
      net.zero_grads();
      net.forward(batch, true, &dropout_rng);
      epoch_loss += net.backward(y) * static_cast<double>(count);
      ++step;
      for (std::size_t k = 0; k < params.size(); ++k) {
        auto& v = *params[k].values;
        const auto& g = *params[k].grads;
        if (opt.kind == OptimizerSpec::Kind::sgd) {
          for (std::size_t i = 0; i < v.size(); ++i) v[i] -= opt.learning_rate * g[i];
        } else {
          const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(step));
          const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(step));
          for (std::size_t i = 0; i < v.size(); ++i) {
            m1[k][i] = opt.beta1 * m1[k][i] + (1 - opt.beta1) * g[i];
            m2[k][i] = opt.beta2 * m2[k][i] + (1 - opt.beta2) * g[i] * g[i];
            v[i] -= opt.learning_rate * (m1[k][i] / c1) / (std::sqrt(m2[k][i] / c2) + opt.epsilon);
          }
        }
      }
    }
    history.push_back(epoch_loss / static_cast<double>(n));
  }
  NeuralNet model(std::move(net), std::move(scaler));
  model.set_loss_history(std::move(history));
  return model;
}

double nn_gradient_check(const NetworkSpec& spec, const Matrix& inputs, std::span<const int> labels, double eps,
                         std::uint64_t seed) {
  Network net(spec, seed);
  net.set_dropout_enabled(false);
  Batch batch{inputs.rows(), spec.input, inputs.data()};
  net.zero_grads();
  net.forward(batch, true);
  net.backward(labels);

  double worst = 0.0;
  for (auto& p : net.parameters()) {
    auto& v = *p.values;
    const auto analytic = *p.grads;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double saved = v[i];
      v[i] = saved + eps;
      const double up = net.loss(batch, labels, false);
      v[i] = saved - eps;
      const double down = net.loss(batch, labels, false);
      v[i] = saved;
      const double numeric = (up - down) / (2 * eps);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
      worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
  }
  return worst;
}

NetworkSpec standard_cnn(Shape input, int blocks, int filters, int hidden, double dropout, double learning_rate) {
  NetworkSpec s;
  s.input = input;
  for (int b = 0; b < blocks; ++b) {
    s.layers.push_back(LayerSpec::conv2d(filters << b, 3, Activation::elu));
    s.layers.push_back(LayerSpec::batch_norm());
    s.layers.push_back(LayerSpec::maxpool2d());
  }
  s.layers.push_back(LayerSpec::flatten());
  s.layers.push_back(LayerSpec::dense(hidden, Activation::elu));
  if (dropout > 0) s.layers.push_back(LayerSpec::dropout(dropout));
  s.layers.push_back(LayerSpec::dense(1, Activation::sigmoid));
  s.optimizer.learning_rate = learning_rate;
  s.validate();
  return s;
}

NetworkSpec standard_mlp(std::size_t features, std::vector<int> hidden, double dropout, double learning_rate) {
  NetworkSpec s;
  s.input = {features, 1, 1};
  for (int units : hidden) {
    s.layers.push_back(LayerSpec::dense(units, Activation::relu));
    s.layers.push_back(LayerSpec::batch_norm());
    if (dropout > 0) s.layers.push_back(LayerSpec::dropout(dropout));
  }
  s.layers.push_back(LayerSpec::dense(1, Activation::sigmoid));
  s.optimizer.learning_rate = learning_rate;
  s.validate();
  return s;
}

}  // namespace thermoscan::nn
