#ifndef PDL_NETCORE_HPP_
#define PDL_NETCORE_HPP_

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pdl/errors.hpp"
#include "pdl/generators.hpp"
#include "pdl/linalg.hpp"
#include "pdl/rng.hpp"

namespace pdl {

enum class Activation { Identity, Tanh, Relu, Softplus };

inline std::string_view activation_name(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
    case Activation::Softplus: return "softplus";
  }
  return "?";
}

inline Activation parse_activation(std::string_view name) {
  if (name == "identity") return Activation::Identity;
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::Relu;
  if (name == "softplus") return Activation::Softplus;
  throw InvalidInput("unknown activation '" + std::string(name) + "'");
}

/// Dense layer, activation, optional identity shortcut h + act(W h + b).
struct BlockSpec {
  std::size_t dense_width = 0;
  Activation activation = Activation::Tanh;
  bool skip = false;
  bool operator==(const BlockSpec&) const = default;
};

/// Feedforward network: `stem` once, then `blocks` cascaded `repeat` times,
/// then a bias-free linear head to `output_dim` logits. With every
/// parameter at zero the output is exactly zero.
struct NetworkSpec {
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
  std::vector<BlockSpec> stem;
  std::vector<BlockSpec> blocks;
  std::size_t repeat = 1;
  bool operator==(const NetworkSpec&) const = default;
};

/// Custom model family. A/B use tanh blocks, C/D use relu blocks; B and D
/// add identity shortcuts around each repeated block.
enum class ModelFamily { A, B, C, D };

inline NetworkSpec make_model(ModelFamily family, std::size_t input_dim, std::size_t output_dim,
                              std::size_t width, std::size_t k) {
  const bool relu = family == ModelFamily::C || family == ModelFamily::D;
  const bool skip = family == ModelFamily::B || family == ModelFamily::D;
  const Activation act = relu ? Activation::Relu : Activation::Tanh;
  NetworkSpec s;
  s.input_dim = input_dim;
  s.output_dim = output_dim;
  s.stem = {{width, act, false}};
  s.blocks = {{width, act, skip}};
  if (relu) s.blocks.push_back({width, act, skip});
  s.repeat = k;
  return s;
}

enum class TensorRole { Weight, Bias };

/// Index range of one parameter tensor inside the flat vector.
struct LayoutEntry {
  std::size_t layer = 0;
  TensorRole role = TensorRole::Weight;
  std::size_t offset = 0;
  std::size_t size = 0;
  bool operator==(const LayoutEntry&) const = default;
};

struct Layer {
  std::size_t in = 0;
  std::size_t out = 0;
  Activation activation = Activation::Identity;
  bool skip = false;
  bool has_bias = true;
  std::size_t weight_offset = 0;  // out x in, row-major
  std::size_t bias_offset = 0;
};

/// Unrolled layer list of a spec plus its parameter layout.
class NetworkLayout {
 public:
  explicit NetworkLayout(const NetworkSpec& spec) {
    if (spec.input_dim == 0) throw InvalidInput("network input_dim must be positive");
    if (spec.output_dim == 0) throw InvalidInput("network output_dim must be positive");
    if (spec.repeat == 0) throw InvalidInput("network repeat must be positive");
    std::size_t width = spec.input_dim;
    auto push = [&](const BlockSpec& b, bool head) {
      if (b.dense_width == 0) throw InvalidInput("block dense_width must be positive");
      if (b.skip && b.dense_width != width) {
        throw InvalidInput("skip block " + std::to_string(layers_.size()) + " maps width " +
                           std::to_string(width) + " to " + std::to_string(b.dense_width));
      }
      Layer l;
      l.in = width;
      l.out = b.dense_width;
      l.activation = b.activation;
      l.skip = b.skip;
      l.has_bias = !head;
      l.weight_offset = count_;
      entries_.push_back({layers_.size(), TensorRole::Weight, count_, l.in * l.out});
      count_ += l.in * l.out;
      if (l.has_bias) {
        l.bias_offset = count_;
        entries_.push_back({layers_.size(), TensorRole::Bias, count_, l.out});
        count_ += l.out;
      }
      layers_.push_back(l);
      width = b.dense_width;
    };
    for (const auto& b : spec.stem) push(b, false);
    for (std::size_t r = 0; r < spec.repeat; ++r) {
      for (const auto& b : spec.blocks) push(b, false);
    }
    push({spec.output_dim, Activation::Identity, false}, true);
  }

  const std::vector<Layer>& layers() const noexcept { return layers_; }
  const std::vector<LayoutEntry>& entries() const noexcept { return entries_; }
  std::size_t param_count() const noexcept { return count_; }

 private:
  std::vector<Layer> layers_;
  std::vector<LayoutEntry> entries_;
  std::size_t count_ = 0;
};

/// Flat parameter vector theta with its layout.
class ParamVector {
 public:
  ParamVector() = default;
  ParamVector(Vector values, std::vector<LayoutEntry> layout)
      : values_(std::move(values)), layout_(std::move(layout)) {
    std::size_t expected = 0;
    for (const auto& e : layout_) {
      if (e.offset != expected) throw InvalidInput("parameter layout ranges must tile [0, m)");
      expected += e.size;
    }
    if (expected != values_.size()) {
      throw InvalidInput("parameter vector length " + std::to_string(values_.size()) +
                         " does not match layout size " + std::to_string(expected));
    }
  }

  static ParamVector zeros(const NetworkSpec& spec) {
    const NetworkLayout l(spec);
    return ParamVector(Vector(l.param_count(), 0.0), l.entries());
  }

  std::size_t size() const noexcept { return values_.size(); }
  const Vector& values() const noexcept { return values_; }
  const std::vector<LayoutEntry>& layout() const noexcept { return layout_; }
  double operator[](std::size_t i) const { return values_[i]; }

  /// Same layout, new values.
  ParamVector with_values(Vector v) const { return ParamVector(std::move(v), layout_); }

  bool operator==(const ParamVector&) const = default;

 private:
  Vector values_;
  std::vector<LayoutEntry> layout_;
};

/// Weights uniform in +-scale*sqrt(6/(fan_in+fan_out)), biases zero.
inline ParamVector init_params(const NetworkSpec& spec, std::uint64_t seed, double scale) {
  if (!(scale > 0.0)) throw InvalidInput("init scale must be > 0");
  const NetworkLayout layout(spec);
  Vector v(layout.param_count(), 0.0);
  Rng rng(seed);
  for (const auto& l : layout.layers()) {
    const double limit = scale * std::sqrt(6.0 / static_cast<double>(l.in + l.out));
    for (std::size_t i = 0; i < l.in * l.out; ++i) v[l.weight_offset + i] = rng.uniform(-limit, limit);
  }
  return ParamVector(std::move(v), layout.entries());
}

namespace detail {

inline double activate(Activation a, double z) {
  switch (a) {
    case Activation::Identity: return z;
    case Activation::Tanh: return std::tanh(z);
    case Activation::Relu: return z > 0.0 ? z : 0.0;
    case Activation::Softplus: return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
  }
  return z;
}

// Derivative in terms of the pre-activation z and the activation value h.
inline double activate_prime(Activation a, double z, double h) {
  switch (a) {
    case Activation::Identity: return 1.0;
    case Activation::Tanh: return 1.0 - h * h;
    case Activation::Relu: return z > 0.0 ? 1.0 : 0.0;  // subgradient 0 at the kink
    case Activation::Softplus: return 1.0 / (1.0 + std::exp(-z));
  }
  return 1.0;
}

}  // namespace detail

/// Network bound to its layout, with a recorded forward pass for reverse sweeps.
class Network {
 public:
  explicit Network(NetworkSpec spec) : spec_(std::move(spec)), layout_(spec_) {}

  const NetworkSpec& spec() const noexcept { return spec_; }
  const NetworkLayout& layout() const noexcept { return layout_; }
  std::size_t param_count() const noexcept { return layout_.param_count(); }

  /// Intermediate values of one forward pass.
  struct Tape {
    std::vector<Vector> inputs;  // input to each layer
    std::vector<Vector> pre;     // W h + b
    std::vector<Vector> act;     // activation values (before the shortcut add)
    Vector output;
  };

  Tape record(const ParamVector& theta, ConstSpan x) const {
    check(theta, x);
    const auto& w = theta.values();
    Tape t;
    const auto& layers = layout_.layers();
    t.inputs.reserve(layers.size());
    t.pre.reserve(layers.size());
    t.act.reserve(layers.size());
    Vector h(x.begin(), x.end());
    for (const auto& l : layers) {
      Vector z(l.out);
      for (std::size_t o = 0; o < l.out; ++o) {
        double s = l.has_bias ? w[l.bias_offset + o] : 0.0;
        const double* row = w.data() + l.weight_offset + o * l.in;
        for (std::size_t i = 0; i < l.in; ++i) s += row[i] * h[i];
        z[o] = s;
      }
      Vector a(l.out);
      for (std::size_t o = 0; o < l.out; ++o) a[o] = detail::activate(l.activation, z[o]);
      Vector next = a;
      if (l.skip) {
        for (std::size_t o = 0; o < l.out; ++o) next[o] += h[o];
      }
      t.inputs.push_back(std::move(h));
      t.pre.push_back(std::move(z));
      t.act.push_back(std::move(a));
      h = std::move(next);
    }
    t.output = std::move(h);
    return t;
  }

  Vector forward(const ParamVector& theta, ConstSpan x) const { return record(theta, x).output; }

  /// One reverse sweep: returns d(upstream . f)/d theta.
  Vector backward(const ParamVector& theta, const Tape& tape, ConstSpan upstream) const {
    if (upstream.size() != spec_.output_dim) throw InvalidInput("upstream gradient size mismatch");
    const auto& w = theta.values();
    const auto& layers = layout_.layers();
    Vector grad(param_count(), 0.0);
    Vector delta(upstream.begin(), upstream.end());  // d/d(layer output)
    for (std::size_t li = layers.size(); li-- > 0;) {
      const Layer& l = layers[li];
      const Vector& h = tape.inputs[li];
      Vector dz(l.out);
      for (std::size_t o = 0; o < l.out; ++o) {
        dz[o] = delta[o] * detail::activate_prime(l.activation, tape.pre[li][o], tape.act[li][o]);
      }
      for (std::size_t o = 0; o < l.out; ++o) {
        double* grow = grad.data() + l.weight_offset + o * l.in;
        for (std::size_t i = 0; i < l.in; ++i) grow[i] = dz[o] * h[i];
        if (l.has_bias) grad[l.bias_offset + o] = dz[o];
      }
      if (li == 0) break;
      Vector dh(l.in, 0.0);
      for (std::size_t o = 0; o < l.out; ++o) {
        const double* row = w.data() + l.weight_offset + o * l.in;
        for (std::size_t i = 0; i < l.in; ++i) dh[i] += row[i] * dz[o];
      }
      if (l.skip) {
        for (std::size_t i = 0; i < l.in; ++i) dh[i] += delta[i];
      }
      delta = std::move(dh);
    }
    return grad;
  }

  /// Rows are grad_theta f_i(x), one reverse sweep per output.
  Matrix jacobian(const ParamVector& theta, const Tape& tape) const {
    Matrix j(spec_.output_dim, param_count());
    Vector seed(spec_.output_dim, 0.0);
    for (std::size_t i = 0; i < spec_.output_dim; ++i) {
      seed[i] = 1.0;
      const Vector row = backward(theta, tape, seed);
      std::copy(row.begin(), row.end(), j.row(i).begin());
      seed[i] = 0.0;
    }
    return j;
  }

  /// Smallest |pre-activation| over the relu units, or +inf without relu.
  double min_relu_margin(const ParamVector& theta, ConstSpan x) const {
    const Tape t = record(theta, x);
    double m = INFINITY;
    const auto& layers = layout_.layers();
    for (std::size_t li = 0; li < layers.size(); ++li) {
      if (layers[li].activation != Activation::Relu) continue;
      for (double z : t.pre[li]) m = std::min(m, std::abs(z));
    }
    return m;
  }

 private:
  void check(const ParamVector& theta, ConstSpan x) const {
    if (x.size() != spec_.input_dim) {
      throw InvalidInput("input has dimension " + std::to_string(x.size()) + ", network expects " +
                         std::to_string(spec_.input_dim));
    }
    if (theta.size() != param_count()) {
      throw InvalidInput("parameter vector has " + std::to_string(theta.size()) +
                         " entries, network expects " + std::to_string(param_count()));
    }
  }

  NetworkSpec spec_;
  NetworkLayout layout_;
};

inline Vector forward(const NetworkSpec& spec, const ParamVector& theta, ConstSpan x) {
  return Network(spec).forward(theta, x);
}

/// g(x, y) = grad_theta d_Phi(1_y, f_theta(x)) = J^T (grad Phi*(f) - 1_y).
inline Vector loss_grad(const Network& net, const ParamVector& theta, const GeneratorSpec& gen,
                        ConstSpan x, std::size_t y) {
  const auto tape = net.record(theta, x);
  return net.backward(theta, tape, link_error(gen, y, tape.output));
}

inline Vector loss_grad(const NetworkSpec& spec, const ParamVector& theta, const GeneratorSpec& gen,
                        ConstSpan x, std::size_t y) {
  return loss_grad(Network(spec), theta, gen, x, y);
}

inline Matrix jacobian(const NetworkSpec& spec, const ParamVector& theta, ConstSpan x) {
  const Network net(spec);
  return net.jacobian(theta, net.record(theta, x));
}

/// Central differences of d_Phi(1_y, f_theta(x)), one coordinate at a time.
inline Vector fd_grad_oracle(const NetworkSpec& spec, const ParamVector& theta, const GeneratorSpec& gen,
                             ConstSpan x, std::size_t y, double step) {
  if (!(step > 0.0)) throw InvalidInput("finite-difference step must be > 0");
  const Network net(spec);
  Vector v = theta.values();
  Vector g(v.size());
  for (std::size_t j = 0; j < v.size(); ++j) {
    const double orig = v[j];
    v[j] = orig + step;
    const double plus = fy_loss_label(gen, y, net.forward(theta.with_values(v), x));
    v[j] = orig - step;
    const double minus = fy_loss_label(gen, y, net.forward(theta.with_values(v), x));
    v[j] = orig;
    g[j] = (plus - minus) / (2.0 * step);
  }
  return g;
}

}  // namespace pdl

#endif  // PDL_NETCORE_HPP_
