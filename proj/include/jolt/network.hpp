// Feed-forward network core: layer descriptors, parameter storage, and
// reverse-mode forward/backward passes.
//
// Topology (NetworkSpec) and parameters (ParamSet) are separate values; the
// passes are free functions over both. A forward pass records the
// activations it produced into a Trace, which the backward pass consumes.
// Everything runs in 64-bit floats.
#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "jolt/error.hpp"
#include "jolt/rng.hpp"
#include "jolt/tensor.hpp"

namespace jolt {

struct DenseLayer {
  std::size_t in = 0, out = 0;
};
struct Conv2dLayer {
  std::size_t in_ch = 0, out_ch = 0, kernel = 0, stride = 1, pad = 0;
};
struct ReluLayer {};
struct GlobalAvgPoolLayer {};
struct SoftmaxLayer {
  std::size_t classes = 0;
};

using LayerDesc =
    std::variant<DenseLayer, Conv2dLayer, ReluLayer, GlobalAvgPoolLayer, SoftmaxLayer>;

inline std::string layer_kind(const LayerDesc& l) {
  if (std::holds_alternative<DenseLayer>(l)) return "dense";
  if (std::holds_alternative<Conv2dLayer>(l)) return "conv2d";
  if (std::holds_alternative<ReluLayer>(l)) return "relu";
  if (std::holds_alternative<GlobalAvgPoolLayer>(l)) return "global_avg_pool";
  return "softmax";
}

/// Per-sample feature layout flowing between layers: either a flat vector or
/// an image block (channels, height, width).
struct FeatureDims {
  bool image = false;
  std::size_t channels = 0, height = 0, width = 0;

  static FeatureDims flat(std::size_t n) { return {false, n, 1, 1}; }
  static FeatureDims image_chw(std::size_t c, std::size_t h, std::size_t w) {
    return {true, c, h, w};
  }
  std::size_t count() const { return channels * height * width; }
  std::string describe() const {
    if (!image) return "flat " + std::to_string(channels);
    return std::to_string(channels) + "x" + std::to_string(height) + "x" +
           std::to_string(width);
  }
};

/// Ordered layer stack. The final layer must be softmax over `class_count`
/// classes; validate() checks shape compatibility and reports the offending
/// layer on mismatch.
struct NetworkSpec {
  FeatureDims input;
  std::vector<LayerDesc> layers;
  std::size_t class_count = 0;

  /// Feature dims entering each layer, plus the final output dims
  /// (layers.size() + 1 entries). Throws ConfigError on any mismatch.
  std::vector<FeatureDims> feature_dims() const {
    std::vector<FeatureDims> dims;
    dims.push_back(input);
    for (std::size_t li = 0; li < layers.size(); ++li) {
      const FeatureDims& d = dims.back();
      const LayerDesc& l = layers[li];
      auto fail = [&](const std::string& msg) {
        throw ConfigError("layer " + std::to_string(li) + " (" + layer_kind(l) +
                          "): " + msg + " (input is " + d.describe() + ")");
      };
      if (const auto* dense = std::get_if<DenseLayer>(&l)) {
        if (dense->in == 0 || dense->out == 0) fail("zero-sized dense layer");
        if (d.count() != dense->in) {
          fail("expects " + std::to_string(dense->in) + " inputs");
        }
        dims.push_back(FeatureDims::flat(dense->out));
      } else if (const auto* conv = std::get_if<Conv2dLayer>(&l)) {
        if (!d.image) fail("needs an image input");
        if (conv->in_ch != d.channels) {
          fail("expects " + std::to_string(conv->in_ch) + " input channels");
        }
        if (conv->kernel == 0 || conv->stride == 0 || conv->out_ch == 0) {
          fail("kernel, stride and out_ch must be positive");
        }
        const std::size_t padded_h = d.height + 2 * conv->pad;
        const std::size_t padded_w = d.width + 2 * conv->pad;
        if (padded_h < conv->kernel || padded_w < conv->kernel) {
          fail("kernel larger than padded input");
        }
        const std::size_t oh = (padded_h - conv->kernel) / conv->stride + 1;
        const std::size_t ow = (padded_w - conv->kernel) / conv->stride + 1;
        dims.push_back(FeatureDims::image_chw(conv->out_ch, oh, ow));
      } else if (std::holds_alternative<ReluLayer>(l)) {
        dims.push_back(d);
      } else if (std::holds_alternative<GlobalAvgPoolLayer>(l)) {
        if (!d.image) fail("needs an image input");
        dims.push_back(FeatureDims::flat(d.channels));
      } else {
        const auto& sm = std::get<SoftmaxLayer>(l);
        if (li + 1 != layers.size()) fail("softmax must be the final layer");
        if (d.count() != sm.classes) {
          fail("expects " + std::to_string(sm.classes) + " logits");
        }
        dims.push_back(FeatureDims::flat(sm.classes));
      }
    }
    return dims;
  }

  void validate() const {
    if (layers.empty()) throw ConfigError("network: no layers");
    if (!std::holds_alternative<SoftmaxLayer>(layers.back())) {
      throw ConfigError("network: final layer must be softmax");
    }
    if (std::get<SoftmaxLayer>(layers.back()).classes != class_count) {
      throw ConfigError("network: softmax size differs from class count");
    }
    (void)feature_dims();
  }

  std::size_t input_size() const { return input.count(); }
};

/// Named parameters plus one momentum buffer per parameter. std::map keeps
/// iteration order deterministic.
struct ParamSet {
  std::map<std::string, Tensor> params;
  std::map<std::string, Tensor> momentum;

  void add(const std::string& name, Tensor t) {
    if (params.count(name)) throw ContractError("duplicate parameter " + name);
    Tensor m = Tensor::zeros(t.shape);
    params.emplace(name, std::move(t));
    momentum.emplace(name, std::move(m));
  }

  void zero_grads() {
    for (auto& [name, p] : params) p.zero_grad();
  }

  void reset_momentum() {
    for (auto& [name, m] : momentum) m.values.assign(m.values.size(), 0.0);
  }

  std::size_t total_size() const {
    std::size_t n = 0;
    for (const auto& [name, p] : params) n += p.numel();
    return n;
  }
};

inline std::string param_name(std::size_t layer_index, const char* which) {
  return "L" + std::to_string(layer_index) + "." + which;
}

/// He fan-in initialization for dense/conv weights, zero biases. Draw order
/// is fixed by layer order, independent of map iteration.
inline ParamSet init_params(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  ParamSet ps;
  Rng rng(seed);
  for (std::size_t li = 0; li < spec.layers.size(); ++li) {
    if (const auto* dense = std::get_if<DenseLayer>(&spec.layers[li])) {
      Tensor w = Tensor::matrix(dense->in, dense->out);
      const double scale = std::sqrt(2.0 / static_cast<double>(dense->in));
      for (double& v : w.values) v = scale * rng.normal();
      ps.add(param_name(li, "weight"), std::move(w));
      ps.add(param_name(li, "bias"), Tensor::zeros({dense->out}));
    } else if (const auto* conv = std::get_if<Conv2dLayer>(&spec.layers[li])) {
      Tensor w = Tensor::zeros({conv->out_ch, conv->in_ch, conv->kernel, conv->kernel});
      const double fan_in =
          static_cast<double>(conv->in_ch * conv->kernel * conv->kernel);
      const double scale = std::sqrt(2.0 / fan_in);
      for (double& v : w.values) v = scale * rng.normal();
      ps.add(param_name(li, "weight"), std::move(w));
      ps.add(param_name(li, "bias"), Tensor::zeros({conv->out_ch}));
    }
  }
  return ps;
}

/// Activations recorded by a forward pass: acts[0] is the batch, acts[i+1]
/// the output of layer i.
struct Trace {
  std::vector<Tensor> acts;
  bool valid = false;
};

namespace detail {

inline void dense_forward(const DenseLayer& l, const Tensor& w, const Tensor& b,
                          const Tensor& x, Tensor& y) {
  const std::size_t n = x.rows();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < l.out; ++j) {
      double acc = b.values[j];
      for (std::size_t k = 0; k < l.in; ++k) {
        acc += x.values[i * l.in + k] * w.values[k * l.out + j];
      }
      y.values[i * l.out + j] = acc;
    }
  }
}

inline void dense_backward(const DenseLayer& l, Tensor& w, Tensor& b,
                           const Tensor& x, const Tensor& gy, Tensor& gx) {
  const std::size_t n = x.rows();
  w.ensure_grad();
  b.ensure_grad();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < l.out; ++j) {
      const double g = gy.values[i * l.out + j];
      b.grad[j] += g;
      for (std::size_t k = 0; k < l.in; ++k) {
        w.grad[k * l.out + j] += x.values[i * l.in + k] * g;
        gx.values[i * l.in + k] += w.values[k * l.out + j] * g;
      }
    }
  }
}

// Direct convolution, NCHW flattened per sample.
inline void conv_forward(const Conv2dLayer& l, const FeatureDims& din,
                         const FeatureDims& dout, const Tensor& w, const Tensor& b,
                         const Tensor& x, Tensor& y) {
  const std::size_t n = x.rows();
  const std::size_t ih = din.height, iw = din.width;
  const std::size_t oh = dout.height, ow = dout.width;
  const std::size_t k = l.kernel;
  for (std::size_t s = 0; s < n; ++s) {
    const double* xs = &x.values[s * din.count()];
    double* ys = &y.values[s * dout.count()];
    for (std::size_t co = 0; co < l.out_ch; ++co) {
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
          double acc = b.values[co];
          for (std::size_t ci = 0; ci < l.in_ch; ++ci) {
            for (std::size_t ky = 0; ky < k; ++ky) {
              const std::ptrdiff_t iy =
                  static_cast<std::ptrdiff_t>(oy * l.stride + ky) -
                  static_cast<std::ptrdiff_t>(l.pad);
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(ih)) continue;
              for (std::size_t kx = 0; kx < k; ++kx) {
                const std::ptrdiff_t ix =
                    static_cast<std::ptrdiff_t>(ox * l.stride + kx) -
                    static_cast<std::ptrdiff_t>(l.pad);
                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(iw)) continue;
                acc += xs[(ci * ih + iy) * iw + ix] *
                       w.values[((co * l.in_ch + ci) * k + ky) * k + kx];
              }
            }
          }
          ys[(co * oh + oy) * ow + ox] = acc;
        }
      }
    }
  }
}

inline void conv_backward(const Conv2dLayer& l, const FeatureDims& din,
                          const FeatureDims& dout, Tensor& w, Tensor& b,
                          const Tensor& x, const Tensor& gy, Tensor& gx) {
  const std::size_t n = x.rows();
  const std::size_t ih = din.height, iw = din.width;
  const std::size_t oh = dout.height, ow = dout.width;
  const std::size_t k = l.kernel;
  w.ensure_grad();
  b.ensure_grad();
  for (std::size_t s = 0; s < n; ++s) {
    const double* xs = &x.values[s * din.count()];
    double* gxs = &gx.values[s * din.count()];
    const double* gys = &gy.values[s * dout.count()];
    for (std::size_t co = 0; co < l.out_ch; ++co) {
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
          const double g = gys[(co * oh + oy) * ow + ox];
          b.grad[co] += g;
          for (std::size_t ci = 0; ci < l.in_ch; ++ci) {
            for (std::size_t ky = 0; ky < k; ++ky) {
              const std::ptrdiff_t iy =
                  static_cast<std::ptrdiff_t>(oy * l.stride + ky) -
                  static_cast<std::ptrdiff_t>(l.pad);
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(ih)) continue;
              for (std::size_t kx = 0; kx < k; ++kx) {
                const std::ptrdiff_t ix =
                    static_cast<std::ptrdiff_t>(ox * l.stride + kx) -
                    static_cast<std::ptrdiff_t>(l.pad);
                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(iw)) continue;
                const std::size_t xi = (ci * ih + iy) * iw + ix;
                const std::size_t wi = ((co * l.in_ch + ci) * k + ky) * k + kx;
                w.grad[wi] += xs[xi] * g;
                gxs[xi] += w.values[wi] * g;
              }
            }
          }
        }
      }
    }
  }
}

inline void softmax_forward(const Tensor& x, Tensor& y) {
  const std::size_t n = x.rows(), c = x.cols();
  for (std::size_t i = 0; i < n; ++i) {
    double m = x.values[i * c];
    for (std::size_t j = 1; j < c; ++j) m = std::max(m, x.values[i * c + j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double e = std::exp(x.values[i * c + j] - m);  // log-sum-exp shift
      y.values[i * c + j] = e;
      sum += e;
    }
    for (std::size_t j = 0; j < c; ++j) y.values[i * c + j] /= sum;
  }
}

inline void softmax_backward(const Tensor& y, const Tensor& gy, Tensor& gx) {
  const std::size_t n = y.rows(), c = y.cols();
  for (std::size_t i = 0; i < n; ++i) {
    double dot = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      dot += gy.values[i * c + j] * y.values[i * c + j];
    }
    for (std::size_t j = 0; j < c; ++j) {
      gx.values[i * c + j] = y.values[i * c + j] * (gy.values[i * c + j] - dot);
    }
  }
}

}  // namespace detail

/// Runs the batch through the stack and returns the [b x c] softmax output.
/// Records activations into `trace` when given. Throws ConfigError on shape
/// mismatch and NumericError if any activation is non-finite.
inline Tensor forward(const NetworkSpec& spec, const ParamSet& params,
                      const Tensor& batch, Trace* trace = nullptr) {
  const std::vector<FeatureDims> dims = spec.feature_dims();
  if (batch.shape.size() != 2 || batch.cols() != spec.input_size()) {
    throw ConfigError("forward: batch has " +
                      (batch.shape.size() == 2 ? std::to_string(batch.cols())
                                               : std::string("non-matrix")) +
                      " features, network expects " +
                      std::to_string(spec.input_size()));
  }
  const std::size_t n = batch.rows();
  std::vector<Tensor> acts;
  acts.reserve(spec.layers.size() + 1);
  acts.push_back(batch);
  for (std::size_t li = 0; li < spec.layers.size(); ++li) {
    const Tensor& x = acts.back();
    Tensor y = Tensor::matrix(n, dims[li + 1].count());
    const LayerDesc& l = spec.layers[li];
    if (const auto* dense = std::get_if<DenseLayer>(&l)) {
      const Tensor& w = params.params.at(param_name(li, "weight"));
      const Tensor& b = params.params.at(param_name(li, "bias"));
      detail::dense_forward(*dense, w, b, x, y);
    } else if (const auto* conv = std::get_if<Conv2dLayer>(&l)) {
      const Tensor& w = params.params.at(param_name(li, "weight"));
      const Tensor& b = params.params.at(param_name(li, "bias"));
      detail::conv_forward(*conv, dims[li], dims[li + 1], w, b, x, y);
    } else if (std::holds_alternative<ReluLayer>(l)) {
      for (std::size_t i = 0; i < x.numel(); ++i) {
        y.values[i] = x.values[i] > 0.0 ? x.values[i] : 0.0;
      }
    } else if (std::holds_alternative<GlobalAvgPoolLayer>(l)) {
      const std::size_t ch = dims[li].channels;
      const std::size_t hw = dims[li].height * dims[li].width;
      for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t c = 0; c < ch; ++c) {
          double acc = 0.0;
          for (std::size_t p = 0; p < hw; ++p) {
            acc += x.values[(s * ch + c) * hw + p];
          }
          y.values[s * ch + c] = acc / static_cast<double>(hw);
        }
      }
    } else {
      detail::softmax_forward(x, y);
    }
    y.check_finite("activation after layer " + std::to_string(li) + " (" +
                   layer_kind(l) + ")");
    acts.push_back(std::move(y));
  }
  Tensor out = acts.back();
  if (trace) {
    trace->acts = std::move(acts);
    trace->valid = true;
  }
  return out;
}

/// Propagates `upstream` (dL/d output, [b x c]) back through the stack,
/// accumulating parameter gradients into `params`. Returns dL/d batch.
inline Tensor backward(const NetworkSpec& spec, ParamSet& params, const Trace& trace,
                       const Tensor& upstream) {
  if (!trace.valid || trace.acts.size() != spec.layers.size() + 1) {
    throw UsageError("backward: no matching forward trace");
  }
  const std::vector<FeatureDims> dims = spec.feature_dims();
  if (upstream.shape != trace.acts.back().shape) {
    throw ConfigError("backward: upstream gradient shape mismatch");
  }
  const std::size_t n = upstream.rows();
  Tensor gy = upstream;
  for (std::size_t li = spec.layers.size(); li-- > 0;) {
    const Tensor& x = trace.acts[li];
    Tensor gx = Tensor::matrix(n, dims[li].count());
    const LayerDesc& l = spec.layers[li];
    if (const auto* dense = std::get_if<DenseLayer>(&l)) {
      Tensor& w = params.params.at(param_name(li, "weight"));
      Tensor& b = params.params.at(param_name(li, "bias"));
      detail::dense_backward(*dense, w, b, x, gy, gx);
    } else if (const auto* conv = std::get_if<Conv2dLayer>(&l)) {
      Tensor& w = params.params.at(param_name(li, "weight"));
      Tensor& b = params.params.at(param_name(li, "bias"));
      detail::conv_backward(*conv, dims[li], dims[li + 1], w, b, x, gy, gx);
    } else if (std::holds_alternative<ReluLayer>(l)) {
      for (std::size_t i = 0; i < x.numel(); ++i) {
        gx.values[i] = x.values[i] > 0.0 ? gy.values[i] : 0.0;
      }
    } else if (std::holds_alternative<GlobalAvgPoolLayer>(l)) {
      const std::size_t ch = dims[li].channels;
      const std::size_t hw = dims[li].height * dims[li].width;
      for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t c = 0; c < ch; ++c) {
          const double g = gy.values[s * ch + c] / static_cast<double>(hw);
          for (std::size_t p = 0; p < hw; ++p) {
            gx.values[(s * ch + c) * hw + p] = g;
          }
        }
      }
    } else {
      detail::softmax_backward(trace.acts[li + 1], gy, gx);
    }
    gx.check_finite("gradient into layer " + std::to_string(li));
    gy = std::move(gx);
  }
  for (const auto& [name, p] : params.params) p.check_grad_finite(name);
  return gy;
}

/// Convenience wrapper owning spec + params + the last forward trace.
class Network {
 public:
  Network(NetworkSpec spec, ParamSet params)
      : spec_(std::move(spec)), params_(std::move(params)) {
    spec_.validate();
  }

  Network(NetworkSpec spec, std::uint64_t seed)
      : spec_(std::move(spec)), params_(init_params(spec_, seed)) {}

  Tensor forward(const Tensor& batch) {
    return jolt::forward(spec_, params_, batch, &trace_);
  }

  Tensor backward(const Tensor& upstream) {
    if (!trace_.valid) throw UsageError("Network::backward called before forward");
    return jolt::backward(spec_, params_, trace_, upstream);
  }

  const NetworkSpec& spec() const { return spec_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

 private:
  NetworkSpec spec_;
  ParamSet params_;
  Trace trace_;
};

/// Builds a NetworkSpec from a preset string.
///
///   mlp:IN-H1-...-C      dense stack with relu between layers
///   linear:IN-C          single dense layer
///   cnn:CHxHxW:F1,F2:C   3x3/stride1/pad1 conv + relu per filter count,
///                        then global average pool, dense, softmax
inline NetworkSpec parse_network_preset(const std::string& preset) {
  const auto colon = preset.find(':');
  if (colon == std::string::npos) {
    throw ConfigError("network preset '" + preset + "': expected kind:dims");
  }
  const std::string kind = preset.substr(0, colon);
  const std::string rest = preset.substr(colon + 1);
  auto parse_nums = [&preset](const std::string& s, char sep) {
    std::vector<std::size_t> out;
    std::string cur;
    std::stringstream ss(s);
    while (std::getline(ss, cur, sep)) {
      try {
        const long v = std::stol(cur);
        if (v <= 0) throw std::invalid_argument("non-positive");
        out.push_back(static_cast<std::size_t>(v));
      } catch (const std::exception&) {
        throw ConfigError("network preset '" + preset + "': bad number '" + cur + "'");
      }
    }
    return out;
  };
  NetworkSpec spec;
  if (kind == "mlp" || kind == "linear") {
    const std::vector<std::size_t> dims = parse_nums(rest, '-');
    if (dims.size() < 2) {
      throw ConfigError("network preset '" + preset + "': needs at least in-out");
    }
    if (kind == "linear" && dims.size() != 2) {
      throw ConfigError("network preset '" + preset + "': linear is in-out only");
    }
    spec.input = FeatureDims::flat(dims[0]);
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
      spec.layers.push_back(DenseLayer{dims[i], dims[i + 1]});
      if (i + 2 < dims.size()) spec.layers.push_back(ReluLayer{});
    }
    spec.class_count = dims.back();
    spec.layers.push_back(SoftmaxLayer{spec.class_count});
  } else if (kind == "cnn") {
    const auto c2 = rest.find(':');
    const auto c3 = c2 == std::string::npos ? std::string::npos : rest.find(':', c2 + 1);
    if (c2 == std::string::npos || c3 == std::string::npos) {
      throw ConfigError("network preset '" + preset + "': expected cnn:CHxHxW:F,..:C");
    }
    const std::vector<std::size_t> chw = parse_nums(rest.substr(0, c2), 'x');
    if (chw.size() != 3) {
      throw ConfigError("network preset '" + preset + "': input must be CHxHxW");
    }
    const std::vector<std::size_t> filters =
        parse_nums(rest.substr(c2 + 1, c3 - c2 - 1), ',');
    const std::vector<std::size_t> classes = parse_nums(rest.substr(c3 + 1), ',');
    if (filters.empty() || classes.size() != 1) {
      throw ConfigError("network preset '" + preset + "': expected cnn:CHxHxW:F,..:C");
    }
    spec.input = FeatureDims::image_chw(chw[0], chw[1], chw[2]);
    std::size_t prev = chw[0];
    for (std::size_t f : filters) {
      spec.layers.push_back(Conv2dLayer{prev, f, 3, 1, 1});
      spec.layers.push_back(ReluLayer{});
      prev = f;
    }
    spec.layers.push_back(GlobalAvgPoolLayer{});
    spec.layers.push_back(DenseLayer{prev, classes[0]});
    spec.class_count = classes[0];
    spec.layers.push_back(SoftmaxLayer{spec.class_count});
  } else {
    throw ConfigError("unknown network preset kind '" + kind + "'");
  }
  spec.validate();
  return spec;
}

}  // namespace jolt
