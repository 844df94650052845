#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gfscma/rng.hpp"

namespace gfscma::nn {

using json = nlohmann::json;

enum class Activation { rectifier, sigmoid, hyperbolic_tangent, identity };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::rectifier: return "rectifier";
    case Activation::sigmoid: return "sigmoid";
    case Activation::hyperbolic_tangent: return "hyperbolic-tangent";
    case Activation::identity: return "identity";
  }
  throw std::logic_error("unknown activation");
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "rectifier") return Activation::rectifier;
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "hyperbolic-tangent") return Activation::hyperbolic_tangent;
  if (s == "identity") return Activation::identity;
  throw std::invalid_argument("unknown activation tag: " + s);
}

inline double activate(Activation a, double z) {
  switch (a) {
    case Activation::rectifier: return z > 0.0 ? z : 0.0;
    case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-z));
    case Activation::hyperbolic_tangent: return std::tanh(z);
    case Activation::identity: return z;
  }
  return z;
}

/// d activation / d z, given both the pre-activation z and the output a.
inline double activate_grad(Activation act, double z, double a) {
  switch (act) {
    case Activation::rectifier: return z > 0.0 ? 1.0 : 0.0;
    case Activation::sigmoid: return a * (1.0 - a);
    case Activation::hyperbolic_tangent: return 1.0 - a * a;
    case Activation::identity: return 1.0;
  }
  return 1.0;
}

/// Feed-forward stack description: layer_sizes = [input, hidden..., output],
/// one activation per non-input layer.
struct NetworkSpec {
  std::vector<int> layer_sizes;
  std::vector<Activation> activations;

  int input_width() const { return layer_sizes.front(); }
  int output_width() const { return layer_sizes.back(); }
  int layer_count() const { return static_cast<int>(activations.size()); }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l)
      n += static_cast<std::size_t>(layer_sizes[l]) * layer_sizes[l + 1] +
           layer_sizes[l + 1];
    return n;
  }

  void validate() const {
    if (layer_sizes.size() < 2)
      throw std::invalid_argument("network needs at least one layer");
    if (activations.size() + 1 != layer_sizes.size())
      throw std::invalid_argument("need one activation per non-input layer");
    for (int s : layer_sizes)
      if (s <= 0) throw std::invalid_argument("layer sizes must be positive");
  }

  bool operator==(const NetworkSpec&) const = default;

  json to_json() const {
    json acts = json::array();
    for (Activation a : activations) acts.push_back(to_string(a));
    return json{{"layer_sizes", layer_sizes}, {"activations", acts}};
  }

  static NetworkSpec from_json(const json& j) {
    NetworkSpec spec;
    spec.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
    for (const auto& a : j.at("activations"))
      spec.activations.push_back(activation_from_string(a.get<std::string>()));
    spec.validate();
    return spec;
  }
};

/// Two hidden rectifier layers of `mult` times the input width; the default
/// head shape for all detection networks.
inline NetworkSpec make_head_spec(int input_width, int output_width,
                                  Activation output_activation, int mult = 4,
                                  int hidden_layers = 2) {
  NetworkSpec spec;
  spec.layer_sizes.push_back(input_width);
  for (int i = 0; i < hidden_layers; ++i)
    spec.layer_sizes.push_back(mult * input_width);
  spec.layer_sizes.push_back(output_width);
  spec.activations.assign(hidden_layers, Activation::rectifier);
  spec.activations.push_back(output_activation);
  spec.validate();
  return spec;
}

/// Row-major batch: rows = samples, cols = feature width.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  std::span<double> row(int r) { return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)}; }
  std::span<const double> row(int r) const { return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)}; }
};

/// Flat parameter block with per-layer weight/bias views. Layout per layer l:
/// W_l row-major (out x in), then b_l. Doubles as a gradient holder.
class ParamStore {
 public:
  ParamStore() = default;

  explicit ParamStore(const NetworkSpec& spec) : spec_(spec) {
    spec_.validate();
    std::size_t off = 0;
    for (int l = 0; l < spec_.layer_count(); ++l) {
      weight_offsets_.push_back(off);
      off += static_cast<std::size_t>(fan_in(l)) * fan_out(l);
      bias_offsets_.push_back(off);
      off += fan_out(l);
    }
    values_.assign(off, 0.0);
  }

  /// Zero biases, weights uniform in +-sqrt(6 / (fan_in + fan_out)).
  static ParamStore glorot_init(const NetworkSpec& spec, RandomStream& rng) {
    ParamStore p(spec);
    for (int l = 0; l < spec.layer_count(); ++l) {
      const double limit = std::sqrt(6.0 / (p.fan_in(l) + p.fan_out(l)));
      for (double& w : p.weight(l)) w = rng.uniform(-limit, limit);
    }
    return p;
  }

  const NetworkSpec& spec() const { return spec_; }
  bool empty() const { return values_.empty(); }

  int fan_in(int l) const { return spec_.layer_sizes[l]; }
  int fan_out(int l) const { return spec_.layer_sizes[l + 1]; }

  std::span<double> weight(int l) {
    return {values_.data() + weight_offsets_[l],
            static_cast<std::size_t>(fan_in(l)) * fan_out(l)};
  }
  std::span<const double> weight(int l) const {
    return {values_.data() + weight_offsets_[l],
            static_cast<std::size_t>(fan_in(l)) * fan_out(l)};
  }
  std::span<double> bias(int l) {
    return {values_.data() + bias_offsets_[l], static_cast<std::size_t>(fan_out(l))};
  }
  std::span<const double> bias(int l) const {
    return {values_.data() + bias_offsets_[l], static_cast<std::size_t>(fan_out(l))};
  }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  std::uint64_t revision() const { return revision_; }
  void bump_revision() { ++revision_; }

 private:
  NetworkSpec spec_;
  std::vector<double> values_;
  std::vector<std::size_t> weight_offsets_;
  std::vector<std::size_t> bias_offsets_;
  std::uint64_t revision_ = 0;
};

/// Intermediates kept by forward() so backward() can run. Tied to the exact
/// parameter revision that produced it.
struct ForwardCache {
  NetworkSpec spec;
  std::uint64_t params_revision = 0;
  Mat input;
  std::vector<Mat> pre;   // z_l per layer
  std::vector<Mat> post;  // a_l per layer
};

inline Mat forward(const NetworkSpec& spec, const ParamStore& params,
                   const Mat& input, ForwardCache* cache = nullptr) {
  if (params.spec() != spec)
    throw std::invalid_argument("forward: params built for a different spec");
  if (input.cols != spec.input_width())
    throw std::invalid_argument("forward: input width " + std::to_string(input.cols) +
                                " != spec input width " +
                                std::to_string(spec.input_width()));
  if (cache) {
    cache->spec = spec;
    cache->params_revision = params.revision();
    cache->input = input;
    cache->pre.clear();
    cache->post.clear();
  }

  Mat a = input;
  for (int l = 0; l < spec.layer_count(); ++l) {
    const int in_w = spec.layer_sizes[l];
    const int out_w = spec.layer_sizes[l + 1];
    Mat z(a.rows, out_w);
    const auto w = params.weight(l);
    const auto b = params.bias(l);
    for (int r = 0; r < a.rows; ++r) {
      const double* x = a.data.data() + static_cast<std::size_t>(r) * in_w;
      double* zr = z.data.data() + static_cast<std::size_t>(r) * out_w;
      for (int o = 0; o < out_w; ++o) {
        const double* wr = w.data() + static_cast<std::size_t>(o) * in_w;
        double acc = b[o];
        for (int i = 0; i < in_w; ++i) acc += wr[i] * x[i];
        zr[o] = acc;
      }
    }
    Mat act(z.rows, z.cols);
    for (std::size_t i = 0; i < z.data.size(); ++i)
      act.data[i] = activate(spec.activations[l], z.data[i]);
    if (cache) {
      cache->pre.push_back(z);
      cache->post.push_back(act);
    }
    a = std::move(act);
  }
  return a;
}

struct BackwardResult {
  ParamStore grads;  // same layout as the parameters
  Mat input_grad;
};

inline BackwardResult backward(const NetworkSpec& spec, const ParamStore& params,
                               const ForwardCache& cache, const Mat& output_grad) {
  if (cache.spec != spec || params.spec() != spec)
    throw std::invalid_argument("backward: spec mismatch");
  if (cache.params_revision != params.revision())
    throw std::invalid_argument("backward: cache is stale (params changed since forward)");
  if (output_grad.rows != cache.input.rows ||
      output_grad.cols != spec.output_width())
    throw std::invalid_argument("backward: output gradient shape mismatch");

  BackwardResult res;
  res.grads = ParamStore(spec);
  const int batch = cache.input.rows;

  Mat d_act = output_grad;
  for (int l = spec.layer_count() - 1; l >= 0; --l) {
    const int in_w = spec.layer_sizes[l];
    const int out_w = spec.layer_sizes[l + 1];
    const Mat& z = cache.pre[l];
    const Mat& a = cache.post[l];

    Mat d_z(batch, out_w);
    for (std::size_t i = 0; i < d_z.data.size(); ++i)
      d_z.data[i] = d_act.data[i] * activate_grad(spec.activations[l], z.data[i], a.data[i]);

    const Mat& below = (l == 0) ? cache.input : cache.post[l - 1];
    auto dw = res.grads.weight(l);
    auto db = res.grads.bias(l);
    for (int r = 0; r < batch; ++r) {
      const double* x = below.data.data() + static_cast<std::size_t>(r) * in_w;
      const double* dz = d_z.data.data() + static_cast<std::size_t>(r) * out_w;
      for (int o = 0; o < out_w; ++o) {
        double* dwr = dw.data() + static_cast<std::size_t>(o) * in_w;
        const double g = dz[o];
        for (int i = 0; i < in_w; ++i) dwr[i] += g * x[i];
        db[o] += g;
      }
    }

    Mat d_below(batch, in_w);
    const auto w = params.weight(l);
    for (int r = 0; r < batch; ++r) {
      const double* dz = d_z.data.data() + static_cast<std::size_t>(r) * out_w;
      double* dx = d_below.data.data() + static_cast<std::size_t>(r) * in_w;
      for (int o = 0; o < out_w; ++o) {
        const double* wr = w.data() + static_cast<std::size_t>(o) * in_w;
        const double g = dz[o];
        for (int i = 0; i < in_w; ++i) dx[i] += g * wr[i];
      }
    }
    d_act = std::move(d_below);
  }
  res.input_grad = std::move(d_act);
  return res;
}

// --- losses ------------------------------------------------------------------

constexpr double kBceClamp = 1e-12;

struct LossResult {
  double loss = 0.0;
  Mat grad;  // d loss / d predictions
};

/// Mean over batch rows of -sum_n [t ln q + (1 - t) ln(1 - q)], predictions
/// clamped to [1e-12, 1 - 1e-12].
inline LossResult bce_loss(const Mat& predictions, const Mat& targets) {
  if (predictions.rows != targets.rows || predictions.cols != targets.cols)
    throw std::invalid_argument("bce_loss: shape mismatch");
  LossResult res;
  res.grad = Mat(predictions.rows, predictions.cols);
  const double inv_batch = 1.0 / predictions.rows;
  for (std::size_t i = 0; i < predictions.data.size(); ++i) {
    double q = predictions.data[i];
    q = std::min(std::max(q, kBceClamp), 1.0 - kBceClamp);
    const double t = targets.data[i];
    res.loss -= (t * std::log(q) + (1.0 - t) * std::log(1.0 - q)) * inv_batch;
    res.grad.data[i] = (-(t / q) + (1.0 - t) / (1.0 - q)) * inv_batch;
  }
  return res;
}

/// (1/(2B)) * sum (q - t)^2 -- used by gradient checks on identity heads.
inline LossResult mse_loss(const Mat& predictions, const Mat& targets) {
  if (predictions.rows != targets.rows || predictions.cols != targets.cols)
    throw std::invalid_argument("mse_loss: shape mismatch");
  LossResult res;
  res.grad = Mat(predictions.rows, predictions.cols);
  const double inv_batch = 1.0 / predictions.rows;
  for (std::size_t i = 0; i < predictions.data.size(); ++i) {
    const double d = predictions.data[i] - targets.data[i];
    res.loss += 0.5 * d * d * inv_batch;
    res.grad.data[i] = d * inv_batch;
  }
  return res;
}

// --- optimizer ---------------------------------------------------------------

/// Adam with bias correction over a flat parameter vector.
class AdamState {
 public:
  AdamState() = default;
  explicit AdamState(std::size_t count, double lr = 1e-3, double beta1 = 0.9,
                     double beta2 = 0.999, double eps = 1e-8)
      : m_(count, 0.0), v_(count, 0.0), lr_(lr), beta1_(beta1), beta2_(beta2),
        eps_(eps) {}

  long step_count() const { return step_; }
  double learning_rate() const { return lr_; }

  void step(std::vector<double>& params, const std::vector<double>& grads) {
    if (params.size() != m_.size() || grads.size() != m_.size())
      throw std::invalid_argument("adam_step: size mismatch");
    ++step_;
    const double bc1 = 1.0 - std::pow(beta1_, step_);
    const double bc2 = 1.0 - std::pow(beta2_, step_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double g = grads[i];
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g * g;
      const double m_hat = m_[i] / bc1;
      const double v_hat = v_[i] / bc2;
      params[i] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
    }
  }

 private:
  std::vector<double> m_;
  std::vector<double> v_;
  double lr_ = 1e-3;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  long step_ = 0;
};

inline void adam_step(ParamStore& params, const ParamStore& grads, AdamState& state) {
  state.step(params.values(), grads.values());
  params.bump_revision();
}

// --- gradient verification ----------------------------------------------------

enum class LossKind { bce, mse };

inline LossResult eval_loss(LossKind kind, const Mat& pred, const Mat& targets) {
  return kind == LossKind::bce ? bce_loss(pred, targets) : mse_loss(pred, targets);
}

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Compares the analytic gradient of loss(forward(params, input), targets)
/// against central finite differences, parameter by parameter.
inline GradCheckReport gradcheck(const NetworkSpec& spec, const ParamStore& params,
                                 const Mat& input, const Mat& targets,
                                 LossKind loss_kind, double fd_step = 1e-5) {
  ForwardCache cache;
  const Mat out = forward(spec, params, input, &cache);
  const LossResult loss = eval_loss(loss_kind, out, targets);
  const BackwardResult analytic = backward(spec, params, cache, loss.grad);

  ParamStore probe = params;
  GradCheckReport rep;
  for (std::size_t i = 0; i < probe.values().size(); ++i) {
    const double saved = probe.values()[i];
    probe.values()[i] = saved + fd_step;
    const double lp = eval_loss(loss_kind, forward(spec, probe, input), targets).loss;
    probe.values()[i] = saved - fd_step;
    const double lm = eval_loss(loss_kind, forward(spec, probe, input), targets).loss;
    probe.values()[i] = saved;

    const double numeric = (lp - lm) / (2.0 * fd_step);
    const double a = analytic.grads.values()[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
    const double rel = std::abs(a - numeric) / denom;
    if (rel > rep.max_rel_error) {
      rep.max_rel_error = rel;
      rep.worst_index = i;
      rep.worst_analytic = a;
      rep.worst_numeric = numeric;
    }
  }
  return rep;
}

// --- complex input packing -----------------------------------------------------

/// Complex signals enter networks as [all real parts; all imaginary parts].
inline std::vector<double> flatten_complex(std::span<const std::complex<double>> v) {
  std::vector<double> out(2 * v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = v[i].real();
    out[v.size() + i] = v[i].imag();
  }
  return out;
}

// --- serialization --------------------------------------------------------------

/// Raw little-endian doubles; the manifest JSON carries shapes. Round-trips are
/// bit-exact.
inline void save_blob(const std::vector<double>& values, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
}

inline std::vector<double> load_blob(const std::string& path, std::size_t count) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<double> values(count);
  in.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (static_cast<std::size_t>(in.gcount()) != count * sizeof(double))
    throw std::runtime_error("blob " + path + " is shorter than expected");
  return values;
}

inline void save_params(const ParamStore& params, const std::string& blob_path) {
  save_blob(params.values(), blob_path);
}

inline ParamStore load_params(const NetworkSpec& spec, const std::string& blob_path) {
  ParamStore p(spec);
  p.values() = load_blob(blob_path, p.values().size());
  return p;
}

}  // namespace gfscma::nn
