#pragma once

// Feed-forward noise predictor with hand-written reverse-mode gradients and
// an Adam optimizer. The network input is the concatenation
// [noisy sample (L) | timestep embedding (E) | condition (C)].

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "core.hpp"

namespace diffcast {

enum class Activation { relu, silu };

inline std::string_view to_string(Activation a) { return a == Activation::relu ? "relu" : "silu"; }

inline Activation parse_activation(std::string_view s) {
  if (s == "relu") return Activation::relu;
  if (s == "silu") return Activation::silu;
  throw ParameterError("unknown activation '" + std::string(s) + "'");
}

struct Layer {
  Matrix weight; // out x in
  Vector bias;   // out
};

struct DenoiserArchitecture {
  int sample_dim = kPeriods;
  int embed_dim = 32;
  int cond_dim = 0;
  std::vector<int> hidden{256, 256, 256};
  Activation activation = Activation::silu;

  int input_dim() const { return sample_dim + embed_dim + cond_dim; }
};

struct DenoiserParams {
  DenoiserArchitecture arch;
  std::vector<Layer> layers;

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto &l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
  }
};

/// Gradients share the parameter layout.
using Gradients = std::vector<Layer>;

/// Sinusoidal step encoding: [sin(i w_0) .. sin(i w_{E/2-1}), cos(i w_0) .. ],
/// w_k = 10000^(-2k/E).
inline Vector timestep_embedding(int step, int dim) {
  if (dim <= 0 || dim % 2 != 0) throw ParameterError("embedding size must be positive and even");
  if (step < 0) throw ParameterError("diffusion step must be non-negative");
  const int half = dim / 2;
  Vector e(dim);
  for (int k = 0; k < half; ++k) {
    const double freq = std::pow(10000.0, -2.0 * k / dim);
    e[k] = std::sin(step * freq);
    e[half + k] = std::cos(step * freq);
  }
  return e;
}

inline DenoiserParams make_denoiser(const DenoiserArchitecture &arch, Rng &rng) {
  if (arch.sample_dim < 1 || arch.cond_dim < 0) throw ParameterError("invalid denoiser dimensions");
  if (arch.embed_dim <= 0 || arch.embed_dim % 2) throw ParameterError("embedding size must be positive and even");
  for (int h : arch.hidden)
    if (h < 1) throw ParameterError("hidden layer sizes must be positive");
  DenoiserParams p;
  p.arch = arch;
  int fan_in = arch.input_dim();
  auto dims = arch.hidden;
  dims.push_back(arch.sample_dim);
  for (int fan_out : dims) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> u(-limit, limit);
    Layer l;
    l.weight.resize(fan_out, fan_in);
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) l.weight.data()[i] = u(rng);
    l.bias = Vector::Zero(fan_out);
    p.layers.push_back(std::move(l));
    fan_in = fan_out;
  }
  return p;
}

inline void check_shapes(const DenoiserParams &p) {
  if (p.layers.empty()) throw DimensionError("denoiser has no layers");
  Eigen::Index in = p.arch.input_dim();
  for (std::size_t k = 0; k < p.layers.size(); ++k) {
    const auto &l = p.layers[k];
    if (l.weight.cols() != in || l.bias.size() != l.weight.rows())
      throw DimensionError("layer " + std::to_string(k) + " does not chain with its input");
    in = l.weight.rows();
  }
  if (in != p.arch.sample_dim) throw DimensionError("output layer width differs from the sample size");
}

/// Activations retained by a forward pass for use in `backward`.
struct ForwardCache {
  std::vector<Matrix> inputs;      // input to each layer (post-activation of the previous one)
  std::vector<Matrix> preactivation; // pre-activation of each hidden layer
  Matrix output;
};

namespace detail {

inline void activate(Activation a, const Matrix &z, Matrix &h) {
  if (a == Activation::relu) {
    h = z.cwiseMax(0.0);
  } else {
    h = z.array() / (1.0 + (-z.array()).exp());
  }
}

inline void activation_grad(Activation a, const Matrix &z, Matrix &g) {
  if (a == Activation::relu) {
    g.array() *= (z.array() > 0.0).cast<double>();
  } else {
    const auto s = 1.0 / (1.0 + (-z.array()).exp());
    g.array() *= s * (1.0 + z.array() * (1.0 - s));
  }
}

} // namespace detail

/// Builds the batch input matrix. `x_noisy` and `cond` hold one sample per row.
inline Matrix assemble_input(const DenoiserArchitecture &arch, const Eigen::Ref<const Matrix> &x_noisy,
                             std::span<const int> steps, const Eigen::Ref<const Matrix> &cond) {
  const Eigen::Index b = x_noisy.rows();
  if (x_noisy.cols() != arch.sample_dim)
    throw DimensionError("noisy sample has " + std::to_string(x_noisy.cols()) + " columns, expected " +
                         std::to_string(arch.sample_dim));
  if (static_cast<Eigen::Index>(steps.size()) != b) throw DimensionError("one step per sample is required");
  if (cond.rows() != b || cond.cols() != arch.cond_dim)
    throw DimensionError("condition batch is " + std::to_string(cond.rows()) + "x" +
                         std::to_string(cond.cols()) + ", expected " + std::to_string(b) + "x" +
                         std::to_string(arch.cond_dim));
  Matrix in(b, arch.input_dim());
  in.leftCols(arch.sample_dim) = x_noisy;
  in.rightCols(arch.cond_dim) = cond;
  // steps repeat heavily inside a batch; cache the last embedding
  int last = -1;
  Vector emb;
  for (Eigen::Index r = 0; r < b; ++r) {
    if (steps[r] != last) {
      emb = timestep_embedding(steps[r], arch.embed_dim);
      last = steps[r];
    }
    in.row(r).segment(arch.sample_dim, arch.embed_dim) = emb.transpose();
  }
  return in;
}

inline Matrix forward_input(const DenoiserParams &p, const Matrix &input, ForwardCache *cache = nullptr) {
  check_shapes(p);
  if (input.cols() != p.arch.input_dim()) throw DimensionError("input width does not match the architecture");
  Matrix h = input;
  Matrix z;
  if (cache) {
    cache->inputs.clear();
    cache->preactivation.clear();
  }
  for (std::size_t k = 0; k < p.layers.size(); ++k) {
    const auto &l = p.layers[k];
    z.noalias() = h * l.weight.transpose();
    z.rowwise() += l.bias.transpose();
    if (cache) cache->inputs.push_back(h);
    if (k + 1 == p.layers.size()) {
      h = std::move(z);
      break;
    }
    if (cache) cache->preactivation.push_back(z);
    detail::activate(p.arch.activation, z, h);
  }
  if (cache) cache->output = h;
  return h;
}

/// Batched noise prediction; rows of `x_noisy` and `cond` are samples.
inline Matrix forward_batch(const DenoiserParams &p, const Eigen::Ref<const Matrix> &x_noisy,
                            std::span<const int> steps, const Eigen::Ref<const Matrix> &cond,
                            ForwardCache *cache = nullptr) {
  return forward_input(p, assemble_input(p.arch, x_noisy, steps, cond), cache);
}

/// Single-sample noise prediction.
inline Vector forward(const DenoiserParams &p, const Vector &x_noisy, int step, const Vector &cond) {
  const int steps[] = {step};
  Matrix out = forward_batch(p, x_noisy.transpose(), steps, cond.transpose());
  return out.row(0).transpose();
}

/// Reverse-mode gradient of sum(output .* grad_out) with respect to every
/// parameter, given the cache of the matching forward pass.
inline Gradients backward(const DenoiserParams &p, const ForwardCache &cache, const Matrix &grad_out) {
  const std::size_t n = p.layers.size();
  if (cache.inputs.size() != n) throw DimensionError("forward cache does not match the network");
  if (grad_out.rows() != cache.output.rows() || grad_out.cols() != cache.output.cols())
    throw DimensionError("output gradient shape differs from the forward output");
  Gradients g(n);
  Matrix delta = grad_out;
  for (std::size_t k = n; k-- > 0;) {
    g[k].weight.noalias() = delta.transpose() * cache.inputs[k];
    g[k].bias = delta.colwise().sum().transpose();
    if (k == 0) break;
    Matrix prev = delta * p.layers[k].weight;
    detail::activation_grad(p.arch.activation, cache.preactivation[k - 1], prev);
    delta = std::move(prev);
  }
  return g;
}

/// Single-sample convenience wrapper around `forward_batch` + `backward`.
inline Gradients backward(const DenoiserParams &p, const Vector &x_noisy, int step, const Vector &cond,
                          const Vector &grad_out) {
  const int steps[] = {step};
  ForwardCache cache;
  forward_batch(p, x_noisy.transpose(), steps, cond.transpose(), &cache);
  return backward(p, cache, grad_out.transpose());
}

inline Gradients zero_gradients(const DenoiserParams &p) {
  Gradients g(p.layers.size());
  for (std::size_t k = 0; k < p.layers.size(); ++k) {
    g[k].weight = Matrix::Zero(p.layers[k].weight.rows(), p.layers[k].weight.cols());
    g[k].bias = Vector::Zero(p.layers[k].bias.size());
  }
  return g;
}

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimizerState {
  AdamConfig config;
  std::vector<Layer> first;
  std::vector<Layer> second;
  std::int64_t step = 0;
};

inline OptimizerState make_optimizer(const DenoiserParams &p, AdamConfig cfg = {}) {
  OptimizerState s;
  s.config = cfg;
  s.first = zero_gradients(p);
  s.second = zero_gradients(p);
  return s;
}

/// Bias-corrected Adam update. Throws DivergenceError if a gradient or an
/// updated parameter is not finite; parameters are left untouched in that case.
inline void adam_step(OptimizerState &state, DenoiserParams &p, const Gradients &g) {
  if (g.size() != p.layers.size() || state.first.size() != p.layers.size())
    throw DimensionError("gradient and optimizer state must mirror the parameters");
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (g[k].weight.rows() != p.layers[k].weight.rows() || g[k].weight.cols() != p.layers[k].weight.cols() ||
        g[k].bias.size() != p.layers[k].bias.size())
      throw DimensionError("gradient of layer " + std::to_string(k) + " has the wrong shape");
    if (!g[k].weight.allFinite() || !g[k].bias.allFinite())
      throw DivergenceError("non-finite gradient in layer " + std::to_string(k));
  }
  const auto &c = state.config;
  ++state.step;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  const double lr = c.learning_rate;
  auto update = [&](auto &param, auto &m, auto &v, const auto &grad) {
    m = c.beta1 * m + (1.0 - c.beta1) * grad;
    v = c.beta2 * v + (1.0 - c.beta2) * grad.cwiseProduct(grad);
    param.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + c.epsilon);
  };
  for (std::size_t k = 0; k < g.size(); ++k) {
    update(p.layers[k].weight, state.first[k].weight, state.second[k].weight, g[k].weight);
    update(p.layers[k].bias, state.first[k].bias, state.second[k].bias, g[k].bias);
    if (!p.layers[k].weight.allFinite() || !p.layers[k].bias.allFinite())
      throw DivergenceError("non-finite parameter in layer " + std::to_string(k) + " after step " +
                            std::to_string(state.step));
  }
}

// ---------------------------------------------------------------------------
// Flat parameter block: layer-major, weights (row-major) before biases.

inline std::vector<double> flatten(const DenoiserParams &p) {
  std::vector<double> out;
  out.reserve(p.parameter_count());
  for (const auto &l : p.layers) {
    out.insert(out.end(), l.weight.data(), l.weight.data() + l.weight.size());
    out.insert(out.end(), l.bias.data(), l.bias.data() + l.bias.size());
  }
  return out;
}

/// Allocates layers for `arch` and fills them from a flat block.
inline DenoiserParams unflatten(const DenoiserArchitecture &arch, std::span<const double> flat) {
  DenoiserParams p;
  p.arch = arch;
  int fan_in = arch.input_dim();
  auto dims = arch.hidden;
  dims.push_back(arch.sample_dim);
  std::size_t pos = 0;
  for (int fan_out : dims) {
    Layer l;
    l.weight.resize(fan_out, fan_in);
    l.bias.resize(fan_out);
    const auto need = static_cast<std::size_t>(l.weight.size() + l.bias.size());
    if (pos + need > flat.size()) throw CheckpointError("parameter block is shorter than the architecture");
    std::memcpy(l.weight.data(), flat.data() + pos, sizeof(double) * l.weight.size());
    pos += static_cast<std::size_t>(l.weight.size());
    std::memcpy(l.bias.data(), flat.data() + pos, sizeof(double) * l.bias.size());
    pos += static_cast<std::size_t>(l.bias.size());
    p.layers.push_back(std::move(l));
    fan_in = fan_out;
  }
  if (pos != flat.size()) throw CheckpointError("parameter block is longer than the architecture");
  return p;
}

inline nlohmann::json architecture_to_json(const DenoiserArchitecture &a) {
  return {{"sample_dim", a.sample_dim}, {"embed_dim", a.embed_dim}, {"cond_dim", a.cond_dim},
          {"hidden", a.hidden},         {"activation", std::string(to_string(a.activation))}};
}

inline DenoiserArchitecture architecture_from_json(const nlohmann::json &j) {
  DenoiserArchitecture a;
  a.sample_dim = j.at("sample_dim").get<int>();
  a.embed_dim = j.at("embed_dim").get<int>();
  a.cond_dim = j.at("cond_dim").get<int>();
  a.hidden = j.at("hidden").get<std::vector<int>>();
  a.activation = parse_activation(j.at("activation").get<std::string>());
  return a;
}

inline constexpr char kCheckpointMagic[8] = {'D', 'F', 'C', 'K', 'P', 'T', '0', '1'};

namespace detail {

inline void write_u64_le(std::ostream &out, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char *>(buf), 8);
}

inline std::uint64_t read_u64_le(std::istream &in) {
  unsigned char buf[8];
  if (!in.read(reinterpret_cast<char *>(buf), 8)) throw CheckpointError("truncated checkpoint");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

} // namespace detail

/// Checkpoint layout: 8-byte magic, u64 LE header length, UTF-8 JSON header,
/// u64 LE parameter count, then the flat parameter block as LE float64.
/// `header` carries caller metadata; the architecture is added under "architecture".
inline void write_checkpoint(const std::string &path, const DenoiserParams &p, nlohmann::json header) {
  header["architecture"] = architecture_to_json(p.arch);
  header["parameter_count"] = p.parameter_count();
  header["parameter_layout"] = "layer-major, weights before biases, row-major matrices, float64 little-endian";
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write '" + path + "'");
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  detail::write_u64_le(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  const auto flat = flatten(p);
  detail::write_u64_le(out, flat.size());
  for (double v : flat) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &v, 8);
    detail::write_u64_le(out, bits);
  }
  if (!out) throw CheckpointError("failed writing '" + path + "'");
}

struct Checkpoint {
  nlohmann::json header;
  DenoiserParams params;
};

inline Checkpoint read_checkpoint(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open '" + path + "'");
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw CheckpointError("'" + path + "' is not a diffcast checkpoint");
  const auto hlen = detail::read_u64_le(in);
  if (hlen > (1ULL << 30)) throw CheckpointError("implausible header length");
  std::string text(hlen, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(hlen))) throw CheckpointError("truncated header");
  Checkpoint ck;
  try {
    ck.header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception &e) {
    throw CheckpointError(std::string("bad checkpoint header: ") + e.what());
  }
  const auto count = detail::read_u64_le(in);
  std::vector<double> flat(count);
  for (auto &v : flat) {
    const auto bits = detail::read_u64_le(in);
    std::memcpy(&v, &bits, 8);
  }
  ck.params = unflatten(architecture_from_json(ck.header.at("architecture")), flat);
  return ck;
}

} // namespace diffcast
