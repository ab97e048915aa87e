#pragma once

// Variance schedules, the forward noising process, the noise-matching
// training objective and the ancestral reverse sampler.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <concepts>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <numeric>
#include <span>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "data.hpp"
#include "nn.hpp"

namespace diffcast {

enum class ScheduleKind { linear, cosine };

/// Fixed reverse-process variance: sigma_i^2 = beta_i, or the forward
/// posterior variance beta_i (1 - abar_{i-1}) / (1 - abar_i).
enum class ReverseVariance { beta, posterior };

inline std::string_view to_string(ScheduleKind k) { return k == ScheduleKind::linear ? "linear" : "cosine"; }
inline ScheduleKind parse_schedule_kind(std::string_view s) {
  if (s == "linear") return ScheduleKind::linear;
  if (s == "cosine") return ScheduleKind::cosine;
  throw ParameterError("unknown schedule kind '" + std::string(s) + "'");
}
inline std::string_view to_string(ReverseVariance v) { return v == ReverseVariance::beta ? "beta" : "posterior"; }
inline ReverseVariance parse_reverse_variance(std::string_view s) {
  if (s == "beta") return ReverseVariance::beta;
  if (s == "posterior") return ReverseVariance::posterior;
  throw ParameterError("unknown reverse variance '" + std::string(s) + "'");
}

/// Per-step quantities; index k holds diffusion step i = k + 1.
struct Schedule {
  ScheduleKind kind = ScheduleKind::linear;
  ReverseVariance variance = ReverseVariance::beta;
  std::vector<double> beta, alpha, alpha_bar, sigma;

  int steps() const { return static_cast<int>(beta.size()); }
  double beta_at(int i) const { return beta[index(i)]; }
  double alpha_at(int i) const { return alpha[index(i)]; }
  double alpha_bar_at(int i) const { return alpha_bar[index(i)]; }
  double sigma_at(int i) const { return sigma[index(i)]; }

  std::size_t index(int i) const {
    if (i < 1 || i > steps())
      throw ParameterError("diffusion step " + std::to_string(i) + " outside 1.." + std::to_string(steps()));
    return static_cast<std::size_t>(i - 1);
  }
};

/// Completes a schedule from its betas. `enforce` applies the production
/// checks (beta in (0,1), terminal abar < 0.01); tests may relax them.
inline Schedule schedule_from_betas(std::vector<double> betas, ScheduleKind kind = ScheduleKind::linear,
                                    ReverseVariance variance = ReverseVariance::beta, bool enforce = true) {
  if (betas.empty()) throw ParameterError("schedule needs at least one step");
  Schedule s;
  s.kind = kind;
  s.variance = variance;
  s.beta = std::move(betas);
  const std::size_t n = s.beta.size();
  s.alpha.resize(n);
  s.alpha_bar.resize(n);
  s.sigma.resize(n);
  double prod = 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double b = s.beta[k];
    if (!(b >= 0.0 && b < 1.0) || (enforce && !(b > 0.0)))
      throw ParameterError("beta_" + std::to_string(k + 1) + " = " + std::to_string(b) + " outside (0, 1)");
    s.alpha[k] = 1.0 - b;
    prod *= s.alpha[k];
    s.alpha_bar[k] = prod;
  }
  for (std::size_t k = 0; k < n; ++k) {
    double var = s.beta[k];
    if (variance == ReverseVariance::posterior) {
      const double prev = k == 0 ? 1.0 : s.alpha_bar[k - 1];
      var = k == 0 ? 0.0 : s.beta[k] * (1.0 - prev) / (1.0 - s.alpha_bar[k]);
    }
    s.sigma[k] = std::sqrt(var);
  }
  if (enforce && !(s.alpha_bar.back() < 0.01))
    throw ScheduleError("terminal alpha_bar " + std::to_string(s.alpha_bar.back()) +
                        " is not below 0.01; use more steps or larger betas");
  return s;
}

/// Default linear range for N = 200: the usual [1e-4, 0.02] at N = 1000,
/// scaled by 1000 / N so that abar_N is near zero.
inline constexpr double kDefaultBetaStart = 5e-4;
inline constexpr double kDefaultBetaEnd = 0.1;
inline constexpr int kDefaultSteps = 200;

/// Linear: beta_i = start + (i-1)/(N-1) (end - start). Cosine: the squared
/// cosine abar curve with offset s = 0.008, betas capped at 0.999.
/// `check_terminal = false` skips the abar_N < 0.01 requirement.
inline Schedule make_schedule(ScheduleKind kind, int n, double beta_start, double beta_end,
                              ReverseVariance variance = ReverseVariance::beta, bool check_terminal = true) {
  if (n < 1) throw ParameterError("schedule needs N >= 1");
  std::vector<double> betas(static_cast<std::size_t>(n));
  if (kind == ScheduleKind::linear) {
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
      throw ParameterError("need 0 < beta_start <= beta_end < 1");
    for (int i = 1; i <= n; ++i)
      betas[i - 1] = n == 1 ? beta_start : beta_start + double(i - 1) / double(n - 1) * (beta_end - beta_start);
  } else {
    constexpr double s = 0.008;
    auto f = [&](double t) {
      const double c = std::cos((t / n + s) / (1.0 + s) * std::numbers::pi / 2.0);
      return c * c;
    };
    for (int i = 1; i <= n; ++i) betas[i - 1] = std::min(1.0 - f(i) / f(i - 1), 0.999);
  }
  auto s = schedule_from_betas(std::move(betas), kind, variance, false);
  if (check_terminal && !(s.alpha_bar.back() < 0.01))
    throw ScheduleError("terminal alpha_bar " + std::to_string(s.alpha_bar.back()) +
                        " is not below 0.01; use more steps or larger betas");
  return s;
}

inline nlohmann::json schedule_to_json(const Schedule &s) {
  return {{"kind", std::string(to_string(s.kind))},
          {"variance", std::string(to_string(s.variance))},
          {"steps", s.steps()},
          {"beta", s.beta}};
}

inline Schedule schedule_from_json(const nlohmann::json &j) {
  return schedule_from_betas(j.at("beta").get<std::vector<double>>(), parse_schedule_kind(j.at("kind").get<std::string>()),
                             parse_reverse_variance(j.at("variance").get<std::string>()), true);
}

// ---------------------------------------------------------------------------
// Forward process

/// Closed-form marginal sqrt(abar_i) x0 + sqrt(1 - abar_i) eps.
inline Vector forward_sample(const Vector &x0, int step, const Vector &eps, const Schedule &s) {
  if (x0.size() != eps.size()) throw DimensionError("x0 and eps lengths differ");
  const double ab = s.alpha_bar_at(step);
  return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * eps;
}

/// Markov chain x_i = sqrt(1 - beta_i) x_{i-1} + sqrt(beta_i) z_i with caller
/// supplied noise; row k of `z` is z_{k+1}. Returns x_1..x_N as rows.
inline Matrix chain_forward(const Vector &x0, const Schedule &s, const Eigen::Ref<const Matrix> &z) {
  if (z.rows() != s.steps() || z.cols() != x0.size()) throw DimensionError("noise must be N x L");
  Matrix out(s.steps(), x0.size());
  Vector x = x0;
  for (int k = 0; k < s.steps(); ++k) {
    x = std::sqrt(1.0 - s.beta[k]) * x + std::sqrt(s.beta[k]) * z.row(k).transpose();
    out.row(k) = x.transpose();
  }
  return out;
}

inline Matrix chain_forward(const Vector &x0, const Schedule &s, Rng &rng) {
  Matrix z(s.steps(), x0.size());
  fill_normal(z, rng);
  return chain_forward(x0, s, z);
}

// ---------------------------------------------------------------------------
// Noise models

/// Anything that maps (noisy batch, steps, condition batch) to predicted noise.
template <class M>
concept NoiseModel = requires(const M &m, const Matrix &x, std::span<const int> steps, const Matrix &c) {
  { m(x, steps, c) } -> std::convertible_to<Matrix>;
};

struct MlpNoiseModel {
  const DenoiserParams *params;
  Matrix operator()(const Matrix &x, std::span<const int> steps, const Matrix &c) const {
    return forward_batch(*params, x, steps, c);
  }
};

inline MlpNoiseModel as_noise_model(const DenoiserParams &p) { return {&p}; }

/// Step indices and Gaussian noise for one batch.
struct NoiseDraw {
  std::vector<int> steps;
  Matrix eps;
};

inline NoiseDraw draw_noise(Eigen::Index batch, Eigen::Index dim, const Schedule &s, Rng &rng) {
  NoiseDraw d;
  std::uniform_int_distribution<int> step(1, s.steps());
  d.steps.resize(static_cast<std::size_t>(batch));
  d.eps.resize(batch, dim);
  for (Eigen::Index r = 0; r < batch; ++r) {
    d.steps[r] = step(rng);
    for (Eigen::Index c = 0; c < dim; ++c) d.eps(r, c) = standard_normal(rng);
  }
  return d;
}

/// Applies the closed-form forward marginal row by row.
inline Matrix noisy_batch(const Eigen::Ref<const Matrix> &x0, const NoiseDraw &d, const Schedule &s) {
  if (d.eps.rows() != x0.rows() || d.eps.cols() != x0.cols()) throw DimensionError("noise draw shape differs from batch");
  Matrix xi(x0.rows(), x0.cols());
  for (Eigen::Index r = 0; r < x0.rows(); ++r) {
    const double ab = s.alpha_bar_at(d.steps[r]);
    xi.row(r) = std::sqrt(ab) * x0.row(r) + std::sqrt(1.0 - ab) * d.eps.row(r);
  }
  return xi;
}

/// mean over the batch of ||eps - eps_hat||^2 / L
template <NoiseModel M>
double noise_loss(const M &model, const Eigen::Ref<const Matrix> &x0, const Eigen::Ref<const Matrix> &cond,
                  const NoiseDraw &d, const Schedule &s) {
  if (x0.rows() == 0) throw ParameterError("batch is empty");
  const Matrix pred = model(noisy_batch(x0, d, s), d.steps, cond);
  return (pred - d.eps).squaredNorm() / static_cast<double>(x0.rows() * x0.cols());
}

struct LossAndGradients {
  double loss = 0.0;
  Gradients gradients;
};

inline LossAndGradients training_loss(const DenoiserParams &p, const Eigen::Ref<const Matrix> &x0,
                                      const Eigen::Ref<const Matrix> &cond, const NoiseDraw &d, const Schedule &s) {
  if (x0.rows() == 0) throw ParameterError("batch is empty");
  ForwardCache cache;
  const Matrix pred = forward_batch(p, noisy_batch(x0, d, s), d.steps, cond, &cache);
  const double denom = static_cast<double>(x0.rows() * x0.cols());
  const Matrix diff = pred - d.eps;
  LossAndGradients out;
  out.loss = diff.squaredNorm() / denom;
  if (!std::isfinite(out.loss)) throw DivergenceError("non-finite training loss");
  out.gradients = backward(p, cache, (2.0 / denom) * diff);
  return out;
}

inline LossAndGradients training_loss(const DenoiserParams &p, const Eigen::Ref<const Matrix> &x0,
                                      const Eigen::Ref<const Matrix> &cond, const Schedule &s, Rng &rng) {
  return training_loss(p, x0, cond, draw_noise(x0.rows(), x0.cols(), s, rng), s);
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  int epochs = 200;
  int batch_size = 64;
  AdamConfig adam;
  std::uint64_t seed = 0;
  DenoiserArchitecture arch; // cond_dim is taken from the data
};

struct EpochLog {
  int epoch = 0;
  double learn_loss = 0.0;
  double validation_loss = 0.0;
};

struct TrainResult {
  DenoiserParams params;
  std::vector<EpochLog> log;
  int best_epoch = 0; // 0 when no epoch ran
};

/// Stacks targets and conditions of the given samples into batch matrices.
inline std::pair<Matrix, Matrix> stack_samples(std::span<const DaySample *const> samples, int cond_dim) {
  Matrix x(static_cast<Eigen::Index>(samples.size()), kPeriods);
  Matrix c(static_cast<Eigen::Index>(samples.size()), cond_dim);
  for (std::size_t r = 0; r < samples.size(); ++r) {
    if (static_cast<int>(samples[r]->c.size()) != cond_dim) throw DimensionError("condition length mismatch");
    for (int t = 0; t < kPeriods; ++t) x(r, t) = samples[r]->x[t];
    for (int k = 0; k < cond_dim; ++k) c(r, k) = samples[r]->c[k];
  }
  return {std::move(x), std::move(c)};
}

/// Minibatch Adam on the noise-matching loss. Returns the parameters of the
/// epoch with the lowest validation loss (learn loss when there is no
/// validation split). The validation loss uses the same noise draws every epoch.
inline TrainResult train(const Dataset &ds, const Schedule &sched, TrainConfig cfg,
                         std::optional<int> zone = std::nullopt,
                         const std::function<void(const EpochLog &)> &on_epoch = {}) {
  if (!ds.normalized) throw ParameterError("training expects a normalized dataset");
  if (cfg.epochs < 0 || cfg.batch_size < 1) throw ParameterError("epochs must be >= 0 and batch size >= 1");
  const auto learn = ds.select(Split::learn, zone);
  if (learn.empty()) throw InsufficientDataError("learn split is empty");
  const auto valid = ds.select(Split::validation, zone);
  const int cond_dim = ds.channels * kPeriods;
  cfg.arch.sample_dim = kPeriods;
  cfg.arch.cond_dim = cond_dim;

  Rng init_rng(derive_seed(cfg.seed, 1));
  TrainResult result;
  result.params = make_denoiser(cfg.arch, init_rng);
  if (cfg.epochs == 0) return result;

  auto [learn_x, learn_c] = stack_samples(learn, cond_dim);
  auto [valid_x, valid_c] = stack_samples(valid, cond_dim);
  Rng valid_rng(derive_seed(cfg.seed, 2));
  const NoiseDraw valid_draw = draw_noise(valid_x.rows(), kPeriods, sched, valid_rng);

  Rng rng(derive_seed(cfg.seed, 3));
  auto opt = make_optimizer(result.params, cfg.adam);
  DenoiserParams params = result.params;
  double best = std::numeric_limits<double>::infinity();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(learn_x.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Matrix bx, bc;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const auto n = std::min(order.size() - start, static_cast<std::size_t>(cfg.batch_size));
      bx.resize(static_cast<Eigen::Index>(n), kPeriods);
      bc.resize(static_cast<Eigen::Index>(n), cond_dim);
      for (std::size_t r = 0; r < n; ++r) {
        bx.row(r) = learn_x.row(order[start + r]);
        bc.row(r) = learn_c.row(order[start + r]);
      }
      LossAndGradients lg;
      try {
        lg = training_loss(params, bx, bc, sched, rng);
        adam_step(opt, params, lg.gradients);
      } catch (const DivergenceError &e) {
        throw DivergenceError("epoch " + std::to_string(epoch) + ": " + e.what());
      }
      total += lg.loss * static_cast<double>(n);
    }
    EpochLog entry{epoch, total / static_cast<double>(order.size()), std::numeric_limits<double>::quiet_NaN()};
    double score = entry.learn_loss;
    if (valid_x.rows() > 0) {
      entry.validation_loss = noise_loss(as_noise_model(params), valid_x, valid_c, valid_draw, sched);
      score = entry.validation_loss;
    }
    if (!std::isfinite(score)) throw DivergenceError("epoch " + std::to_string(epoch) + ": non-finite loss");
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
    if (score < best) {
      best = score;
      result.params = params;
      result.best_epoch = epoch;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Reverse process

/// Ancestral sampling from given terminal samples x_N (one per row).
/// `noise(i, z)` fills z with the fresh Gaussian noise for step i > 1.
template <NoiseModel M, class NoiseFn>
Matrix reverse_chain(const M &model, Matrix x, const Eigen::Ref<const Matrix> &cond, const Schedule &s,
                     NoiseFn &&noise) {
  std::vector<int> steps(static_cast<std::size_t>(x.rows()));
  Matrix z(x.rows(), x.cols());
  for (int i = s.steps(); i >= 1; --i) {
    std::fill(steps.begin(), steps.end(), i);
    const Matrix eps_hat = model(x, steps, cond);
    const double coef = s.beta_at(i) / std::sqrt(1.0 - s.alpha_bar_at(i));
    x = (x - coef * eps_hat) / std::sqrt(s.alpha_at(i));
    if (i > 1) {
      noise(i, z);
      x += s.sigma_at(i) * z;
    }
    if (!x.allFinite()) throw DivergenceError("non-finite sample at reverse step " + std::to_string(i));
  }
  return x;
}

/// Maps normalized samples to physical units and clips them to the track's range.
struct OutputTransform {
  AffineScale scale;
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();

  void apply(Matrix &m) const {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = std::clamp(scale.invert(m.data()[i]), lo, hi);
  }
};

/// pv and wind are clipped to [0, 1] p.u.; load to [0, 1.2 x learn-split max].
inline OutputTransform output_transform(const Scaler &sc, Track track) {
  OutputTransform t;
  t.scale = sc.target;
  t.lo = 0.0;
  t.hi = track == Track::load ? 1.2 * sc.learn_max : 1.0;
  return t;
}

struct ScenarioSet {
  Date day;
  Matrix scenarios; // M x L
  Vector condition;

  int count() const { return static_cast<int>(scenarios.rows()); }
};

/// Draws M scenarios for one condition vector. Scenario m uses its own RNG
/// stream derive_seed(seed, m) for x_N and every injected noise vector.
/// Scenarios are processed in fixed blocks of `kSampleBlock` rows that
/// threads pick up in turn, so the result is bit-identical for any thread count.
inline constexpr int kSampleBlock = 32;

template <NoiseModel Model>
ScenarioSet reverse_sample(const Model &model, const Vector &cond, const Schedule &s, int m, std::uint64_t seed,
                           int sample_dim = kPeriods, const OutputTransform &out = {}, int threads = 1) {
  if (m < 1) throw ParameterError("number of scenarios must be at least 1");
  const int blocks = (m + kSampleBlock - 1) / kSampleBlock;
  threads = std::clamp(threads, 1, blocks);
  ScenarioSet set;
  set.condition = cond;
  set.scenarios.resize(m, sample_dim);

  auto run_block = [&](int block) {
    const int first = block * kSampleBlock;
    const int n = std::min(kSampleBlock, m - first);
    std::vector<Rng> streams;
    streams.reserve(static_cast<std::size_t>(n));
    Matrix xt(n, sample_dim);
    for (int r = 0; r < n; ++r) {
      streams.emplace_back(derive_seed(seed, static_cast<std::uint64_t>(first + r)));
      for (int c = 0; c < sample_dim; ++c) xt(r, c) = standard_normal(streams.back());
    }
    Matrix cond_batch = cond.transpose().replicate(n, 1);
    auto noise = [&](int, Matrix &z) {
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < sample_dim; ++c) z(r, c) = standard_normal(streams[r]);
    };
    set.scenarios.middleRows(first, n) = reverse_chain(model, std::move(xt), cond_batch, s, noise);
  };

  if (threads == 1) {
    for (int b = 0; b < blocks; ++b) run_block(b);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        try {
          for (int b; (b = next.fetch_add(1)) < blocks;) run_block(b);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    for (auto &th : pool) th.join();
    for (auto &e : errors)
      if (e) std::rethrow_exception(e);
  }
  out.apply(set.scenarios);
  return set;
}

/// Scenarios for every sample of a split (optionally one zone), in day order.
/// The RNG seed of each day is derived from `seed` and the calendar date.
template <NoiseModel Model>
std::vector<ScenarioSet> sample_split(const Model &model, const Dataset &ds, const Schedule &s, Split which,
                                      std::optional<int> zone, int m, std::uint64_t seed, int threads = 1) {
  if (!ds.normalized) throw ParameterError("sampling expects a normalized dataset");
  const auto transform = output_transform(ds.scaler, ds.track);
  std::vector<ScenarioSet> out;
  for (const auto *sample : ds.select(which, zone)) {
    const Vector cond = Eigen::Map<const Vector>(sample->c.data(), static_cast<Eigen::Index>(sample->c.size()));
    const auto day_seed = derive_seed(seed, static_cast<std::uint64_t>(sample->day.days_since_epoch()),
                                      static_cast<std::uint64_t>(sample->zone));
    auto set = reverse_sample(model, cond, s, m, day_seed, kPeriods, transform, threads);
    set.day = sample->day;
    out.push_back(std::move(set));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scenario files: `day,scenario,h0,...,h23`, physical units.

inline void write_scenarios(const std::string &path, std::span<const ScenarioSet> sets) {
  std::ofstream f(path);
  if (!f) throw SchemaError("cannot write '" + path + "'");
  f << "day,scenario";
  for (int t = 0; t < kPeriods; ++t) f << ",h" << t;
  f << '\n';
  for (const auto &set : sets) {
    if (set.scenarios.cols() != kPeriods) throw DimensionError("scenario rows must have 24 values");
    for (Eigen::Index m = 0; m < set.scenarios.rows(); ++m) {
      f << set.day.str() << ',' << m;
      for (int t = 0; t < kPeriods; ++t) f << ',' << detail::fmt_double(set.scenarios(m, t));
      f << '\n';
    }
  }
}

/// Scenario matrices keyed by day, rows in scenario-index order.
inline std::map<Date, Matrix> read_scenarios(const std::string &path) {
  std::ifstream f(path);
  if (!f) throw SchemaError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(f, line)) throw SchemaError("'" + path + "' is empty");
  const auto header = detail::split_fields(line);
  if (header.size() != 2 + kPeriods || detail::trim(header[0]) != "day" || detail::trim(header[1]) != "scenario")
    throw SchemaError("scenario header must be day,scenario,h0,...,h23");
  for (int t = 0; t < kPeriods; ++t)
    if (detail::trim(header[2 + t]) != "h" + std::to_string(t))
      throw SchemaError("scenario header column " + std::to_string(3 + t) + " must be h" + std::to_string(t));
  std::map<Date, std::map<long, std::array<double, kPeriods>>> rows;
  std::size_t row = 1;
  while (std::getline(f, line)) {
    ++row;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_fields(line);
    const auto where = " at row " + std::to_string(row);
    if (cells.size() != header.size()) throw ParseError("wrong number of cells" + where);
    Date day;
    try {
      day = Date::parse(detail::trim(cells[0]));
    } catch (const ParseError &e) {
      throw ParseError(std::string(e.what()) + where);
    }
    const auto idx = detail::parse_int(cells[1]);
    if (!idx || *idx < 0) throw ParseError("bad scenario index '" + cells[1] + "'" + where);
    std::array<double, kPeriods> v{};
    for (int t = 0; t < kPeriods; ++t) {
      const auto d = detail::parse_double(cells[2 + t]);
      if (!d) throw ParseError("non-numeric value '" + cells[2 + t] + "'" + where);
      v[t] = *d;
    }
    if (!rows[day].emplace(*idx, v).second)
      throw IntegrityError("duplicate scenario " + std::to_string(*idx) + " for " + day.str() + where);
  }
  std::map<Date, Matrix> out;
  for (auto &[day, scen] : rows) {
    Matrix m(static_cast<Eigen::Index>(scen.size()), kPeriods);
    Eigen::Index r = 0;
    for (auto &[idx, v] : scen) {
      for (int t = 0; t < kPeriods; ++t) m(r, t) = v[t];
      ++r;
    }
    out.emplace(day, std::move(m));
  }
  return out;
}

} // namespace diffcast
