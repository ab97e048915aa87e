#pragma once

// Scenario quality scores: CRPS, quantile (pinball) score, reliability and
// its MAE, energy score and variogram score, plus the test-set report.
// Scenario sets are M x L matrices, one scenario per row.

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "core.hpp"

namespace diffcast {

inline constexpr int kQuantileLevels = 99;

/// Nominal levels 0.01 .. 0.99.
inline double quantile_level(int k) { return (k + 1) / 100.0; }

enum class CrpsEstimator { energy, unbiased };

inline std::string_view to_string(CrpsEstimator e) { return e == CrpsEstimator::energy ? "energy" : "unbiased"; }
inline CrpsEstimator parse_crps_estimator(std::string_view s) {
  if (s == "energy") return CrpsEstimator::energy;
  if (s == "unbiased") return CrpsEstimator::unbiased;
  throw ParameterError("unknown CRPS estimator '" + std::string(s) + "'");
}

namespace detail {

inline void check_scenarios(const Eigen::Ref<const Matrix> &s, const Vector &y) {
  if (s.rows() < 1) throw ParameterError("scenario set is empty");
  if (s.cols() != y.size())
    throw DimensionError("scenarios have " + std::to_string(s.cols()) + " periods but the observation has " +
                         std::to_string(y.size()));
}

inline std::vector<double> sorted_column(const Eigen::Ref<const Matrix> &s, Eigen::Index t) {
  std::vector<double> v(static_cast<std::size_t>(s.rows()));
  for (Eigen::Index m = 0; m < s.rows(); ++m) v[m] = s(m, t);
  std::sort(v.begin(), v.end());
  return v;
}

/// sum over ordered pairs |x_m - x_m'| of an ascending sample. Each gap
/// between neighbours is crossed by k (n - k) unordered pairs; ties add
/// exactly zero.
inline double pair_abs_sum(const std::vector<double> &sorted) {
  const auto n = static_cast<double>(sorted.size());
  double acc = 0.0;
  for (std::size_t k = 1; k < sorted.size(); ++k) {
    const double kd = static_cast<double>(k);
    acc += (sorted[k] - sorted[k - 1]) * kd * (n - kd);
  }
  return 2.0 * acc;
}

} // namespace detail

struct CrpsResult {
  Vector per_period;
  double mean = 0.0;
};

/// Energy-form CRPS per marginal:
/// (1/M) sum |x_m - y| - (1/(2M^2)) sum_{m,m'} |x_m - x_m'|.
/// The unbiased variant divides the spread term by 2M(M-1) instead.
inline CrpsResult crps(const Eigen::Ref<const Matrix> &s, const Vector &y,
                       CrpsEstimator est = CrpsEstimator::energy) {
  detail::check_scenarios(s, y);
  const auto m = static_cast<double>(s.rows());
  if (est == CrpsEstimator::unbiased && s.rows() < 2)
    throw InsufficientDataError("the unbiased CRPS estimator needs at least 2 scenarios");
  const double spread_norm = est == CrpsEstimator::energy ? 2.0 * m * m : 2.0 * m * (m - 1.0);
  CrpsResult r;
  r.per_period.resize(s.cols());
  for (Eigen::Index t = 0; t < s.cols(); ++t) {
    const auto col = detail::sorted_column(s, t);
    double abs_err = 0.0;
    for (double v : col) abs_err += std::abs(v - y[t]);
    r.per_period[t] = abs_err / m - detail::pair_abs_sum(col) / spread_norm;
  }
  r.mean = r.per_period.mean();
  return r;
}

/// Empirical quantile of an ascending sample using plotting positions
/// (k - 0.5)/M and linear interpolation; constant beyond the extreme positions.
inline double empirical_quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw ParameterError("empty sample");
  const auto m = static_cast<double>(sorted.size());
  const double pos = q * m + 0.5; // 1-based fractional order statistic
  if (pos <= 1.0) return sorted.front();
  if (pos >= m) return sorted.back();
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const double w = pos - static_cast<double>(lo);
  return sorted[lo - 1] + w * (sorted[lo] - sorted[lo - 1]);
}

/// rho_q(y, qhat) = q (y - qhat) if y >= qhat, else (1 - q)(qhat - y).
inline double pinball_loss(double y, double qhat, double q) {
  return y >= qhat ? q * (y - qhat) : (1.0 - q) * (qhat - y);
}

struct QuantileScoreResult {
  std::array<double, kQuantileLevels> per_level{};
  double mean = 0.0;
};

/// Pinball loss of the 99 empirical quantiles, averaged over levels and periods.
inline QuantileScoreResult quantile_score(const Eigen::Ref<const Matrix> &s, const Vector &y) {
  detail::check_scenarios(s, y);
  if (s.rows() < 2) throw InsufficientDataError("the quantile score needs at least 2 scenarios");
  QuantileScoreResult r;
  for (Eigen::Index t = 0; t < s.cols(); ++t) {
    const auto col = detail::sorted_column(s, t);
    for (int k = 0; k < kQuantileLevels; ++k) {
      const double q = quantile_level(k);
      r.per_level[k] += pinball_loss(y[t], empirical_quantile(col, q), q);
    }
  }
  double total = 0.0;
  for (auto &v : r.per_level) {
    v /= static_cast<double>(s.cols());
    total += v;
  }
  r.mean = total / kQuantileLevels;
  return r;
}

struct ReliabilityResult {
  std::array<double, kQuantileLevels> nominal{};
  std::array<double, kQuantileLevels> empirical{};
  double mae_r = 0.0; // percentage points
};

/// Empirical frequency of y <= qhat_q over all (day, period) pairs for the
/// 99 nominal levels.
///
/// Without `tie_tolerance` the indicator is taken literally. With it, an
/// observation within the tolerance of qhat_q sits on an atom of the scenario
/// distribution (e.g. exact zeros at night) and counts the expected value of
/// the randomized indicator, clamp((q - F_lo) / (F_hi - F_lo), 0, 1), where
/// F_lo and F_hi are the fractions of scenarios below y - tol and at most y + tol.
inline ReliabilityResult reliability(std::span<const Matrix> scenarios, std::span<const Vector> observations,
                                     std::optional<double> tie_tolerance = std::nullopt, std::size_t min_days = 10) {
  if (scenarios.empty()) throw ParameterError("reliability needs at least one day");
  if (scenarios.size() != observations.size()) throw DimensionError("one observation per scenario set is required");
  if (scenarios.size() < min_days)
    throw InsufficientDataError("reliability needs at least " + std::to_string(min_days) + " days, got " +
                                std::to_string(scenarios.size()));
  if (tie_tolerance && !(*tie_tolerance >= 0.0)) throw ParameterError("tie tolerance must be non-negative");
  const bool ties = tie_tolerance.has_value();
  const double tol = tie_tolerance.value_or(0.0);
  ReliabilityResult r;
  double pairs = 0.0;
  for (std::size_t d = 0; d < scenarios.size(); ++d) {
    detail::check_scenarios(scenarios[d], observations[d]);
    const auto &s = scenarios[d];
    const auto m = static_cast<double>(s.rows());
    for (Eigen::Index t = 0; t < s.cols(); ++t) {
      const auto col = detail::sorted_column(s, t);
      const double y = observations[d][t];
      const auto below = std::lower_bound(col.begin(), col.end(), y - tol) - col.begin();
      const auto at_most = std::upper_bound(col.begin(), col.end(), y + tol) - col.begin();
      const double f_lo = static_cast<double>(below) / m, f_hi = static_cast<double>(at_most) / m;
      for (int k = 0; k < kQuantileLevels; ++k) {
        const double q = quantile_level(k);
        const double qhat = empirical_quantile(col, q);
        double hit;
        if (ties && std::abs(y - qhat) <= tol && f_hi > f_lo)
          hit = std::clamp((q - f_lo) / (f_hi - f_lo), 0.0, 1.0);
        else
          hit = y <= qhat ? 1.0 : 0.0;
        r.empirical[k] += hit;
      }
      pairs += 1.0;
    }
  }
  double gap = 0.0;
  for (int k = 0; k < kQuantileLevels; ++k) {
    r.nominal[k] = quantile_level(k);
    r.empirical[k] /= pairs;
    gap += std::abs(r.empirical[k] - r.nominal[k]);
  }
  r.mae_r = 100.0 * gap / kQuantileLevels;
  return r;
}

/// (1/M) sum ||x_m - y|| - (1/(2M^2)) sum_{m,m'} ||x_m - x_m'|| over full trajectories.
inline double energy_score(const Eigen::Ref<const Matrix> &s, const Vector &y) {
  detail::check_scenarios(s, y);
  const auto m = s.rows();
  double fit = 0.0, spread = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    fit += (s.row(i).transpose() - y).norm();
    for (Eigen::Index j = i + 1; j < m; ++j) spread += (s.row(i) - s.row(j)).norm();
  }
  const auto md = static_cast<double>(m);
  return fit / md - (2.0 * spread) / (2.0 * md * md);
}

/// sum_{t,t'} w_{t,t'} (|y_t - y_t'|^g - (1/M) sum_m |x_{m,t} - x_{m,t'}|^g)^2
/// Unit weights when `weights` is null.
inline double variogram_score(const Eigen::Ref<const Matrix> &s, const Vector &y, double gamma = 0.5,
                              const Matrix *weights = nullptr) {
  detail::check_scenarios(s, y);
  if (!(gamma > 0.0)) throw ParameterError("variogram exponent must be positive");
  const auto l = s.cols();
  if (weights) {
    if (weights->rows() != l || weights->cols() != l) throw DimensionError("variogram weights must be L x L");
    if ((weights->array() < 0.0).any()) throw ParameterError("variogram weights must be non-negative");
  }
  const auto m = static_cast<double>(s.rows());
  double total = 0.0;
  for (Eigen::Index t = 0; t < l; ++t) {
    for (Eigen::Index u = t + 1; u < l; ++u) {
      const double w_tu = weights ? (*weights)(t, u) : 1.0;
      const double w_ut = weights ? (*weights)(u, t) : 1.0;
      if (w_tu == 0.0 && w_ut == 0.0) continue;
      double model = 0.0;
      for (Eigen::Index i = 0; i < s.rows(); ++i) model += std::pow(std::abs(s(i, t) - s(i, u)), gamma);
      const double diff = std::pow(std::abs(y[t] - y[u]), gamma) - model / m;
      total += (w_tu + w_ut) * diff * diff;
    }
  }
  return total;
}

// ---------------------------------------------------------------------------
// Test-set report

struct MetricOptions {
  CrpsEstimator crps_estimator = CrpsEstimator::energy;
  double vs_gamma = 0.5;
  std::optional<Matrix> vs_weights;
  /// Tie-aware reliability (see `reliability`), in base units; unset means
  /// the literal y <= qhat indicator.
  std::optional<double> tie_tolerance;
  std::size_t min_reliability_days = 10;
};

struct DayScores {
  Date day;
  double crps = 0.0, qs = 0.0, es = 0.0, vs = 0.0;
};

struct ZoneInput {
  int zone = 1;
  std::map<Date, Matrix> scenarios;
  std::map<Date, Vector> observations;
};

struct ZoneReport {
  int zone = 1;
  double crps = 0.0, qs = 0.0, mae_r = 0.0, es = 0.0, vs = 0.0;
  std::vector<DayScores> days;
  ReliabilityResult reliability;
};

/// CRPS, QS and ES in % of `base`; MAE-r in percentage points; VS unitless
/// on base-normalized values. Zone scores average over days; the headline
/// scores then average over zones.
struct QualityReport {
  double crps = 0.0, qs = 0.0, mae_r = 0.0, es = 0.0, vs = 0.0;
  int n_days = 0;
  int m = 0;
  double base = 1.0;
  std::vector<ZoneReport> zones;
  std::array<double, kQuantileLevels> reliability{}; // zone-averaged empirical curve
};

inline void check_alignment(const ZoneInput &z) {
  std::vector<std::string> no_obs, no_scen;
  for (const auto &[d, _] : z.scenarios)
    if (!z.observations.count(d)) no_obs.push_back(d.str());
  for (const auto &[d, _] : z.observations)
    if (!z.scenarios.count(d)) no_scen.push_back(d.str());
  if (no_obs.empty() && no_scen.empty()) return;
  std::string msg = "zone " + std::to_string(z.zone) + ":";
  auto list = [&](const char *what, const std::vector<std::string> &days) {
    if (days.empty()) return;
    msg += std::string(" ") + what + " [";
    for (std::size_t i = 0; i < days.size(); ++i) msg += (i ? "," : "") + days[i];
    msg += "]";
  };
  list("days without observations", no_obs);
  list("days without scenarios", no_scen);
  throw AlignmentError(msg);
}

inline QualityReport evaluate(std::span<const ZoneInput> zones, double base, const MetricOptions &opt = {}) {
  if (zones.empty()) throw ParameterError("nothing to evaluate");
  if (!(base > 0.0)) throw ParameterError("metric base must be positive");
  QualityReport rep;
  rep.base = base;
  rep.m = -1;
  const Matrix *w = opt.vs_weights ? &*opt.vs_weights : nullptr;
  for (const auto &z : zones) {
    check_alignment(z);
    if (z.scenarios.empty()) throw ParameterError("zone " + std::to_string(z.zone) + " has no days");
    ZoneReport zr;
    zr.zone = z.zone;
    std::vector<Matrix> sets;
    std::vector<Vector> obs;
    for (const auto &[day, raw] : z.scenarios) {
      if (rep.m < 0) rep.m = static_cast<int>(raw.rows());
      if (raw.rows() != rep.m) throw ParameterError("scenario count differs across days (" + day.str() + ")");
      const Matrix s = raw / base;
      const Vector y = z.observations.at(day) / base;
      DayScores ds;
      ds.day = day;
      ds.crps = 100.0 * crps(s, y, opt.crps_estimator).mean;
      // a single scenario has no quantiles to score
      ds.qs = s.rows() >= 2 ? 100.0 * quantile_score(s, y).mean : std::numeric_limits<double>::quiet_NaN();
      ds.es = 100.0 * energy_score(s, y);
      ds.vs = variogram_score(s, y, opt.vs_gamma, w);
      zr.days.push_back(ds);
      sets.push_back(s);
      obs.push_back(y);
    }
    const auto nd = static_cast<double>(zr.days.size());
    for (const auto &d : zr.days) {
      zr.crps += d.crps / nd;
      zr.qs += d.qs / nd;
      zr.es += d.es / nd;
      zr.vs += d.vs / nd;
    }
    zr.reliability = reliability(sets, obs, opt.tie_tolerance, opt.min_reliability_days);
    zr.mae_r = zr.reliability.mae_r;
    rep.n_days += static_cast<int>(zr.days.size());
    rep.zones.push_back(std::move(zr));
  }
  const auto nz = static_cast<double>(rep.zones.size());
  for (const auto &z : rep.zones) {
    rep.crps += z.crps / nz;
    rep.qs += z.qs / nz;
    rep.mae_r += z.mae_r / nz;
    rep.es += z.es / nz;
    rep.vs += z.vs / nz;
    for (int k = 0; k < kQuantileLevels; ++k) rep.reliability[k] += z.reliability.empirical[k] / nz;
  }
  return rep;
}

inline nlohmann::json report_to_json(const QualityReport &r) {
  nlohmann::json zones = nlohmann::json::array();
  for (const auto &z : r.zones) {
    nlohmann::json days = nlohmann::json::array();
    for (const auto &d : z.days)
      days.push_back({{"day", d.day.str()}, {"crps", d.crps}, {"qs", d.qs}, {"es", d.es}, {"vs", d.vs}});
    zones.push_back({{"zone", z.zone},
                     {"crps", z.crps},
                     {"qs", z.qs},
                     {"mae_r", z.mae_r},
                     {"es", z.es},
                     {"vs", z.vs},
                     {"reliability", z.reliability.empirical},
                     {"days", days}});
  }
  return {{"crps", r.crps}, {"qs", r.qs},         {"mae_r", r.mae_r}, {"es", r.es},
          {"vs", r.vs},     {"n_days", r.n_days}, {"m", r.m},         {"base", r.base},
          {"units", {{"crps", "%"}, {"qs", "%"}, {"es", "%"}, {"mae_r", "percentage points"}, {"vs", "unitless"}}},
          {"zones", zones}};
}

inline void write_reliability_csv(const std::string &path, const std::array<double, kQuantileLevels> &empirical) {
  std::ofstream f(path);
  if (!f) throw SchemaError("cannot write '" + path + "'");
  f << "nominal,empirical\n";
  for (int k = 0; k < kQuantileLevels; ++k) f << quantile_level(k) << ',' << empirical[k] << '\n';
}

} // namespace diffcast
