#pragma once

// Forecast value: a retailer bids day-ahead on its net position (wind + pv -
// load) and balances the realized position in real time with a battery;
// residual imbalances are penalized. The scenario-based planner is the
// deterministic equivalent of the two-stage problem.

#include <array>
#include <atomic>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "data.hpp"
#include "simplex.hpp"

namespace diffcast {

using HourlyPrices = std::array<double, kPeriods>;

inline HourlyPrices flat_prices(double v) {
  HourlyPrices p;
  p.fill(v);
  return p;
}

struct RetailerModel {
  double battery_capacity = 10.0; // MWh
  double charge_limit = 5.0;      // MW
  double discharge_limit = 5.0;   // MW
  double eta_charge = 0.95;
  double eta_discharge = 0.95;
  double soc_initial = 5.0; // MWh
  double soc_final = 5.0;   // MWh
  HourlyPrices price = flat_prices(50.0);            // EUR/MWh
  HourlyPrices penalty_surplus = flat_prices(25.0);  // EUR/MWh
  HourlyPrices penalty_deficit = flat_prices(100.0); // EUR/MWh
  // MW per unit of the per-unit scenario values
  double wind_capacity = 10.0;
  double pv_capacity = 10.0;
  double load_capacity = 10.0;

  void validate() const {
    auto fail = [](const std::string &m) { throw ModelValidationError(m); };
    if (!(battery_capacity >= 0.0)) fail("battery capacity must be non-negative");
    if (!(charge_limit >= 0.0) || !(discharge_limit >= 0.0)) fail("power limits must be non-negative");
    if (!(eta_charge > 0.0 && eta_charge <= 1.0) || !(eta_discharge > 0.0 && eta_discharge <= 1.0))
      fail("efficiencies must lie in (0, 1]");
    if (soc_initial < 0.0 || soc_initial > battery_capacity) fail("initial state of charge outside [0, capacity]");
    if (soc_final < 0.0 || soc_final > battery_capacity) fail("final state of charge outside [0, capacity]");
    for (int t = 0; t < kPeriods; ++t) {
      if (!std::isfinite(price[t])) fail("non-finite price at hour " + std::to_string(t));
      if (!(penalty_surplus[t] >= 0.0) || !(penalty_deficit[t] >= 0.0))
        fail("penalties must be non-negative (hour " + std::to_string(t) + ")");
    }
    const double up = kPeriods * eta_charge * charge_limit;
    const double down = kPeriods * discharge_limit / eta_discharge;
    if (soc_final - soc_initial > up + 1e-12) fail("final state of charge is unreachable: charging limit too low");
    if (soc_initial - soc_final > down + 1e-12)
      fail("final state of charge is unreachable: discharging limit too low");
    if (!(wind_capacity >= 0.0 && pv_capacity >= 0.0 && load_capacity >= 0.0))
      fail("portfolio capacities must be non-negative");
  }
};

/// One joint scenario in per-unit values (wind and pv of nominal capacity,
/// load of the load base).
struct JointScenario {
  DayProfile wind{}, pv{}, load{};
};

inline DayProfile net_position(const RetailerModel &m, const JointScenario &s) {
  DayProfile n{};
  for (int t = 0; t < kPeriods; ++t)
    n[t] = m.wind_capacity * s.wind[t] + m.pv_capacity * s.pv[t] - m.load_capacity * s.load[t];
  return n;
}

/// Column indices of the deterministic-equivalent program.
struct TwoStageIndex {
  int scenarios = 1;
  enum Kind { charge = 0, discharge, soc, surplus, deficit };
  static constexpr int kKinds = 5;

  int bid(int t) const { return t; }
  int var(int s, Kind k, int t) const { return kPeriods + (s * kKinds + k) * kPeriods + t; }
  int variables() const { return kPeriods + scenarios * kKinds * kPeriods; }
};

/// Maximizes sum_t price_t b_t - (1/S) sum_s sum_t (pen+ surplus + pen- deficit)
/// subject to, for every scenario s and hour t,
///   b_t - discharge + charge - deficit + surplus = net_{s,t}
///   soc_t = soc_{t-1} + eta_c charge - discharge / eta_d,  soc_23 = final
/// with bids free and battery variables bounded.
inline LPProblem build_two_stage_lp(const RetailerModel &model, std::span<const JointScenario> scenarios) {
  model.validate();
  if (scenarios.empty()) throw ParameterError("the planner needs at least one scenario");
  const int s_count = static_cast<int>(scenarios.size());
  const TwoStageIndex ix{s_count};
  const double w = 1.0 / s_count;
  LPProblem lp;
  lp.sense = ObjectiveSense::maximize;
  for (int t = 0; t < kPeriods; ++t) lp.add_variable("bid[" + std::to_string(t) + "]", model.price[t], -kInf, kInf);
  static constexpr const char *kind_name[] = {"charge", "discharge", "soc", "surplus", "deficit"};
  for (int s = 0; s < s_count; ++s) {
    for (int k = 0; k < TwoStageIndex::kKinds; ++k) {
      for (int t = 0; t < kPeriods; ++t) {
        double cost = 0.0, lo = 0.0, hi = kInf;
        switch (k) {
        case TwoStageIndex::charge: hi = model.charge_limit; break;
        case TwoStageIndex::discharge: hi = model.discharge_limit; break;
        case TwoStageIndex::soc:
          hi = model.battery_capacity;
          if (t == kPeriods - 1) lo = hi = model.soc_final;
          break;
        case TwoStageIndex::surplus: cost = -w * model.penalty_surplus[t]; break;
        case TwoStageIndex::deficit: cost = -w * model.penalty_deficit[t]; break;
        }
        lp.add_variable(std::string(kind_name[k]) + "[" + std::to_string(s) + "," + std::to_string(t) + "]", cost,
                        lo, hi);
      }
    }
  }
  for (int s = 0; s < s_count; ++s) {
    const auto net = net_position(model, scenarios[s]);
    for (int t = 0; t < kPeriods; ++t) {
      lp.add_row({{ix.bid(t), 1.0},
                  {ix.var(s, TwoStageIndex::discharge, t), -1.0},
                  {ix.var(s, TwoStageIndex::charge, t), 1.0},
                  {ix.var(s, TwoStageIndex::deficit, t), -1.0},
                  {ix.var(s, TwoStageIndex::surplus, t), 1.0}},
                 RowSense::equal, net[t]);
    }
    for (int t = 0; t < kPeriods; ++t) {
      std::vector<std::pair<int, double>> row{{ix.var(s, TwoStageIndex::soc, t), 1.0},
                                              {ix.var(s, TwoStageIndex::charge, t), -model.eta_charge},
                                              {ix.var(s, TwoStageIndex::discharge, t), 1.0 / model.eta_discharge}};
      double rhs = 0.0;
      if (t == 0)
        rhs = model.soc_initial;
      else
        row.emplace_back(ix.var(s, TwoStageIndex::soc, t - 1), -1.0);
      lp.add_row(std::move(row), RowSense::equal, rhs);
    }
  }
  return lp;
}

inline void check_optimal(const LPSolution &sol, const char *what) {
  if (sol.status != LPStatus::optimal)
    throw Error("solver", std::string(what) + ": linear program is " + std::string(to_string(sol.status)));
}

/// Day-ahead bids of the scenario-based planner.
inline HourlyPrices plan_bids(const RetailerModel &model, std::span<const JointScenario> scenarios,
                              const SimplexOptions &opt = {}) {
  const auto lp = build_two_stage_lp(model, scenarios);
  const auto sol = simplex_solve(lp, opt);
  check_optimal(sol, "planner");
  HourlyPrices b{};
  for (int t = 0; t < kPeriods; ++t) b[t] = sol.x[t];
  return b;
}

struct DispatchResult {
  double profit = 0.0;
  double revenue = 0.0;
  double penalty = 0.0;
  DayProfile charge{}, discharge{}, soc{}, surplus{}, deficit{};
};

/// Second stage against the observations with bids fixed.
inline DispatchResult realtime_dispatch(const RetailerModel &model, const HourlyPrices &bids,
                                        const JointScenario &observed, const SimplexOptions &opt = {}) {
  const JointScenario one[] = {observed};
  auto lp = build_two_stage_lp(model, one);
  for (int t = 0; t < kPeriods; ++t) {
    if (!std::isfinite(bids[t])) throw ParameterError("non-finite bid at hour " + std::to_string(t));
    lp.lower[t] = lp.upper[t] = bids[t];
  }
  const auto sol = simplex_solve(lp, opt);
  check_optimal(sol, "dispatch");
  const TwoStageIndex ix{1};
  DispatchResult r;
  for (int t = 0; t < kPeriods; ++t) {
    r.charge[t] = sol.x[ix.var(0, TwoStageIndex::charge, t)];
    r.discharge[t] = sol.x[ix.var(0, TwoStageIndex::discharge, t)];
    r.soc[t] = sol.x[ix.var(0, TwoStageIndex::soc, t)];
    r.surplus[t] = sol.x[ix.var(0, TwoStageIndex::surplus, t)];
    r.deficit[t] = sol.x[ix.var(0, TwoStageIndex::deficit, t)];
    r.revenue += model.price[t] * bids[t];
    r.penalty += model.penalty_surplus[t] * r.surplus[t] + model.penalty_deficit[t] * r.deficit[t];
  }
  r.profit = r.revenue - r.penalty;
  return r;
}

/// Perfect-foresight profit: the planner solved on the observations alone.
inline double oracle_profit(const RetailerModel &model, const JointScenario &observed, const SimplexOptions &opt = {}) {
  const JointScenario one[] = {observed};
  const auto sol = simplex_solve(build_two_stage_lp(model, one), opt);
  check_optimal(sol, "oracle");
  return sol.objective;
}

inline JointScenario mean_scenario(std::span<const JointScenario> scenarios) {
  JointScenario m;
  const double w = 1.0 / static_cast<double>(scenarios.size());
  for (const auto &s : scenarios)
    for (int t = 0; t < kPeriods; ++t) {
      m.wind[t] += w * s.wind[t];
      m.pv[t] += w * s.pv[t];
      m.load[t] += w * s.load[t];
    }
  return m;
}

/// Pairs scenario s of each track into joint scenario s.
inline std::vector<JointScenario> pair_scenarios(const Matrix &wind, const Matrix &pv, const Matrix &load,
                                                 int max_scenarios = 0) {
  auto s = std::min({wind.rows(), pv.rows(), load.rows()});
  if (max_scenarios > 0) s = std::min<Eigen::Index>(s, max_scenarios);
  if (s < 1) throw ParameterError("empty scenario set");
  if (wind.cols() != kPeriods || pv.cols() != kPeriods || load.cols() != kPeriods)
    throw DimensionError("scenario vectors must have 24 values");
  std::vector<JointScenario> out(static_cast<std::size_t>(s));
  for (Eigen::Index i = 0; i < s; ++i)
    for (int t = 0; t < kPeriods; ++t) {
      out[i].wind[t] = wind(i, t);
      out[i].pv[t] = pv(i, t);
      out[i].load[t] = load(i, t);
    }
  return out;
}

// ---------------------------------------------------------------------------
// Benchmark

/// zone -> day -> values (per-unit)
using TrackScenarios = std::map<int, std::map<Date, Matrix>>;
using TrackObservations = std::map<int, std::map<Date, Vector>>;

struct ModelScenarios {
  std::string name;
  TrackScenarios wind, pv, load;
};

struct ValueInputs {
  std::vector<ModelScenarios> models;
  TrackObservations wind, pv, load;
  std::vector<Date> days;
  std::vector<int> pv_zones{1};
  std::vector<int> wind_zones{1};
  int load_zone = 1;
};

struct ValueOptions {
  int max_scenarios = 20; // 0: use all paired scenarios
  int threads = 1;
  SimplexOptions simplex;
};

struct ValueRow {
  std::string model;
  Date day;
  int pv_zone = 1;
  int wind_zone = 1;
  double profit = 0.0;
};

struct ModelTotals {
  std::string name;
  double profit = 0.0;               // stochastic planner
  double deterministic_profit = 0.0; // bids from the scenario mean
  int days = 0;
};

struct ValueReport {
  std::vector<ValueRow> rows; // stochastic, deterministic ("<name>/deterministic") and "oracle" rows
  std::vector<ModelTotals> models;
  double oracle_profit = 0.0;
  int simulated_days = 0;
};

namespace detail {

inline JointScenario observation_at(const ValueInputs &in, const Date &d, int pv_zone, int wind_zone) {
  JointScenario o;
  const auto &w = in.wind.at(wind_zone).at(d);
  const auto &p = in.pv.at(pv_zone).at(d);
  const auto &l = in.load.at(in.load_zone).at(d);
  for (int t = 0; t < kPeriods; ++t) {
    o.wind[t] = w[t];
    o.pv[t] = p[t];
    o.load[t] = l[t];
  }
  return o;
}

template <class Map>
bool has(const Map &m, int zone, const Date &d) {
  auto z = m.find(zone);
  return z != m.end() && z->second.count(d);
}

} // namespace detail

inline ValueReport run_value_benchmark(const ValueInputs &in, const RetailerModel &model, const ValueOptions &opt = {}) {
  model.validate();
  struct Case {
    Date day;
    int pv_zone, wind_zone;
  };
  std::vector<Case> cases;
  for (const auto &d : in.days)
    for (int pz : in.pv_zones)
      for (int wz : in.wind_zones) cases.push_back({d, pz, wz});
  if (cases.empty()) throw ParameterError("no simulated days requested");

  std::vector<std::string> missing;
  for (const auto &c : cases) {
    auto need = [&](const auto &m, int zone, const std::string &what) {
      if (!detail::has(m, zone, c.day)) missing.push_back(what + " zone " + std::to_string(zone) + " " + c.day.str());
    };
    need(in.wind, c.wind_zone, "observed wind");
    need(in.pv, c.pv_zone, "observed pv");
    need(in.load, in.load_zone, "observed load");
    for (const auto &ms : in.models) {
      need(ms.wind, c.wind_zone, ms.name + " wind");
      need(ms.pv, c.pv_zone, ms.name + " pv");
      need(ms.load, in.load_zone, ms.name + " load");
    }
  }
  if (!missing.empty()) {
    std::string msg = "missing " + std::to_string(missing.size()) + " inputs:";
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) msg += " [" + missing[i] + "]";
    if (missing.size() > 20) msg += " ...";
    throw CoverageError(msg);
  }

  const std::size_t n_models = in.models.size();
  struct CaseResult {
    double oracle = 0.0;
    std::vector<double> stochastic, deterministic;
  };
  std::vector<CaseResult> results(cases.size());

  auto run_case = [&](std::size_t k) {
    const auto &c = cases[k];
    const auto obs = detail::observation_at(in, c.day, c.pv_zone, c.wind_zone);
    CaseResult r;
    r.oracle = oracle_profit(model, obs, opt.simplex);
    for (const auto &ms : in.models) {
      const auto joint = pair_scenarios(ms.wind.at(c.wind_zone).at(c.day), ms.pv.at(c.pv_zone).at(c.day),
                                        ms.load.at(in.load_zone).at(c.day), opt.max_scenarios);
      const auto bids = plan_bids(model, joint, opt.simplex);
      r.stochastic.push_back(realtime_dispatch(model, bids, obs, opt.simplex).profit);
      const JointScenario mean[] = {mean_scenario(joint)};
      const auto det_bids = plan_bids(model, mean, opt.simplex);
      r.deterministic.push_back(realtime_dispatch(model, det_bids, obs, opt.simplex).profit);
    }
    results[k] = std::move(r);
  };

  const int threads = std::max(1, std::min<int>(opt.threads, static_cast<int>(cases.size())));
  if (threads == 1) {
    for (std::size_t k = 0; k < cases.size(); ++k) run_case(k);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        try {
          for (std::size_t k; (k = next.fetch_add(1)) < cases.size();) run_case(k);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    for (auto &th : pool) th.join();
    for (auto &e : errors)
      if (e) std::rethrow_exception(e);
  }

  ValueReport rep;
  rep.simulated_days = static_cast<int>(cases.size());
  for (const auto &ms : in.models) rep.models.push_back({ms.name, 0.0, 0.0, 0});
  for (std::size_t k = 0; k < cases.size(); ++k) {
    const auto &c = cases[k];
    const auto &r = results[k];
    for (std::size_t i = 0; i < n_models; ++i) {
      rep.rows.push_back({in.models[i].name, c.day, c.pv_zone, c.wind_zone, r.stochastic[i]});
      rep.rows.push_back({in.models[i].name + "/deterministic", c.day, c.pv_zone, c.wind_zone, r.deterministic[i]});
      rep.models[i].profit += r.stochastic[i];
      rep.models[i].deterministic_profit += r.deterministic[i];
      ++rep.models[i].days;
    }
    rep.rows.push_back({"oracle", c.day, c.pv_zone, c.wind_zone, r.oracle});
    rep.oracle_profit += r.oracle;
  }
  return rep;
}

inline nlohmann::json value_report_to_json(const ValueReport &r) {
  nlohmann::json models = nlohmann::json::array();
  for (const auto &m : r.models)
    models.push_back({{"name", m.name},
                      {"profit_eur", m.profit},
                      {"mean_profit_eur", m.days ? m.profit / m.days : 0.0},
                      {"deterministic_profit_eur", m.deterministic_profit},
                      {"mean_deterministic_profit_eur", m.days ? m.deterministic_profit / m.days : 0.0}});
  nlohmann::json rows = nlohmann::json::array();
  for (const auto &row : r.rows)
    rows.push_back({{"model", row.model},
                    {"day", row.day.str()},
                    {"pv_zone", row.pv_zone},
                    {"wind_zone", row.wind_zone},
                    {"profit_eur", row.profit}});
  return {{"simulated_days", r.simulated_days},
          {"oracle_profit_eur", r.oracle_profit},
          {"mean_oracle_profit_eur", r.simulated_days ? r.oracle_profit / r.simulated_days : 0.0},
          {"models", models},
          {"rows", rows}};
}

inline void write_value_csv(const std::string &path, const ValueReport &r) {
  std::ofstream f(path);
  if (!f) throw SchemaError("cannot write '" + path + "'");
  f << "model,day,pv_zone,wind_zone,profit\n";
  for (const auto &row : r.rows)
    f << row.model << ',' << row.day.str() << ',' << row.pv_zone << ',' << row.wind_zone << ','
      << detail::fmt_double(row.profit) << '\n';
}

inline nlohmann::json retailer_to_json(const RetailerModel &m) {
  return {{"battery_capacity", m.battery_capacity},
          {"charge_limit", m.charge_limit},
          {"discharge_limit", m.discharge_limit},
          {"eta_charge", m.eta_charge},
          {"eta_discharge", m.eta_discharge},
          {"soc_initial", m.soc_initial},
          {"soc_final", m.soc_final},
          {"price", m.price},
          {"penalty_surplus", m.penalty_surplus},
          {"penalty_deficit", m.penalty_deficit},
          {"wind_capacity", m.wind_capacity},
          {"pv_capacity", m.pv_capacity},
          {"load_capacity", m.load_capacity}};
}

/// Missing keys keep their defaults; a scalar price or penalty applies to every hour.
inline RetailerModel retailer_from_json(const nlohmann::json &j) {
  RetailerModel m;
  auto num = [&](const char *key, double &dst) {
    if (j.contains(key)) dst = j.at(key).get<double>();
  };
  auto hourly = [&](const char *key, HourlyPrices &dst) {
    if (!j.contains(key)) return;
    const auto &v = j.at(key);
    if (v.is_number()) {
      dst.fill(v.get<double>());
    } else {
      const auto arr = v.get<std::vector<double>>();
      if (arr.size() != kPeriods) throw ConfigError(std::string(key) + " must have 24 values");
      std::copy(arr.begin(), arr.end(), dst.begin());
    }
  };
  num("battery_capacity", m.battery_capacity);
  num("charge_limit", m.charge_limit);
  num("discharge_limit", m.discharge_limit);
  num("eta_charge", m.eta_charge);
  num("eta_discharge", m.eta_discharge);
  num("soc_initial", m.soc_initial);
  num("soc_final", m.soc_final);
  hourly("price", m.price);
  hourly("penalty_surplus", m.penalty_surplus);
  hourly("penalty_deficit", m.penalty_deficit);
  num("wind_capacity", m.wind_capacity);
  num("pv_capacity", m.pv_capacity);
  num("load_capacity", m.load_capacity);
  return m;
}

} // namespace diffcast
