#pragma once

// Day-level data model: CSV ingestion, random day splits, affine scaling and
// the synthetic generators used as stand-ins for the competition data.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "core.hpp"

namespace diffcast {

using DayProfile = std::array<double, kPeriods>;

struct DaySample {
  Date day;
  Track track = Track::load;
  int zone = 1;
  DayProfile x{};
  /// Weather covariates, channel-major: c[k * 24 + t] is channel k at hour t.
  std::vector<double> c;
};

enum class Split { learn, validation, test };

inline std::string_view to_string(Split s) {
  switch (s) {
  case Split::learn: return "learn";
  case Split::validation: return "validation";
  case Split::test: return "test";
  }
  return "?";
}

inline Split parse_split(std::string_view s) {
  if (s == "learn") return Split::learn;
  if (s == "validation") return Split::validation;
  if (s == "test") return Split::test;
  throw ParameterError("unknown split '" + std::string(s) + "'");
}

/// normalized = (raw - offset) * scale
struct AffineScale {
  double offset = 0.0;
  double scale = 1.0;

  double apply(double raw) const { return (raw - offset) * scale; }
  double invert(double normalized) const { return normalized / scale + offset; }
};

struct Scaler {
  bool fitted = false;
  AffineScale target;
  std::vector<AffineScale> covariates; // one per weather channel
  /// Largest raw target on the learn split; the load track's physical base.
  double learn_max = 1.0;
};

struct Dataset {
  Track track = Track::load;
  int channels = 0;
  std::vector<DaySample> samples;
  std::map<Date, Split> split;
  Scaler scaler;
  bool normalized = false;
  std::size_t dropped_days = 0;

  std::vector<Date> days() const {
    std::vector<Date> out;
    for (const auto &s : samples) out.push_back(s.day);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  std::vector<int> zones() const {
    std::vector<int> out;
    for (const auto &s : samples) out.push_back(s.zone);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  std::optional<Split> split_of(const Date &d) const {
    auto it = split.find(d);
    if (it == split.end()) return std::nullopt;
    return it->second;
  }

  /// Samples of one split, optionally restricted to one zone, in day order.
  std::vector<const DaySample *> select(Split which, std::optional<int> zone = std::nullopt) const {
    std::vector<const DaySample *> out;
    for (const auto &s : samples) {
      if (zone && s.zone != *zone) continue;
      if (split_of(s.day) == which) out.push_back(&s);
    }
    return out;
  }

  /// Physical unit in which metrics are expressed as a percentage: nominal
  /// capacity (1 p.u.) for pv and wind, the learn-split maximum for load.
  double metric_base() const { return track == Track::load ? scaler.learn_max : 1.0; }
};

namespace detail {

inline std::vector<std::string> split_fields(const std::string &line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

inline std::optional<double> parse_double(const std::string &raw) {
  const std::string s = trim(raw);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const char *first = s.data() + (s[0] == '+' ? 1 : 0);
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::optional<long> parse_int(const std::string &raw) {
  const std::string s = trim(raw);
  long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline bool is_missing(const std::string &raw) {
  const std::string s = trim(raw);
  return s.empty() || s == "NA" || s == "NaN" || s == "nan";
}

inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

} // namespace detail

/// Reads a `date,hour,zone,target,w1,...,wK` file. One sample is produced per
/// complete (day, zone); an absent hour or a missing target cell drops that
/// sample and is counted in `dropped_days`. A repeated hour is an integrity error.
inline Dataset load_csv(const std::string &path, Track track) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("'" + path + "' is empty");
  const auto header = detail::split_fields(line);
  const std::array<const char *, 4> fixed{"date", "hour", "zone", "target"};
  if (header.size() < fixed.size())
    throw SchemaError("header must start with date,hour,zone,target");
  for (std::size_t i = 0; i < fixed.size(); ++i)
    if (detail::trim(header[i]) != fixed[i])
      throw SchemaError("header column " + std::to_string(i + 1) + " is '" + header[i] +
                        "', expected '" + fixed[i] + "'");
  const int channels = static_cast<int>(header.size() - fixed.size());
  for (int k = 0; k < channels; ++k)
    if (detail::trim(header[fixed.size() + k]) != "w" + std::to_string(k + 1))
      throw SchemaError("weather column " + std::to_string(k + 1) + " is '" +
                        header[fixed.size() + k] + "', expected 'w" + std::to_string(k + 1) + "'");

  struct Partial {
    std::array<bool, kPeriods> seen{};
    int rows = 0;
    bool missing = false;
    DaySample sample;
  };
  std::map<std::pair<Date, int>, Partial> partial;

  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (detail::trim(line).empty()) continue;
    const auto f = detail::split_fields(line);
    const auto where = " at row " + std::to_string(row);
    if (f.size() != header.size())
      throw ParseError("expected " + std::to_string(header.size()) + " cells, found " +
                       std::to_string(f.size()) + where);
    Date day;
    try {
      day = Date::parse(detail::trim(f[0]));
    } catch (const ParseError &e) {
      throw ParseError(std::string(e.what()) + where);
    }
    const auto hour = detail::parse_int(f[1]);
    if (!hour || *hour < 0 || *hour >= kPeriods)
      throw ParseError("hour '" + f[1] + "' not in 0..23" + where);
    const auto zone = detail::parse_int(f[2]);
    if (!zone || *zone < 1) throw ParseError("zone '" + f[2] + "' is not a positive integer" + where);
    if (*zone > zone_count(track))
      throw IntegrityError("zone " + std::to_string(*zone) + " exceeds the " +
                           std::string(to_string(track)) + " track's " +
                           std::to_string(zone_count(track)) + " zones" + where);

    auto &p = partial[{day, static_cast<int>(*zone)}];
    if (p.rows == 0) {
      p.sample.day = day;
      p.sample.track = track;
      p.sample.zone = static_cast<int>(*zone);
      p.sample.c.assign(static_cast<std::size_t>(channels) * kPeriods, 0.0);
    }
    ++p.rows;
    if (p.seen[*hour])
      throw IntegrityError("duplicate hour " + std::to_string(*hour) + " for " + day.str() +
                           " zone " + std::to_string(*zone) + where);
    p.seen[*hour] = true;

    if (detail::is_missing(f[3])) {
      p.missing = true;
    } else {
      const auto target = detail::parse_double(f[3]);
      if (!target) throw ParseError("non-numeric target '" + f[3] + "'" + where);
      if (track != Track::load && (*target < 0.0 || *target > 1.0))
        throw IntegrityError("per-unit target " + f[3] + " outside [0, 1]" + where);
      p.sample.x[*hour] = *target;
    }
    for (int k = 0; k < channels; ++k) {
      const auto v = detail::parse_double(f[4 + k]);
      if (!v) throw ParseError("non-numeric value '" + f[4 + k] + "' in w" + std::to_string(k + 1) + where);
      p.sample.c[static_cast<std::size_t>(k) * kPeriods + *hour] = *v;
    }
  }

  Dataset ds;
  ds.track = track;
  ds.channels = channels;
  for (auto &[key, p] : partial) {
    // duplicates were rejected above, so fewer rows means absent hours
    if (p.missing || p.rows < kPeriods) {
      ++ds.dropped_days;
      continue;
    }
    ds.samples.push_back(std::move(p.sample));
  }
  return ds;
}

/// Writes samples in the ingestion schema, in raw units.
inline void write_csv(const Dataset &ds, const std::string &path) {
  std::ofstream out(path);
  if (!out) throw SchemaError("cannot write '" + path + "'");
  out << "date,hour,zone,target";
  for (int k = 0; k < ds.channels; ++k) out << ",w" << (k + 1);
  out << '\n';
  for (const auto &s : ds.samples) {
    for (int t = 0; t < kPeriods; ++t) {
      const double target = ds.normalized ? ds.scaler.target.invert(s.x[t]) : s.x[t];
      out << s.day.str() << ',' << t << ',' << s.zone << ',' << detail::fmt_double(target);
      for (int k = 0; k < ds.channels; ++k) {
        double v = s.c[static_cast<std::size_t>(k) * kPeriods + t];
        if (ds.normalized) v = ds.scaler.covariates[k].invert(v);
        out << ',' << detail::fmt_double(v);
      }
      out << '\n';
    }
  }
}

/// Random day-level split with explicit validation and test day counts; the
/// remaining days go to the learn split.
inline Dataset split_random_counts(Dataset ds, std::size_t n_validation, std::size_t n_test,
                                   std::uint64_t seed) {
  auto days = ds.days();
  if (days.size() < 3)
    throw InsufficientDataError("need at least 3 days to split, found " + std::to_string(days.size()));
  if (n_validation + n_test >= days.size())
    throw InsufficientDataError("validation + test days (" + std::to_string(n_validation + n_test) +
                                ") leave no learn days out of " + std::to_string(days.size()));
  Rng rng(seed);
  std::shuffle(days.begin(), days.end(), rng);
  ds.split.clear();
  for (std::size_t i = 0; i < days.size(); ++i) {
    Split s = Split::learn;
    if (i < n_validation)
      s = Split::validation;
    else if (i < n_validation + n_test)
      s = Split::test;
    ds.split[days[i]] = s;
  }
  return ds;
}

/// Fractions are (learn, validation, test). Validation and test sizes are
/// floor-rounded and the remainder is assigned to learn.
inline Dataset split_random(Dataset ds, std::array<double, 3> fractions, std::uint64_t seed) {
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0)) throw ParameterError("split fractions must be positive");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ParameterError("split fractions must sum to 1");
  const auto n = static_cast<double>(ds.days().size());
  if (n < 3) throw InsufficientDataError("need at least 3 days to split, found " + std::to_string(int(n)));
  const auto n_val = static_cast<std::size_t>(std::floor(fractions[1] * n + 1e-9));
  const auto n_test = static_cast<std::size_t>(std::floor(fractions[2] * n + 1e-9));
  return split_random_counts(std::move(ds), n_val, n_test, seed);
}

/// Fits the scaler on the learn split and maps targets and covariates.
/// Load targets are divided by the learn-split maximum; pv and wind targets
/// are already per-unit of nominal capacity and keep scale 1. Covariates are
/// min-max scaled per channel.
inline Dataset normalize(Dataset ds) {
  if (ds.normalized) throw ParameterError("dataset is already normalized");
  const auto learn = ds.select(Split::learn);
  if (learn.empty()) throw InsufficientDataError("learn split is empty");

  Scaler sc;
  double tmax = -std::numeric_limits<double>::infinity();
  for (const auto *s : learn)
    for (double v : s->x) tmax = std::max(tmax, v);
  sc.learn_max = tmax;
  if (ds.track == Track::load) {
    if (!(tmax > 0.0)) throw DegenerateScaleError("target: learn-split maximum is not positive");
    sc.target = {0.0, 1.0 / tmax};
  } else {
    sc.learn_max = 1.0;
    sc.target = {0.0, 1.0};
  }
  for (int k = 0; k < ds.channels; ++k) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto *s : learn)
      for (int t = 0; t < kPeriods; ++t) {
        const double v = s->c[static_cast<std::size_t>(k) * kPeriods + t];
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    if (!(hi > lo)) throw DegenerateScaleError("w" + std::to_string(k + 1) + ": zero range on the learn split");
    sc.covariates.push_back({lo, 1.0 / (hi - lo)});
  }
  sc.fitted = true;

  for (auto &s : ds.samples) {
    for (double &v : s.x) v = sc.target.apply(v);
    for (int k = 0; k < ds.channels; ++k)
      for (int t = 0; t < kPeriods; ++t) {
        double &v = s.c[static_cast<std::size_t>(k) * kPeriods + t];
        v = sc.covariates[k].apply(v);
      }
  }
  ds.scaler = std::move(sc);
  ds.normalized = true;
  return ds;
}

/// Re-applies a previously fitted scaler (e.g. one restored from a manifest).
inline Dataset apply_scaler(Dataset ds, const Scaler &sc) {
  if (ds.normalized) throw ParameterError("dataset is already normalized");
  if (!sc.fitted || static_cast<int>(sc.covariates.size()) != ds.channels)
    throw DimensionError("scaler does not match the dataset's " + std::to_string(ds.channels) + " channels");
  for (auto &s : ds.samples) {
    for (double &v : s.x) v = sc.target.apply(v);
    for (int k = 0; k < ds.channels; ++k)
      for (int t = 0; t < kPeriods; ++t) {
        double &v = s.c[static_cast<std::size_t>(k) * kPeriods + t];
        v = sc.covariates[k].apply(v);
      }
  }
  ds.scaler = sc;
  ds.normalized = true;
  return ds;
}

inline Dataset denormalize(Dataset ds) {
  if (!ds.normalized) return ds;
  for (auto &s : ds.samples) {
    for (double &v : s.x) v = ds.scaler.target.invert(v);
    for (int k = 0; k < ds.channels; ++k)
      for (int t = 0; t < kPeriods; ++t) {
        double &v = s.c[static_cast<std::size_t>(k) * kPeriods + t];
        v = ds.scaler.covariates[k].invert(v);
      }
  }
  ds.normalized = false;
  return ds;
}

// ---------------------------------------------------------------------------
// Manifest

inline nlohmann::json scaler_to_json(const Scaler &sc) {
  nlohmann::json cov = nlohmann::json::array();
  for (const auto &a : sc.covariates) cov.push_back({{"offset", a.offset}, {"scale", a.scale}});
  return {{"fitted", sc.fitted},
          {"target", {{"offset", sc.target.offset}, {"scale", sc.target.scale}}},
          {"covariates", cov},
          {"learn_max", sc.learn_max}};
}

inline Scaler scaler_from_json(const nlohmann::json &j) {
  Scaler sc;
  sc.fitted = j.at("fitted").get<bool>();
  sc.target = {j.at("target").at("offset").get<double>(), j.at("target").at("scale").get<double>()};
  for (const auto &c : j.at("covariates"))
    sc.covariates.push_back({c.at("offset").get<double>(), c.at("scale").get<double>()});
  sc.learn_max = j.at("learn_max").get<double>();
  return sc;
}

inline nlohmann::json manifest_to_json(const Dataset &ds) {
  nlohmann::json split = nlohmann::json::object();
  std::array<std::size_t, 3> counts{};
  for (const auto &[day, s] : ds.split) {
    split[day.str()] = std::string(to_string(s));
    ++counts[static_cast<int>(s)];
  }
  return {{"track", std::string(to_string(ds.track))},
          {"channels", ds.channels},
          {"samples", ds.samples.size()},
          {"dropped_days", ds.dropped_days},
          {"split_sizes", {{"learn", counts[0]}, {"validation", counts[1]}, {"test", counts[2]}}},
          {"split", split},
          {"scaler", scaler_to_json(ds.scaler)}};
}

/// Restores split and scaler recorded in a manifest onto a raw dataset.
inline Dataset apply_manifest(Dataset ds, const nlohmann::json &manifest) {
  if (manifest.at("track").get<std::string>() != to_string(ds.track))
    throw CheckpointError("manifest track '" + manifest.at("track").get<std::string>() +
                          "' does not match data track '" + std::string(to_string(ds.track)) + "'");
  ds.split.clear();
  for (const auto &[day, s] : manifest.at("split").items())
    ds.split[Date::parse(day)] = parse_split(s.get<std::string>());
  return apply_scaler(std::move(ds), scaler_from_json(manifest.at("scaler")));
}

// ---------------------------------------------------------------------------
// Synthetic generators

enum class SyntheticProfile { sine_pv, ramp_wind, bimodal_load };

inline std::string_view to_string(SyntheticProfile p) {
  switch (p) {
  case SyntheticProfile::sine_pv: return "sine_pv";
  case SyntheticProfile::ramp_wind: return "ramp_wind";
  case SyntheticProfile::bimodal_load: return "bimodal_load";
  }
  return "?";
}

inline SyntheticProfile parse_profile(std::string_view s) {
  if (s == "sine_pv") return SyntheticProfile::sine_pv;
  if (s == "ramp_wind") return SyntheticProfile::ramp_wind;
  if (s == "bimodal_load") return SyntheticProfile::bimodal_load;
  throw ParameterError("unknown synthetic profile '" + std::string(s) + "'");
}

inline Track profile_track(SyntheticProfile p) {
  switch (p) {
  case SyntheticProfile::sine_pv: return Track::pv;
  case SyntheticProfile::ramp_wind: return Track::wind;
  case SyntheticProfile::bimodal_load: return Track::load;
  }
  return Track::load;
}

/// Generator constants. Noise is a stationary AR(1) standard-normal sequence
/// over the 24 hours with lag-one correlation `rho`.
struct SyntheticShape {
  double noise = 0.0;
  double rho = 0.0;
  double latent_lo = 0.0;
  double latent_hi = 1.0;
};

inline constexpr SyntheticShape synthetic_shape(SyntheticProfile p) {
  switch (p) {
  case SyntheticProfile::sine_pv: return {0.08, 0.8, 0.2, 0.9};
  case SyntheticProfile::ramp_wind: return {0.12, 0.9, 0.1, 0.9};
  case SyntheticProfile::bimodal_load: return {0.04, 0.85, 80.0, 120.0};
  }
  return {};
}

inline int synthetic_channels(SyntheticProfile p) {
  return p == SyntheticProfile::ramp_wind ? 1 : 2;
}

/// Clear-sky shape max(0, sin(pi (t - 6) / 12)), exactly zero outside 7..17.
inline double clear_sky(int t) {
  if (t <= 6 || t >= 18) return 0.0;
  return std::sin(std::numbers::pi * (t - 6) / 12.0);
}

inline double load_shape(int t) {
  return 1.0 + 0.35 * std::exp(-(t - 8.0) * (t - 8.0) / 6.0) + 0.55 * std::exp(-(t - 19.0) * (t - 19.0) / 6.0);
}

/// Latent day parameters: (a) for sine_pv, (start, end) for ramp_wind,
/// (base) for bimodal_load.
struct SyntheticLatent {
  double a = 0.0;
  double b = 0.0;
};

/// Conditional mean of the target before noise and clipping.
inline DayProfile synthetic_mean(SyntheticProfile p, const SyntheticLatent &lat) {
  DayProfile m{};
  for (int t = 0; t < kPeriods; ++t) {
    switch (p) {
    case SyntheticProfile::sine_pv: m[t] = lat.a * clear_sky(t); break;
    case SyntheticProfile::ramp_wind: m[t] = lat.a + (lat.b - lat.a) * t / 23.0; break;
    case SyntheticProfile::bimodal_load: m[t] = lat.a * load_shape(t); break;
    }
  }
  return m;
}

inline std::vector<double> synthetic_condition(SyntheticProfile p, const SyntheticLatent &lat) {
  const auto mean = synthetic_mean(p, lat);
  std::vector<double> c(static_cast<std::size_t>(synthetic_channels(p)) * kPeriods);
  for (int t = 0; t < kPeriods; ++t) {
    switch (p) {
    case SyntheticProfile::sine_pv:
      c[t] = mean[t];
      c[kPeriods + t] = clear_sky(t);
      break;
    case SyntheticProfile::ramp_wind: c[t] = mean[t]; break;
    case SyntheticProfile::bimodal_load:
      // temperature-like channel: cooler days carry higher load
      c[t] = 25.0 - 0.25 * (lat.a - 80.0) + 3.0 * std::sin(2.0 * std::numbers::pi * (t - 15) / 24.0);
      c[kPeriods + t] = load_shape(t);
      break;
    }
  }
  return c;
}

/// Recovers the latent parameters from a raw (unscaled) condition vector.
inline SyntheticLatent synthetic_latent(SyntheticProfile p, const std::vector<double> &c_raw) {
  if (c_raw.size() != static_cast<std::size_t>(synthetic_channels(p)) * kPeriods)
    throw DimensionError("condition length does not match the synthetic profile");
  switch (p) {
  case SyntheticProfile::sine_pv: return {c_raw[12], 0.0};
  case SyntheticProfile::ramp_wind: return {c_raw[0], c_raw[23]};
  case SyntheticProfile::bimodal_load: {
    double mean = 0.0;
    for (int t = 0; t < kPeriods; ++t) mean += c_raw[t];
    mean /= kPeriods;
    return {80.0 + 4.0 * (25.0 - mean), 0.0};
  }
  }
  return {};
}

inline SyntheticLatent draw_synthetic_latent(SyntheticProfile p, Rng &rng) {
  const auto shape = synthetic_shape(p);
  std::uniform_real_distribution<double> u(shape.latent_lo, shape.latent_hi);
  SyntheticLatent lat;
  lat.a = u(rng);
  if (p == SyntheticProfile::ramp_wind) lat.b = u(rng);
  return lat;
}

/// One draw from the generator's conditional distribution.
inline DayProfile draw_synthetic_target(SyntheticProfile p, const SyntheticLatent &lat, Rng &rng) {
  const auto shape = synthetic_shape(p);
  const auto mean = synthetic_mean(p, lat);
  const double innov = std::sqrt(1.0 - shape.rho * shape.rho);
  DayProfile x{};
  double z = standard_normal(rng);
  for (int t = 0; t < kPeriods; ++t) {
    if (t > 0) z = shape.rho * z + innov * standard_normal(rng);
    switch (p) {
    case SyntheticProfile::sine_pv:
      x[t] = std::clamp(mean[t] + shape.noise * clear_sky(t) * z, 0.0, 1.0);
      break;
    case SyntheticProfile::ramp_wind: x[t] = std::clamp(mean[t] + shape.noise * z, 0.0, 1.0); break;
    case SyntheticProfile::bimodal_load: x[t] = mean[t] * (1.0 + shape.noise * z); break;
    }
  }
  return x;
}

/// M draws from the true conditional distribution of a synthetic day, in raw units.
inline Matrix synthetic_scenarios(SyntheticProfile p, const std::vector<double> &c_raw, int m, Rng &rng) {
  const auto lat = synthetic_latent(p, c_raw);
  Matrix out(m, kPeriods);
  for (int i = 0; i < m; ++i) {
    const auto x = draw_synthetic_target(p, lat, rng);
    for (int t = 0; t < kPeriods; ++t) out(i, t) = x[t];
  }
  return out;
}

/// Raw-unit synthetic dataset with `zones` independent zones per day starting
/// at `first_day`. Each (day, zone) uses its own RNG stream derived from `seed`.
inline Dataset generate_synthetic(int n_days, std::uint64_t seed, SyntheticProfile profile, int zones = 1,
                                  Date first_day = Date(2013, 1, 1)) {
  if (n_days < 1) throw ParameterError("n_days must be at least 1");
  const Track track = profile_track(profile);
  if (zones < 1 || zones > zone_count(track))
    throw ParameterError("zones must be in 1.." + std::to_string(zone_count(track)) + " for the " +
                         std::string(to_string(track)) + " track");
  Dataset ds;
  ds.track = track;
  ds.channels = synthetic_channels(profile);
  ds.samples.reserve(static_cast<std::size_t>(n_days) * zones);
  for (int d = 0; d < n_days; ++d) {
    for (int z = 1; z <= zones; ++z) {
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(d), static_cast<std::uint64_t>(z)));
      const auto lat = draw_synthetic_latent(profile, rng);
      DaySample s;
      s.day = first_day.plus_days(d);
      s.track = track;
      s.zone = z;
      s.x = draw_synthetic_target(profile, lat, rng);
      s.c = synthetic_condition(profile, lat);
      ds.samples.push_back(std::move(s));
    }
  }
  return ds;
}

} // namespace diffcast
