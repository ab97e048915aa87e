#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include <diffcast/data.hpp>

#include "test_util.hpp"

using namespace diffcast;
using diffcast::testing::scratch_dir;
using diffcast::testing::write_text;

namespace {

std::string day_rows(const std::string &day, int zone, int skip_hour = -1, const char *target = nullptr) {
  std::string out;
  for (int h = 0; h < 24; ++h) {
    if (h == skip_hour) continue;
    out += day + "," + std::to_string(h) + "," + std::to_string(zone) + ",";
    out += target ? std::string(target) : std::to_string(0.01 * h);
    out += "," + std::to_string(10 + h) + "\n";
  }
  return out;
}

double phi(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }
double Phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// E[min(max(X, 0), 1)] for X ~ N(mu, sd^2).
double censored_mean(double mu, double sd) {
  if (sd == 0.0) return std::clamp(mu, 0.0, 1.0);
  const double a = -mu / sd, b = (1.0 - mu) / sd;
  return mu * (Phi(b) - Phi(a)) + sd * (phi(a) - phi(b)) + (1.0 - Phi(b));
}

} // namespace

TEST(LoadCsv, TwoCompleteDays) {
  const auto dir = scratch_dir();
  write_text(dir / "a.csv", "date,hour,zone,target,w1\n" + day_rows("2013-01-01", 1) + day_rows("2013-01-02", 1));
  const auto ds = load_csv((dir / "a.csv").string(), Track::pv);
  EXPECT_EQ(ds.samples.size(), 2u);
  EXPECT_EQ(ds.channels, 1);
  EXPECT_EQ(ds.dropped_days, 0u);
  EXPECT_DOUBLE_EQ(ds.samples[0].x[5], 0.05);
  EXPECT_DOUBLE_EQ(ds.samples[1].c[23], 33.0);
}

TEST(LoadCsv, DayMissingHourIsDropped) {
  const auto dir = scratch_dir();
  write_text(dir / "a.csv",
             "date,hour,zone,target,w1\n" + day_rows("2013-01-01", 1) + day_rows("2013-01-02", 1, 13));
  const auto ds = load_csv((dir / "a.csv").string(), Track::pv);
  ASSERT_EQ(ds.samples.size(), 1u);
  EXPECT_EQ(ds.dropped_days, 1u);
  EXPECT_EQ(ds.samples[0].day.str(), "2013-01-01");
}

TEST(LoadCsv, MissingTargetCellDropsDay) {
  const auto dir = scratch_dir();
  std::string rows = day_rows("2013-01-01", 1);
  std::string bad = day_rows("2013-01-02", 1);
  bad.replace(bad.find("2013-01-02,7,1,0.070000"), 23, "2013-01-02,7,1,NA");
  write_text(dir / "a.csv", "date,hour,zone,target,w1\n" + rows + bad);
  const auto ds = load_csv((dir / "a.csv").string(), Track::pv);
  EXPECT_EQ(ds.samples.size(), 1u);
  EXPECT_EQ(ds.dropped_days, 1u);
}

TEST(LoadCsv, Errors) {
  const auto dir = scratch_dir();
  write_text(dir / "h.csv", "date,hour,zone,value,w1\n" + day_rows("2013-01-01", 1));
  EXPECT_THROW(load_csv((dir / "h.csv").string(), Track::pv), SchemaError);

  write_text(dir / "w.csv", "date,hour,zone,target,temp\n" + day_rows("2013-01-01", 1));
  EXPECT_THROW(load_csv((dir / "w.csv").string(), Track::pv), SchemaError);

  write_text(dir / "p.csv", "date,hour,zone,target,w1\n" + day_rows("2013-01-01", 1, -1, "abc"));
  try {
    load_csv((dir / "p.csv").string(), Track::pv);
    FAIL() << "expected a parse error";
  } catch (const ParseError &e) {
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos) << e.what();
  }

  write_text(dir / "d.csv", "date,hour,zone,target,w1\n" + day_rows("2013-01-01", 1) + "2013-01-01,4,1,0.1,3\n");
  EXPECT_THROW(load_csv((dir / "d.csv").string(), Track::pv), IntegrityError);

  write_text(dir / "z.csv", "date,hour,zone,target,w1\n" + day_rows("2013-01-01", 4));
  EXPECT_THROW(load_csv((dir / "z.csv").string(), Track::pv), IntegrityError);

  EXPECT_THROW(load_csv((dir / "absent.csv").string(), Track::pv), SchemaError);
}

TEST(LoadCsv, SyntheticRoundTrip) {
  const auto dir = scratch_dir();
  const auto ds = generate_synthetic(100, 11, SyntheticProfile::sine_pv, 2);
  write_csv(ds, (dir / "s.csv").string());
  const auto back = load_csv((dir / "s.csv").string(), Track::pv);
  ASSERT_EQ(back.samples.size(), ds.samples.size());
  double err = 0.0;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    ASSERT_EQ(back.samples[i].day, ds.samples[i].day);
    ASSERT_EQ(back.samples[i].zone, ds.samples[i].zone);
    for (int t = 0; t < 24; ++t) err = std::max(err, std::abs(back.samples[i].x[t] - ds.samples[i].x[t]));
    for (std::size_t k = 0; k < ds.samples[i].c.size(); ++k)
      err = std::max(err, std::abs(back.samples[i].c[k] - ds.samples[i].c[k]));
  }
  EXPECT_LE(err, 1e-12);

  const auto again = load_csv((dir / "s.csv").string(), Track::pv);
  for (std::size_t i = 0; i < ds.samples.size(); ++i) EXPECT_EQ(again.samples[i].x, back.samples[i].x);
}

TEST(Split, FloorRoundingAndDeterminism) {
  const auto ds = generate_synthetic(10, 1, SyntheticProfile::sine_pv);
  const auto a = split_random(ds, {0.5, 0.2, 0.3}, 1);
  EXPECT_EQ(a.select(Split::learn).size(), 5u);
  EXPECT_EQ(a.select(Split::validation).size(), 2u);
  EXPECT_EQ(a.select(Split::test).size(), 3u);
  const auto b = split_random(ds, {0.5, 0.2, 0.3}, 1);
  EXPECT_EQ(a.split, b.split);

  const auto odd = split_random(generate_synthetic(11, 1, SyntheticProfile::sine_pv), {0.7, 0.15, 0.15}, 3);
  EXPECT_EQ(odd.select(Split::validation).size(), 1u);
  EXPECT_EQ(odd.select(Split::learn).size(), 9u);
}

TEST(Split, PartitionsEveryDayForAnySeed) {
  const auto ds = generate_synthetic(37, 2, SyntheticProfile::ramp_wind, 3);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = split_random(ds, {0.7, 0.15, 0.15}, seed);
    EXPECT_EQ(s.split.size(), 37u);
    for (const auto &d : ds.days()) EXPECT_TRUE(s.split_of(d).has_value());
  }
}

TEST(Split, FiftyDayTestSet) {
  const auto ds = generate_synthetic(365, 5, SyntheticProfile::bimodal_load);
  const auto s = split_random_counts(ds, 50, 50, 9);
  EXPECT_EQ(s.select(Split::test).size(), 50u);
  EXPECT_EQ(s.select(Split::learn).size(), 265u);
}

TEST(Split, Errors) {
  EXPECT_THROW(split_random(generate_synthetic(2, 1, SyntheticProfile::sine_pv), {0.5, 0.25, 0.25}, 1),
               InsufficientDataError);
  const auto ds = generate_synthetic(10, 1, SyntheticProfile::sine_pv);
  EXPECT_THROW(split_random(ds, {0.5, 0.2, 0.2}, 1), ParameterError);
  EXPECT_THROW(split_random(ds, {1.0, 0.0, 0.0}, 1), ParameterError);
}

TEST(Normalize, DegenerateCovariateIsNamed) {
  auto ds = generate_synthetic(20, 1, SyntheticProfile::sine_pv);
  for (auto &s : ds.samples)
    for (int t = 0; t < 24; ++t) s.c[24 + t] = 4.0;
  ds = split_random(ds, {0.5, 0.25, 0.25}, 1);
  try {
    normalize(ds);
    FAIL() << "expected a degenerate-scale error";
  } catch (const DegenerateScaleError &e) {
    EXPECT_NE(std::string(e.what()).find("w2"), std::string::npos);
  }
}

TEST(Normalize, LoadScaleIsInverseLearnMax) {
  auto ds = generate_synthetic(10, 1, SyntheticProfile::bimodal_load);
  ds = split_random(ds, {0.5, 0.2, 0.3}, 4);
  double cap = 0.0;
  for (auto *s : ds.select(Split::learn)) cap = std::max(cap, *std::max_element(s->x.begin(), s->x.end()));
  for (auto &s : ds.samples)
    for (double &v : s.x) v = v == cap ? 100.0 : v * (100.0 / cap);
  const auto n = normalize(ds);
  EXPECT_DOUBLE_EQ(n.scaler.learn_max, 100.0);
  EXPECT_DOUBLE_EQ(n.scaler.target.scale, 1.0 / 100.0);
  EXPECT_DOUBLE_EQ(n.metric_base(), 100.0);
}

TEST(Normalize, RoundTrip) {
  auto ds = split_random(generate_synthetic(20, 8, SyntheticProfile::bimodal_load), {0.5, 0.25, 0.25}, 2);
  const auto back = denormalize(normalize(ds));
  double err = 0.0;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    for (int t = 0; t < 24; ++t) err = std::max(err, std::abs(back.samples[i].x[t] - ds.samples[i].x[t]));
    for (std::size_t k = 0; k < ds.samples[i].c.size(); ++k)
      err = std::max(err, std::abs(back.samples[i].c[k] - ds.samples[i].c[k]));
  }
  EXPECT_LE(err, 1e-12);
}

TEST(Normalize, LearnSplitCovariatesSpanUnitInterval) {
  auto ds = normalize(split_random(generate_synthetic(50, 3, SyntheticProfile::ramp_wind), {0.6, 0.2, 0.2}, 5));
  double lo = 1e9, hi = -1e9;
  for (auto *s : ds.select(Split::learn))
    for (double v : s->c) lo = std::min(lo, v), hi = std::max(hi, v);
  EXPECT_NEAR(lo, 0.0, 1e-15);
  EXPECT_NEAR(hi, 1.0, 1e-15);
}

TEST(Manifest, RestoresSplitAndScaler) {
  const auto raw = generate_synthetic(30, 3, SyntheticProfile::bimodal_load);
  const auto n = normalize(split_random(raw, {0.6, 0.2, 0.2}, 5));
  const auto j = nlohmann::json::parse(manifest_to_json(n).dump());
  EXPECT_EQ(j.at("split_sizes").at("learn").get<int>(), 18);
  const auto r = apply_manifest(raw, j);
  EXPECT_EQ(r.split, n.split);
  for (std::size_t i = 0; i < n.samples.size(); ++i)
    for (int t = 0; t < 24; ++t) EXPECT_DOUBLE_EQ(r.samples[i].x[t], n.samples[i].x[t]);

  auto other = generate_synthetic(30, 3, SyntheticProfile::sine_pv);
  EXPECT_THROW(apply_manifest(other, j), CheckpointError);
}

TEST(Synthetic, SinePvNightIsExactlyZero) {
  const auto ds = generate_synthetic(200, 4, SyntheticProfile::sine_pv);
  for (const auto &s : ds.samples) {
    for (int t = 0; t <= 6; ++t) EXPECT_EQ(s.x[t], 0.0);
    for (int t = 18; t < 24; ++t) EXPECT_EQ(s.x[t], 0.0);
    for (double v : s.x) EXPECT_TRUE(v >= 0.0 && v <= 1.0);
  }
}

TEST(Synthetic, ConditionCarriesAmplitude) {
  const auto ds = generate_synthetic(5, 4, SyntheticProfile::sine_pv);
  for (const auto &s : ds.samples) {
    const auto lat = synthetic_latent(SyntheticProfile::sine_pv, s.c);
    for (int t = 0; t < 24; ++t) EXPECT_NEAR(s.c[t], lat.a * clear_sky(t), 1e-15);
  }
}

TEST(Synthetic, BitReproducible) {
  for (auto p : {SyntheticProfile::sine_pv, SyntheticProfile::ramp_wind, SyntheticProfile::bimodal_load}) {
    const auto a = generate_synthetic(30, 99, p, 1), b = generate_synthetic(30, 99, p, 1);
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
      EXPECT_EQ(a.samples[i].x, b.samples[i].x);
      EXPECT_EQ(a.samples[i].c, b.samples[i].c);
    }
  }
}

TEST(Synthetic, LatentRecoveredFromCondition) {
  Rng rng(3);
  for (auto p : {SyntheticProfile::sine_pv, SyntheticProfile::ramp_wind, SyntheticProfile::bimodal_load}) {
    for (int k = 0; k < 20; ++k) {
      const auto lat = draw_synthetic_latent(p, rng);
      const auto back = synthetic_latent(p, synthetic_condition(p, lat));
      EXPECT_NEAR(back.a, lat.a, 1e-9);
      EXPECT_NEAR(back.b, lat.b, 1e-9);
    }
  }
}

// Mean over days of the clipped-Gaussian profile: integrate the censored
// normal mean over the uniform amplitude with Simpson's rule.
TEST(Synthetic, MonteCarloMeanMatchesClosedForm) {
  const int n = 10000;
  const auto ds = generate_synthetic(n, 2024, SyntheticProfile::sine_pv);
  const auto shape = synthetic_shape(SyntheticProfile::sine_pv);
  for (int t = 7; t <= 17; ++t) {
    double sum = 0.0, sq = 0.0;
    for (const auto &s : ds.samples) sum += s.x[t], sq += s.x[t] * s.x[t];
    const double mean = sum / n;
    const double se = std::sqrt((sq / n - mean * mean) / n);

    const double sky = std::max(0.0, std::sin(std::numbers::pi * (t - 6) / 12.0));
    const int grid = 2000;
    const double lo = shape.latent_lo, hi = shape.latent_hi, h = (hi - lo) / grid;
    double integral = 0.0;
    for (int k = 0; k <= grid; ++k) {
      const double a = lo + k * h;
      const double w = (k == 0 || k == grid) ? 1.0 : (k % 2 ? 4.0 : 2.0);
      integral += w * censored_mean(a * sky, shape.noise * sky);
    }
    const double expected = integral * h / 3.0 / (hi - lo);
    EXPECT_LE(std::abs(mean - expected), 3.0 * se) << "hour " << t;
  }
}

TEST(Synthetic, ParameterValidation) {
  EXPECT_THROW(generate_synthetic(0, 1, SyntheticProfile::sine_pv), ParameterError);
  EXPECT_THROW(generate_synthetic(5, 1, SyntheticProfile::sine_pv, 4), ParameterError);
  EXPECT_THROW(parse_profile("flat"), ParameterError);
}
