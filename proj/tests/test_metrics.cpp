#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include <diffcast/metrics.hpp>
#include <diffcast/data.hpp>

#include "stats.hpp"

using namespace diffcast;

namespace {

Matrix rows(std::initializer_list<std::initializer_list<double>> r) {
  Matrix m(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(r.begin()->size()));
  Eigen::Index i = 0;
  for (const auto &row : r) {
    Eigen::Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

double brute_crps(const Matrix &s, const Vector &y) {
  double total = 0.0;
  const double m = static_cast<double>(s.rows());
  for (Eigen::Index t = 0; t < s.cols(); ++t) {
    double a = 0.0, b = 0.0;
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
      a += std::abs(s(i, t) - y[t]);
      for (Eigen::Index j = 0; j < s.rows(); ++j) b += std::abs(s(i, t) - s(j, t));
    }
    total += a / m - b / (2 * m * m);
  }
  return total / static_cast<double>(s.cols());
}

double brute_es(const Matrix &s, const Vector &y) {
  const double m = static_cast<double>(s.rows());
  double a = 0.0, b = 0.0;
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    double d = 0.0;
    for (Eigen::Index t = 0; t < s.cols(); ++t) d += (s(i, t) - y[t]) * (s(i, t) - y[t]);
    a += std::sqrt(d);
    for (Eigen::Index j = 0; j < s.rows(); ++j) {
      double e = 0.0;
      for (Eigen::Index t = 0; t < s.cols(); ++t) e += (s(i, t) - s(j, t)) * (s(i, t) - s(j, t));
      b += std::sqrt(e);
    }
  }
  return a / m - b / (2 * m * m);
}

double brute_vs(const Matrix &s, const Vector &y, double g, const Matrix &w) {
  double total = 0.0;
  for (Eigen::Index t = 0; t < s.cols(); ++t)
    for (Eigen::Index u = 0; u < s.cols(); ++u) {
      double model = 0.0;
      for (Eigen::Index i = 0; i < s.rows(); ++i) model += std::pow(std::abs(s(i, t) - s(i, u)), g);
      const double d = std::pow(std::abs(y[t] - y[u]), g) - model / static_cast<double>(s.rows());
      total += w(t, u) * d * d;
    }
  return total;
}

double normal_quantile(double q) {
  double lo = -10.0, hi = 10.0;
  for (int k = 0; k < 200; ++k) {
    const double mid = 0.5 * (lo + hi);
    (0.5 * std::erfc(-mid / std::sqrt(2.0)) < q ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

Matrix random_matrix(int r, int c, Rng &rng) {
  Matrix m(r, c);
  fill_normal(m, rng);
  return m;
}

Vector random_vector(int n, Rng &rng) {
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = standard_normal(rng);
  return v;
}

} // namespace

TEST(Crps, PerfectForecastIsZero) {
  const Vector y = vec({0.2, 0.5, 0.9});
  const Matrix s = y.transpose().replicate(7, 1);
  EXPECT_EQ(crps(s, y).mean, 0.0);
}

TEST(Crps, SingleScenarioIsMae) {
  const Matrix s = rows({{0.1, 0.7, 0.3, 1.0}});
  const Vector y = vec({0.4, 0.2, 0.3, 0.0});
  EXPECT_EQ(crps(s, y).mean, (0.3 + 0.5 + 0.0 + 1.0) / 4.0);
}

TEST(Crps, HandEvaluatedPair) {
  EXPECT_NEAR(crps(rows({{0.0}, {1.0}}), vec({0.0})).mean, 0.25, 1e-15);
  // unbiased variant: 0.5 - 2 / (2 * 2 * 1) = 0
  EXPECT_NEAR(crps(rows({{0.0}, {1.0}}), vec({0.0}), CrpsEstimator::unbiased).mean, 0.0, 1e-15);
  EXPECT_THROW(crps(rows({{0.0}}), vec({0.0}), CrpsEstimator::unbiased), InsufficientDataError);
}

TEST(Crps, MatchesBruteForce) {
  Rng rng(1);
  for (int k = 0; k < 20; ++k) {
    const Matrix s = random_matrix(1 + k * 5, 24, rng);
    const Vector y = random_vector(24, rng);
    EXPECT_NEAR(crps(s, y).mean, brute_crps(s, y), 1e-12);
  }
}

TEST(Crps, LengthMismatch) {
  EXPECT_THROW(crps(rows({{0.0, 1.0}}), vec({0.0})), DimensionError);
}

TEST(QuantileScore, DegenerateAtObservation) {
  const Vector y = vec({0.3, 0.6});
  EXPECT_EQ(quantile_score(y.transpose().replicate(10, 1), y).mean, 0.0);
}

TEST(QuantileScore, PinballFormula) {
  EXPECT_DOUBLE_EQ(pinball_loss(1.0, 0.0, 0.5), 0.5);
  EXPECT_DOUBLE_EQ(pinball_loss(0.0, 1.0, 0.9), 0.1);
  EXPECT_DOUBLE_EQ(pinball_loss(1.0, 0.0, 0.9), 0.9);
  // median of {-1, 1} is 0 under the midpoint convention
  const std::vector<double> two{-1.0, 1.0};
  EXPECT_DOUBLE_EQ(empirical_quantile(two, 0.5), 0.0);
}

TEST(QuantileScore, EmpiricalQuantileConvention) {
  const std::vector<double> s{1.0, 2.0, 3.0, 4.0};
  EXPECT_DOUBLE_EQ(empirical_quantile(s, 0.125), 1.0); // (1 - 0.5) / 4
  EXPECT_DOUBLE_EQ(empirical_quantile(s, 0.375), 2.0);
  EXPECT_DOUBLE_EQ(empirical_quantile(s, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(empirical_quantile(s, 0.01), 1.0);
  EXPECT_DOUBLE_EQ(empirical_quantile(s, 0.99), 4.0);
}

TEST(QuantileScore, HandComputedMicroInstance) {
  // M = 2, one marginal: qhat_q = -1 for q <= 0.25, 1 for q >= 0.75, linear between
  const Matrix s = rows({{-1.0}, {1.0}});
  const Vector y = vec({0.0});
  double expected = 0.0;
  for (int k = 1; k <= 99; ++k) {
    const double q = k / 100.0;
    const double qhat = q <= 0.25 ? -1.0 : q >= 0.75 ? 1.0 : -1.0 + (q - 0.25) * 4.0;
    expected += 0.0 >= qhat ? q * (0.0 - qhat) : (1 - q) * (qhat - 0.0);
  }
  EXPECT_NEAR(quantile_score(s, y).mean, expected / 99.0, 1e-15);
  EXPECT_THROW(quantile_score(rows({{0.0}}), y), InsufficientDataError);
}

TEST(QuantileScore, NormalScenariosMatchPinballIntegral) {
  // exact quantiles of N(0, 1) scored at y = 0, against 200 replicate sets of 100 draws
  double exact = 0.0;
  for (int k = 1; k <= 99; ++k) exact += pinball_loss(0.0, normal_quantile(k / 100.0), k / 100.0);
  exact /= 99.0;
  EXPECT_NEAR(exact, (2.0 / std::sqrt(2.0 * std::numbers::pi) - 1.0 / std::sqrt(std::numbers::pi)) / 2.0, 0.01);
  Rng rng(2);
  Matrix s(100, 1);
  double avg = 0.0;
  for (int r = 0; r < 200; ++r) {
    fill_normal(s, rng);
    avg += quantile_score(s, vec({0.0})).mean / 200.0;
  }
  EXPECT_NEAR(avg, exact, 0.1 * exact);
}

TEST(Reliability, SameGeneratorIsCalibrated) {
  Rng rng(3);
  const auto profile = SyntheticProfile::ramp_wind;
  std::vector<Matrix> sets;
  std::vector<Vector> obs;
  for (int d = 0; d < 500; ++d) {
    const auto lat = draw_synthetic_latent(profile, rng);
    const auto c = synthetic_condition(profile, lat);
    sets.push_back(synthetic_scenarios(profile, c, 100, rng));
    const auto y = draw_synthetic_target(profile, lat, rng);
    obs.push_back(Eigen::Map<const Vector>(y.data(), 24));
  }
  // ramp_wind is clipped to [0, 1], so ties are handled as atoms
  EXPECT_LE(reliability(sets, obs, 1e-12).mae_r, 2.0);
}

TEST(Reliability, AtomsNeedTieTolerance) {
  // Exact zeros at night: with strict comparisons every level counts as covered.
  Rng rng(4);
  const auto profile = SyntheticProfile::sine_pv;
  std::vector<Matrix> sets;
  std::vector<Vector> obs;
  for (int d = 0; d < 300; ++d) {
    const auto lat = draw_synthetic_latent(profile, rng);
    sets.push_back(synthetic_scenarios(profile, synthetic_condition(profile, lat), 100, rng));
    const auto y = draw_synthetic_target(profile, lat, rng);
    obs.push_back(Eigen::Map<const Vector>(y.data(), 24));
  }
  EXPECT_GT(reliability(sets, obs).mae_r, 10.0);
  EXPECT_LE(reliability(sets, obs, 0.0).mae_r, 2.0);
  EXPECT_LE(reliability(sets, obs, 1e-9).mae_r, 2.0);
  EXPECT_THROW(reliability(sets, obs, -1.0), ParameterError);
}

TEST(Reliability, AllAboveIsFiftyPoints) {
  std::vector<Matrix> sets(12, Matrix::Constant(5, 24, 2.0));
  std::vector<Vector> obs(12, Vector::Zero(24));
  const auto r = reliability(sets, obs);
  for (double f : r.empirical) EXPECT_EQ(f, 1.0);
  EXPECT_NEAR(r.mae_r, 50.0, 1e-12);
}

TEST(Reliability, Errors) {
  EXPECT_THROW(reliability(std::span<const Matrix>{}, std::span<const Vector>{}), ParameterError);
  std::vector<Matrix> sets(5, Matrix::Zero(3, 24));
  std::vector<Vector> obs(5, Vector::Zero(24));
  EXPECT_THROW(reliability(sets, obs), InsufficientDataError);
}

TEST(EnergyScore, HandEvaluated) {
  EXPECT_NEAR(energy_score(rows({{0.0, 0.0}, {1.0, 0.0}}), vec({0.0, 0.0})), 0.25, 1e-15);
  const Vector y = vec({1.0, 2.0, 3.0});
  EXPECT_EQ(energy_score(y.transpose().replicate(4, 1), y), 0.0);
  EXPECT_THROW(energy_score(rows({{0.0, 0.0}}), vec({0.0})), DimensionError);
}

TEST(EnergyScore, MatchesBruteForce) {
  Rng rng(5);
  for (int k = 0; k < 10; ++k) {
    const Matrix s = random_matrix(2 + 7 * k, 24, rng);
    const Vector y = random_vector(24, rng);
    EXPECT_NEAR(energy_score(s, y), brute_es(s, y), 1e-12);
  }
}

TEST(EnergyScore, EqualsCrpsForOnePeriod) {
  Rng rng(6);
  for (int k = 0; k < 10; ++k) {
    const Matrix s = random_matrix(3 + k, 1, rng);
    const Vector y = random_vector(1, rng);
    EXPECT_NEAR(energy_score(s, y), crps(s, y).mean, 1e-14);
  }
}

TEST(VariogramScore, HandEvaluated) {
  EXPECT_NEAR(variogram_score(rows({{0.0, 2.0}}), vec({0.0, 1.0}), 1.0), 2.0, 1e-15);
  const Vector y = vec({0.1, 0.5, 0.2});
  EXPECT_EQ(variogram_score(y.transpose().replicate(3, 1), y), 0.0);
  EXPECT_THROW(variogram_score(rows({{0.0, 2.0}}), vec({0.0, 1.0}), 0.0), ParameterError);
  Matrix neg = Matrix::Ones(2, 2);
  neg(0, 1) = -1.0;
  EXPECT_THROW(variogram_score(rows({{0.0, 2.0}}), vec({0.0, 1.0}), 0.5, &neg), ParameterError);
}

TEST(VariogramScore, MatchesBruteForceWithWeights) {
  Rng rng(7);
  for (int k = 0; k < 5; ++k) {
    const Matrix s = random_matrix(10, 24, rng);
    const Vector y = random_vector(24, rng);
    Matrix w = random_matrix(24, 24, rng).cwiseAbs();
    EXPECT_NEAR(variogram_score(s, y, 0.5, &w), brute_vs(s, y, 0.5, w), 1e-9);
    EXPECT_NEAR(variogram_score(s, y, 1.5), brute_vs(s, y, 1.5, Matrix::Ones(24, 24)), 1e-9);
  }
}

TEST(VariogramScore, DetectsDecorrelation) {
  Rng rng(8);
  const auto profile = SyntheticProfile::ramp_wind;
  double original = 0.0, shuffled = 0.0;
  for (int d = 0; d < 50; ++d) {
    const auto lat = draw_synthetic_latent(profile, rng);
    const auto c = synthetic_condition(profile, lat);
    Matrix s = synthetic_scenarios(profile, c, 100, rng);
    const auto y = draw_synthetic_target(profile, lat, rng);
    const Vector yv = Eigen::Map<const Vector>(y.data(), 24);
    original += variogram_score(s, yv);
    for (int t = 0; t < 24; ++t) {
      std::vector<double> v(100);
      for (int i = 0; i < 100; ++i) v[i] = s(i, t);
      std::shuffle(v.begin(), v.end(), rng);
      for (int i = 0; i < 100; ++i) s(i, t) = v[i];
    }
    shuffled += variogram_score(s, yv);
  }
  EXPECT_GT(shuffled, original);
}

TEST(Properties, NonNegativeAndPermutationInvariant) {
  Rng rng(9);
  for (int k = 0; k < 10; ++k) {
    Matrix s = random_matrix(20, 24, rng);
    const Vector y = random_vector(24, rng);
    const double c = crps(s, y).mean, q = quantile_score(s, y).mean, e = energy_score(s, y), v = variogram_score(s, y);
    EXPECT_GE(c, 0.0);
    EXPECT_GE(q, 0.0);
    EXPECT_GE(e, 0.0);
    EXPECT_GE(v, 0.0);
    std::vector<int> perm(20);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix p(20, 24);
    for (int i = 0; i < 20; ++i) p.row(i) = s.row(perm[i]);
    EXPECT_NEAR(crps(p, y).mean, c, 1e-14);
    EXPECT_NEAR(quantile_score(p, y).mean, q, 1e-14);
    EXPECT_NEAR(energy_score(p, y), e, 1e-12);
    EXPECT_NEAR(variogram_score(p, y), v, 1e-12);
  }
}

TEST(Properties, TrueDistributionScoresNoWorseThanShifted) {
  Rng rng(10);
  const auto profile = SyntheticProfile::ramp_wind;
  std::vector<double> dc, de;
  for (int d = 0; d < 400; ++d) {
    const auto lat = draw_synthetic_latent(profile, rng);
    const auto c = synthetic_condition(profile, lat);
    const Matrix truth = synthetic_scenarios(profile, c, 50, rng);
    const Matrix shifted = (truth.array() + 0.05).matrix();
    const auto y = draw_synthetic_target(profile, lat, rng);
    const Vector yv = Eigen::Map<const Vector>(y.data(), 24);
    dc.push_back(crps(shifted, yv).mean - crps(truth, yv).mean);
    de.push_back(energy_score(shifted, yv) - energy_score(truth, yv));
  }
  for (const auto *diff : {&dc, &de}) {
    const double se = std::sqrt(diffcast::testing::variance(*diff) / diff->size());
    EXPECT_GE(diffcast::testing::mean(*diff), -3.0 * se);
  }
}

namespace {

ZoneInput make_zone(int zone, int days, int m, Rng &rng, double noise = 0.1) {
  ZoneInput z;
  z.zone = zone;
  for (int d = 0; d < days; ++d) {
    const Date day = Date(2013, 1, 1).plus_days(d);
    Vector y(24);
    for (int t = 0; t < 24; ++t) y[t] = 50.0 + 10.0 * std::sin(t / 3.0) + 5.0 * standard_normal(rng);
    Matrix s(m, 24);
    for (int i = 0; i < m; ++i)
      for (int t = 0; t < 24; ++t) s(i, t) = y[t] + 100.0 * noise * standard_normal(rng);
    z.scenarios[day] = s;
    z.observations[day] = y;
  }
  return z;
}

} // namespace

TEST(Evaluate, PerfectScenarios) {
  Rng rng(11);
  auto z = make_zone(1, 12, 5, rng);
  for (auto &[d, s] : z.scenarios) s = z.observations[d].transpose().replicate(5, 1);
  const auto r = evaluate(std::span<const ZoneInput>(&z, 1), 80.0);
  EXPECT_EQ(r.crps, 0.0);
  EXPECT_EQ(r.qs, 0.0);
  EXPECT_EQ(r.es, 0.0);
  EXPECT_NEAR(r.vs, 0.0, 1e-15);
  EXPECT_NEAR(r.mae_r, 50.0, 1e-12);
  EXPECT_EQ(r.n_days, 12);
  MetricOptions ties;
  ties.tie_tolerance = 0.0;
  EXPECT_NEAR(evaluate(std::span<const ZoneInput>(&z, 1), 80.0, ties).mae_r, 0.0, 1e-12);
  EXPECT_EQ(r.m, 5);
}

TEST(Evaluate, SingleCopyCrpsIsMae) {
  Rng rng(12);
  auto z = make_zone(1, 12, 1, rng);
  const auto r = evaluate(std::span<const ZoneInput>(&z, 1), 80.0);
  double mae = 0.0;
  for (const auto &[d, s] : z.scenarios) mae += (s.row(0).transpose() - z.observations[d]).cwiseAbs().mean() / 80.0;
  EXPECT_NEAR(r.crps, 100.0 * mae / 12.0, 1e-12);
  EXPECT_TRUE(std::isnan(r.qs));
}

TEST(Evaluate, MatchesComponentRecomputation) {
  Rng rng(13);
  std::vector<ZoneInput> zones{make_zone(1, 15, 20, rng), make_zone(2, 15, 20, rng, 0.2)};
  MetricOptions opt;
  opt.vs_gamma = 0.7;
  const double base = 75.0;
  const auto r = evaluate(zones, base, opt);
  double crps_sum = 0.0, qs_sum = 0.0, es_sum = 0.0, vs_sum = 0.0, mae_sum = 0.0;
  for (const auto &z : zones) {
    double c = 0.0, q = 0.0, e = 0.0, v = 0.0;
    std::vector<Matrix> sets;
    std::vector<Vector> obs;
    for (const auto &[d, s] : z.scenarios) {
      const Matrix sn = s / base;
      const Vector yn = z.observations.at(d) / base;
      c += 100.0 * brute_crps(sn, yn);
      q += 100.0 * quantile_score(sn, yn).mean;
      e += 100.0 * brute_es(sn, yn);
      v += brute_vs(sn, yn, 0.7, Matrix::Ones(24, 24));
      sets.push_back(sn);
      obs.push_back(yn);
    }
    crps_sum += c / 15.0;
    qs_sum += q / 15.0;
    es_sum += e / 15.0;
    vs_sum += v / 15.0;
    mae_sum += reliability(sets, obs).mae_r;
  }
  EXPECT_NEAR(r.crps, crps_sum / 2.0, 1e-9);
  EXPECT_NEAR(r.qs, qs_sum / 2.0, 1e-9);
  EXPECT_NEAR(r.es, es_sum / 2.0, 1e-9);
  EXPECT_NEAR(r.vs, vs_sum / 2.0, 1e-9);
  EXPECT_NEAR(r.mae_r, mae_sum / 2.0, 1e-9);
  EXPECT_EQ(r.n_days, 30);
  const auto j = report_to_json(r);
  EXPECT_EQ(j.at("m").get<int>(), 20);
  EXPECT_EQ(j.at("zones").size(), 2u);
  EXPECT_EQ(j.at("zones")[0].at("days").size(), 15u);
}

TEST(Evaluate, AlignmentErrorListsDays) {
  Rng rng(14);
  auto z = make_zone(1, 12, 5, rng);
  z.observations.erase(Date(2013, 1, 4));
  z.scenarios.erase(Date(2013, 1, 7));
  try {
    evaluate(std::span<const ZoneInput>(&z, 1), 1.0);
    FAIL() << "expected alignment error";
  } catch (const AlignmentError &e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("2013-01-04"), std::string::npos);
    EXPECT_NE(msg.find("2013-01-07"), std::string::npos);
  }
}
