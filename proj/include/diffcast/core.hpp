#pragma once

#include <Eigen/Dense>

#include <array>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <random>
#include <string>
#include <string_view>

#include "errors.hpp"

namespace diffcast {

/// Number of periods per day.
inline constexpr int kPeriods = 24;

using Vector = Eigen::VectorXd;
/// Batches and scenario sets are stored one sample per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Rng = std::mt19937_64;

enum class Track { load, pv, wind };

inline std::string_view to_string(Track t) {
  switch (t) {
  case Track::load: return "load";
  case Track::pv: return "pv";
  case Track::wind: return "wind";
  }
  return "?";
}

inline Track parse_track(std::string_view s) {
  if (s == "load") return Track::load;
  if (s == "pv") return Track::pv;
  if (s == "wind") return Track::wind;
  throw ParameterError("unknown track '" + std::string(s) + "' (expected load, pv or wind)");
}

/// Zone count of each track in the reference data set.
inline constexpr int zone_count(Track t) {
  switch (t) {
  case Track::load: return 1;
  case Track::pv: return 3;
  case Track::wind: return 10;
  }
  return 0;
}

/// Calendar date with ISO-8601 text form.
class Date {
public:
  Date() = default;
  explicit Date(std::chrono::year_month_day ymd) : ymd_(ymd) {
    if (!ymd_.ok()) throw ParseError("invalid calendar date");
  }
  Date(int y, unsigned m, unsigned d)
      : Date(std::chrono::year_month_day{std::chrono::year{y}, std::chrono::month{m},
                                         std::chrono::day{d}}) {}

  static Date parse(std::string_view text) {
    int y = 0;
    unsigned m = 0, d = 0;
    char tail = 0;
    const std::string s(text);
    if (s.size() != 10 || s[4] != '-' || s[7] != '-' ||
        std::sscanf(s.c_str(), "%4d-%2u-%2u%c", &y, &m, &d, &tail) != 3)
      throw ParseError("malformed date '" + s + "' (expected YYYY-MM-DD)");
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                          std::chrono::day{d}};
    if (!ymd.ok()) throw ParseError("invalid calendar date '" + s + "'");
    return Date(ymd);
  }

  std::string str() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", int(ymd_.year()), unsigned(ymd_.month()),
                  unsigned(ymd_.day()));
    return buf;
  }

  Date plus_days(int n) const {
    return Date(std::chrono::year_month_day{std::chrono::sys_days{ymd_} + std::chrono::days{n}});
  }

  int days_since_epoch() const {
    return static_cast<int>(std::chrono::sys_days{ymd_}.time_since_epoch().count());
  }

  auto operator<=>(const Date &) const = default;

private:
  std::chrono::year_month_day ymd_{std::chrono::year{1970}, std::chrono::month{1},
                                   std::chrono::day{1}};
};

/// splitmix64 finalizer; used to derive independent RNG streams.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) {
  return mix_seed(mix_seed(mix_seed(master) ^ a) ^ b);
}

inline double standard_normal(Rng &rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

inline void fill_normal(Eigen::Ref<Matrix> m, Rng &rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = n(rng);
}

inline bool all_finite(const Eigen::Ref<const Matrix> &m) { return m.allFinite(); }

} // namespace diffcast
