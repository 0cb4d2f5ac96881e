#pragma once

// Reference implementations written straight from the textbook definitions,
// independent of the library code they check.

#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

namespace oracle {

struct Hrv {
  double mean_rr, sdnn, rmssd;
  std::size_t nnxx;
  double pnnxx;
  double sd1, sd2;
};

inline Hrv hrv(const std::vector<double>& rr, double xx) {
  const std::size_t n = rr.size();
  long double sum = 0;
  for (double v : rr) sum += v;
  const long double mean = sum / n;
  long double ss = 0;
  for (double v : rr) ss += (v - mean) * (v - mean);
  long double sq = 0;
  std::size_t nn = 0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const long double d = static_cast<long double>(rr[i + 1]) - rr[i];
    sq += d * d;
    if (std::fabs(static_cast<double>(d)) > xx) ++nn;
  }
  // Poincare: rotate every (x, y) = (rr_i, rr_i+1) by 45 degrees and take
  // population standard deviations along both new axes.
  std::vector<long double> minor, major;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    minor.push_back((static_cast<long double>(rr[i + 1]) - rr[i]) / std::sqrt(2.0L));
    major.push_back((static_cast<long double>(rr[i + 1]) + rr[i]) / std::sqrt(2.0L));
  }
  auto pstd = [](const std::vector<long double>& v) {
    long double m = 0;
    for (auto x : v) m += x;
    m /= v.size();
    long double s = 0;
    for (auto x : v) s += (x - m) * (x - m);
    return static_cast<double>(std::sqrt(s / v.size()));
  };
  return {static_cast<double>(mean),
          static_cast<double>(std::sqrt(ss / n)),
          static_cast<double>(std::sqrt(sq / (n - 1))),
          nn,
          100.0 * static_cast<double>(nn) / static_cast<double>(n - 1),
          pstd(minor),
          pstd(major)};
}

struct G {
  long long t_ms;
  double g;
};

// Fall oracle: split the trace into maximal runs below `low`. A run starting
// after an idle period is a dip; the dip's earliest minimum fixes the clock.
// The fall counts when some later sample rises strictly above `high` no more
// than recovery_ms after that minimum, before another dip has started (a new
// dip can only start once the signal is back above `high` after a dip).
inline std::size_t count_falls(const std::vector<G>& s, double low, double high, long long recovery_ms) {
  std::size_t falls = 0;
  std::size_t i = 0;
  while (i < s.size()) {
    if (!(s[i].g < low)) {
      ++i;
      continue;
    }
    // Dip segment: from the first low sample until g exceeds `high`.
    std::size_t j = i;
    std::size_t min_at = i;
    std::optional<std::size_t> rise;
    for (; j < s.size(); ++j) {
      if (s[j].g > high) {
        rise = j;
        break;
      }
      if (s[j].g < s[min_at].g) min_at = j;
    }
    if (!rise) break;
    if (s[*rise].t_ms - s[min_at].t_ms <= recovery_ms) ++falls;
    // Skip the impact: the next dip needs the signal to come back down below
    // low after first returning to <= high.
    std::size_t k = *rise;
    while (k < s.size() && s[k].g > high) ++k;
    i = k;
  }
  return falls;
}

}  // namespace oracle
