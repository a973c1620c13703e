#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>

namespace brw {

struct Estimate {
  double value = 0.0;
  double stderr_ = 0.0;
  std::uint64_t count = 0;
};

/// Welford accumulator with pairwise merge (Chan et al.).
class RunningStats {
 public:
  void add(double x) noexcept {
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
  }
  void merge(const RunningStats& o) noexcept {
    if (o.n_ == 0) return;
    if (n_ == 0) {
      *this = o;
      return;
    }
    const double na = static_cast<double>(n_), nb = static_cast<double>(o.n_);
    const double d = o.mean_ - mean_;
    const double n = na + nb;
    mean_ += d * nb / n;
    m2_ += o.m2_ + d * d * na * nb / n;
    n_ += o.n_;
  }
  std::uint64_t count() const noexcept { return n_; }
  double mean() const noexcept { return n_ ? mean_ : std::numeric_limits<double>::quiet_NaN(); }
  double variance() const noexcept {
    return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0;
  }
  double stderr_mean() const noexcept {
    return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
  }
  Estimate estimate() const noexcept { return {mean(), stderr_mean(), n_}; }

 private:
  std::uint64_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

struct TvCheck {
  double tv = 0.0;
  double se = 0.0;  // (1/2) sum_site sqrt(p (1 - p) / n)
};

/// Total variation between empirical counts over n draws and an exact law.
inline TvCheck tv_check(const std::map<std::int64_t, double>& exact,
                        const std::map<std::int64_t, double>& counts, double n) {
  TvCheck out;
  for (const auto& [site, p] : exact) {
    const auto it = counts.find(site);
    out.tv += std::abs((it == counts.end() ? 0.0 : it->second) / n - p);
    out.se += std::sqrt(p * (1.0 - p) / n);
  }
  for (const auto& [site, c] : counts)
    if (!exact.count(site)) out.tv += c / n;
  out.tv *= 0.5;
  out.se *= 0.5;
  return out;
}

}  // namespace brw
