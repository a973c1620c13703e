#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace brw {

/// Compensated (Neumaier) accumulator.
class NeumaierSum {
 public:
  NeumaierSum() = default;
  explicit NeumaierSum(double init) : sum_(init) {}

  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  NeumaierSum& operator+=(double x) noexcept {
    add(x);
    return *this;
  }
  void merge(const NeumaierSum& other) noexcept {
    add(other.sum_);
    add(other.comp_);
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Largest h > 0 with every value an integer multiple of h (within `tol`).
/// Returns nullopt when all values are zero or no span >= min_span exists.
std::optional<double> lattice_span(std::span<const double> values, double tol = 1e-9,
                                   double min_span = 1e-6);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double r2 = 0.0;
  std::size_t points = 0;
};

/// Ordinary least squares y = intercept + slope * x.
LinearFit fit_line(std::span<const double> xs, std::span<const double> ys);

/// Linear-interpolation quantile (type 7). `values` need not be sorted.
double quantile(std::vector<double> values, double q);
inline double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

/// Decimal with 17 significant digits ("%.17g"); NaN prints as "".
std::string format_number(double x);

/// Spearman rank correlation (average ranks for ties).
double spearman(std::span<const double> xs, std::span<const double> ys);

}  // namespace brw
