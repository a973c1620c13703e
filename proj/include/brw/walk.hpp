#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "brw/offspring.hpp"
#include "brw/rng.hpp"
#include "brw/stats.hpp"

namespace brw {

/// Step distribution of the many-to-one walk: P(S_1 = x) = E[sum e^{-V(u)} 1{V(u) = x}].
struct StepLaw {
  std::vector<std::pair<double, double>> support;  // (value, prob), increasing values
  double mean = 0.0;
  double variance = 0.0;
  std::optional<double> lattice_span;
};

/// Throws PreconditionError carrying exp_mass when the law is not mass-normalized.
StepLaw derive_step_law(const OffspringLaw& law, double tol = 1e-10);

/// Integer view of a lattice step law: S_1 = h * off[i] with probability p[i].
struct LatticeStep {
  double h = 1.0;
  std::vector<int> off;
  std::vector<double> p;
  int down = 0;  // -min(off), at least 0
  int up = 0;    // max(off), at least 0
};

/// Throws PreconditionError for non-lattice laws.
LatticeStep lattice_step(const StepLaw& step);

/// Renewal function R of the strict descending ladder heights, R(x) = 0 for x < 0.
/// Lattice laws are exact (Wiener-Hopf factorization for the ladder-height law).
/// Non-lattice laws use a tabulated Monte Carlo estimate with linear interpolation.
class Renewal {
 public:
  /// Exact; values available for 0 <= x <= max_x.
  static Renewal lattice(const StepLaw& step, double max_x);
  static Renewal tabulated(std::vector<double> grid, std::vector<double> values);

  /// Throws DomainError for x beyond the tabulated range.
  double operator()(double x) const;
  double max_x() const noexcept { return max_x_; }
  bool exact() const noexcept { return exact_; }
  /// Lattice case: P(H = i h) for i = 1..d, with H the strict descending ladder height.
  const std::vector<double>& ladder_pmf() const noexcept { return ladder_; }
  double span() const noexcept { return h_; }
  /// Lattice case: lim R(x)/x = 1/E[H].
  double c_R() const noexcept { return c_R_; }

 private:
  bool exact_ = false;
  double h_ = 0.0;
  double max_x_ = 0.0;
  double c_R_ = 0.0;
  std::vector<double> ladder_;      // index i-1 holds P(H = i)
  std::vector<double> cumulative_;  // lattice: R(j h); tabulated: values
  std::vector<double> grid_;
};

struct RenewalTable {
  std::vector<double> grid;
  std::vector<double> values;
  std::vector<double> stderr_;  // zero on lattice laws
  std::int64_t horizon = 0;     // ladder epochs kept (lattice) or walk length (Monte Carlo)
  double tail_bound = 0.0;
  double c_R_estimate = 0.0;
  bool exact = true;
};

struct RenewalOptions {
  std::uint64_t replicas = 20000;  // Monte Carlo only
  std::uint64_t seed = 1;
};

/// R(x) on `grid` with the ladder-epoch sum truncated at `horizon`. On lattice
/// laws the omitted mass is computed exactly and reported as `tail_bound`; it
/// vanishes once horizon * span >= max(grid) because each ladder height is at
/// least one span.
RenewalTable renewal_function(const StepLaw& step, const std::vector<double>& grid,
                              std::int64_t horizon, const RenewalOptions& opts = {});

struct SurvivalOptions {
  std::uint64_t replicas = 100000;  // Monte Carlo only
  std::uint64_t seed = 1;
};

/// P_x(min_{0<=i<=n} S_i >= barrier); exact on lattice laws.
Estimate survival_prob(const StepLaw& step, double x, std::int64_t n, double barrier = 0.0,
                       const SurvivalOptions& opts = {});

/// Survival curve P_x(min_{i<=k} S_i >= 0) for k = 0..n on a lattice law.
std::vector<double> survival_curve(const LatticeStep& step, double x, std::int64_t n);

/// One step of the walk conditioned to stay >= -alpha (Doob transform by R_alpha):
/// the list of (next position, probability).
std::vector<std::pair<double, double>> conditioned_kernel(const StepLaw& step,
                                                          const Renewal& renewal,
                                                          double alpha, double x);
double conditioned_step(const StepLaw& step, const Renewal& renewal, double alpha, double x,
                        Stream& rng);

/// n-step law of the conditioned walk by iterating `conditioned_kernel` (lattice laws).
std::map<std::int64_t, double> conditioned_marginal(const StepLaw& step, const Renewal& renewal,
                                                    double alpha, double x, int n);
/// The same law from (1/R_alpha(x)) E_x[1{S_n = y} R_alpha(S_n) 1{min S >= -alpha}]
/// through a killed-walk DP. Keys are lattice indices y/h.
std::map<std::int64_t, double> h_transform_marginal(const StepLaw& step, const Renewal& renewal,
                                                    double alpha, double x, int n);

/// h_x(j) = sqrt(j) P_x(min S_j >= 0) / R(x).
double h_function(const StepLaw& step, const Renewal& renewal, double x, std::int64_t j);

enum class EstimateSpec { F1, AJ, K1, AS1, AS2, L22, EPPEL };
std::optional<EstimateSpec> parse_estimate_spec(const std::string& name);
std::string to_string(EstimateSpec spec);

struct EstimateParams {
  std::vector<double> xs{0.0};
  std::vector<std::int64_t> ns{100};
  std::vector<std::int64_t> ks;  // EPPEL; defaults to 1..max(ns)
  double a = 0.0, b = 1.0, y = 0.0, r = 0.5;
};

struct EstimateRow {
  double x = 0.0;
  std::int64_t n = 0;  // k for EPPEL
  double lhs = 0.0;
  double rhs = 0.0;
  double ratio = 0.0;
};

/// Rows of (lhs, normalizer, ratio) over the requested range and the witnessed
/// sup of the ratio. No constant from the literature is asserted.
struct EstimateReport {
  EstimateSpec spec = EstimateSpec::F1;
  std::vector<EstimateRow> rows;
  double sup_ratio = 0.0;
};

/// Lattice laws only. Throws BudgetError when the DP window would exceed `max_states`.
EstimateReport check_estimates(const StepLaw& step, const Renewal& renewal, EstimateSpec spec,
                               const EstimateParams& params, std::size_t max_states = 50'000'000);

}  // namespace brw
