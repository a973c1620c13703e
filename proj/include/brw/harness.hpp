#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "brw/engine.hpp"
#include "brw/numeric.hpp"
#include "brw/offspring.hpp"
#include "brw/stats.hpp"

namespace brw {

/// Threshold functions f(n): "loglog", "sqrt-log", "log^p", each optionally
/// scaled as "c*...". Logarithms are natural.
class FSpec {
 public:
  static FSpec parse(const std::string& text);
  double operator()(double n) const;
  const std::string& text() const noexcept { return text_; }

 private:
  enum class Kind { LogLog, SqrtLog, PowLog };
  std::string text_;
  Kind kind_ = Kind::LogLog;
  double c_ = 1.0;
  double p_ = 1.0;
};

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct ResultCell {
  std::string statistic;
  double n = kNaN, m = kNaN, lambda = kNaN, mu = kNaN;
  std::string param;
  double estimate = 0.0;
  double stderr_ = 0.0;
  std::uint64_t count = 0;
};

struct NamedFit {
  std::string name;
  LinearFit fit;
};

struct Verdict {
  std::string name;
  double value = 0.0;
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  bool pass = false;
  bool heuristic = false;  // reported, not counted in the exit status
  std::string note;
};

struct ExperimentResult {
  std::string name;
  nlohmann::json config;
  std::vector<ResultCell> cells;
  std::vector<NamedFit> fits;
  std::vector<Verdict> verdicts;
  std::vector<std::string> notes;
  /// True when every non-heuristic verdict passes.
  bool pass() const;
  const ResultCell* find(const std::string& statistic, double n, const std::string& param = {}) const;
};

/// Verdict for lo <= value <= hi.
Verdict make_verdict(std::string name, double value, double lo, double hi, bool heuristic = false,
                     std::string note = {});

/// Order-statistic standard error of the p-quantile: half the distance between
/// the order statistics at ranks N p -+ sqrt(N p (1 - p)).
Estimate quantile_estimate(std::vector<double> xs, double p);

struct ExperimentOptions {
  std::uint64_t replicas = 1000;
  std::uint64_t seed = 1;
  PrunePolicy prune;
};

/// Frequencies of {M_n - (1/2) log n < -f(n)} among survivors (Z_n > 0) for
/// each f, of {M_n - (1/2) log n < -lambda} on a lambda grid in [0, (1/3) log n]
/// with its log-linear fit, and medians of M_n - (3/2) log n.
ExperimentResult exp_min_fluctuation(const OffspringLaw& law, const std::vector<int>& n_grid,
                                     const std::vector<FSpec>& f_specs, const ExperimentOptions& opt,
                                     int lambda_points = 6);

/// Distribution of sqrt(n) W_n: quantiles, tail frequencies P(sqrt(n) W_n > f(n)),
/// the pointwise bound sqrt(n) W_n >= sqrt(n) e^{-M_n}, and a log-log tail slope
/// (heuristic).
ExperimentResult exp_additive_upper(const OffspringLaw& law, const std::vector<int>& n_grid,
                                    const std::vector<FSpec>& f_specs, const ExperimentOptions& opt);

/// sqrt(n) W_n - c D_n and |sqrt(n) W_n / D_n - c| with c = sqrt(2/(pi sigma^2)),
/// the running minimum of sqrt(k) W_k / D_k, and the spine variance surrogate
/// against the observed spread. Replicas with D_n <= d_floor are excluded and counted.
ExperimentResult exp_liminf_ratio(const OffspringLaw& law, const std::vector<int>& n_grid,
                                  const ExperimentOptions& opt, double d_floor = 1e-3,
                                  std::uint64_t spine_replicas = 2000);

/// P(A(n, lambda) and A(m, mu)), the marginals and their product, against the
/// shape e^{-lambda-mu} + e^{-mu} log n / sqrt(n). Requires m >= 4n.
ExperimentResult exp_pair_correlation(const OffspringLaw& law, int n, int m, double lambda, double mu,
                                      const ExperimentOptions& opt, double K = 10.0);

/// Frequencies of A(n, lambda) over a lambda grid in [0, (1/3) log n] and the
/// slope of log-frequency on lambda.
ExperimentResult exp_event_scaling(const OffspringLaw& law, const std::vector<int>& n_grid,
                                   const ExperimentOptions& opt, int lambda_points = 5,
                                   double K = 10.0);

/// Runs by name: min-fluct, additive-upper, liminf-ratio, pair-corr, event-scaling.
std::vector<std::string> experiment_names();

/// CSV rows (with header) for the cells; numbers with 17 significant digits.
std::string cells_csv(const ExperimentResult& r);
nlohmann::json verdict_json(const ExperimentResult& r);

}  // namespace brw
