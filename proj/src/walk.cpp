#include "brw/walk.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>

#include <Eigen/Dense>

#include "brw/error.hpp"
#include "brw/numeric.hpp"
#include "brw/parallel.hpp"

namespace brw {

namespace {

constexpr double kIndexEps = 1e-7;  // slack when mapping reals to lattice indices

std::int64_t floor_index(double x, double h) {
  return static_cast<std::int64_t>(std::floor(x / h + kIndexEps));
}
std::int64_t ceil_index(double x, double h) {
  return static_cast<std::int64_t>(std::ceil(x / h - kIndexEps));
}

void require_centered(const StepLaw& step) {
  const double scale = std::sqrt(std::max(step.variance, 1e-300));
  if (std::abs(step.mean) > 1e-9 * std::max(1.0, scale)) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "step law has drift " << step.mean << "; the walk must be centered";
    throw PreconditionError(msg.str());
  }
}

// Mass of a lattice walk killed when its index drops below `kill_below`.
// Index j of `mass` is the state j; the vector grows by `up` per step.
void advance(const LatticeStep& s, std::vector<double>& mass, std::vector<double>& scratch,
             std::int64_t kill_below) {
  scratch.assign(mass.size() + static_cast<std::size_t>(s.up), 0.0);
  const auto size = static_cast<std::int64_t>(mass.size());
  for (std::size_t i = 0; i < s.off.size(); ++i) {
    const int o = s.off[i];
    const double p = s.p[i];
    const std::int64_t lo = std::max<std::int64_t>(0, kill_below - o);
    for (std::int64_t j = lo; j < size; ++j) scratch[static_cast<std::size_t>(j + o)] += p * mass[static_cast<std::size_t>(j)];
  }
  mass.swap(scratch);
}

double total(const std::vector<double>& v) {
  NeumaierSum s;
  for (double x : v) s += x;
  return s.value();
}

LatticeStep mirrored(const LatticeStep& s) {
  LatticeStep m = s;
  for (auto& o : m.off) o = -o;
  std::swap(m.down, m.up);
  return m;
}

std::vector<double> ladder_heights(const LatticeStep& s) {
  const int d = s.down, u = s.up;
  if (d == 1) return {1.0};
  // z^d (1 - phi(z)) has a double root at 1, d - 1 roots inside the unit disk
  // and u - 1 outside. The inner roots and 1 are the zeros of z^d - sum q_i z^{d-i}.
  std::vector<double> a(static_cast<std::size_t>(d + u + 1), 0.0);
  a[static_cast<std::size_t>(d)] += 1.0;
  for (std::size_t i = 0; i < s.off.size(); ++i) a[static_cast<std::size_t>(s.off[i] + d)] -= s.p[i];
  for (int pass = 0; pass < 2; ++pass) {
    const std::size_t deg = a.size() - 1;
    std::vector<double> b(deg, 0.0);
    b[deg - 1] = a[deg];
    for (std::size_t i = deg - 1; i >= 1; --i) b[i - 1] = a[i] + b[i];
    a.swap(b);
  }
  const int m = static_cast<int>(a.size()) - 1;
  std::vector<std::complex<double>> inner;
  if (m >= 1) {
    Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(m, m);
    for (int i = 1; i < m; ++i) comp(i, i - 1) = 1.0;
    for (int i = 0; i < m; ++i) comp(i, m - 1) = -a[static_cast<std::size_t>(i)] / a[static_cast<std::size_t>(m)];
    Eigen::EigenSolver<Eigen::MatrixXd> es(comp, false);
    if (es.info() != Eigen::Success) throw ConvergenceError("ladder-height root finding failed", 1.0);
    for (int i = 0; i < m; ++i) {
      const auto z = es.eigenvalues()[i];
      if (std::abs(z) < 1.0 - 1e-9) inner.push_back(z);
    }
  }
  if (static_cast<int>(inner.size()) != d - 1) {
    throw ConvergenceError("ladder-height factorization found " + std::to_string(inner.size()) +
                               " roots inside the unit disk, expected " + std::to_string(d - 1),
                           std::abs(static_cast<double>(inner.size()) - (d - 1)));
  }
  inner.emplace_back(1.0, 0.0);
  std::vector<std::complex<double>> poly{1.0};  // ascending powers
  for (const auto& r : inner) {
    std::vector<std::complex<double>> next(poly.size() + 1, 0.0);
    for (std::size_t i = 0; i < poly.size(); ++i) {
      next[i + 1] += poly[i];
      next[i] -= r * poly[i];
    }
    poly.swap(next);
  }
  std::vector<double> q(static_cast<std::size_t>(d));
  NeumaierSum sum;
  for (int i = 1; i <= d; ++i) {
    double v = -poly[static_cast<std::size_t>(d - i)].real();
    if (v < 0.0 && v > -1e-12) v = 0.0;
    if (v < 0.0) throw ConvergenceError("negative ladder-height probability", -v);
    q[static_cast<std::size_t>(i - 1)] = v;
    sum += v;
  }
  if (std::abs(sum.value() - 1.0) > 1e-9) {
    throw ConvergenceError("ladder-height law does not sum to 1", std::abs(sum.value() - 1.0));
  }
  for (auto& v : q) v /= sum.value();
  return q;
}

}  // namespace

StepLaw derive_step_law(const OffspringLaw& law, double tol) {
  const auto rep = check_boundary(law, tol);
  if (std::abs(rep.exp_mass - 1.0) > tol) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "exp_mass = " << rep.exp_mass << " != 1; the tilted step law is not a probability";
    throw PreconditionError(msg.str());
  }
  std::vector<std::pair<double, double>> raw;
  for (const auto& a : law.atoms()) {
    for (double c : a.children) {
      if (a.prob > 0.0) raw.emplace_back(c, a.prob * std::exp(-c));
    }
  }
  std::sort(raw.begin(), raw.end());
  StepLaw s;
  for (const auto& [x, w] : raw) {
    if (!s.support.empty() && std::abs(s.support.back().first - x) <= 1e-9 * (1.0 + std::abs(x))) {
      s.support.back().second += w;
    } else {
      s.support.emplace_back(x, w);
    }
  }
  NeumaierSum mass, m1, m2;
  for (const auto& [x, w] : s.support) mass += w;
  for (auto& [x, w] : s.support) {
    w /= mass.value();
    m1 += x * w;
    m2 += x * x * w;
  }
  s.mean = m1.value();
  s.variance = m2.value() - s.mean * s.mean;
  std::vector<double> values;
  for (const auto& [x, w] : s.support) values.push_back(x);
  s.lattice_span = lattice_span(values);
  return s;
}

LatticeStep lattice_step(const StepLaw& step) {
  if (!step.lattice_span) throw PreconditionError("step law is not lattice");
  LatticeStep ls;
  ls.h = *step.lattice_span;
  for (const auto& [x, p] : step.support) {
    const int o = static_cast<int>(std::llround(x / ls.h));
    ls.off.push_back(o);
    ls.p.push_back(p);
    ls.down = std::max(ls.down, -o);
    ls.up = std::max(ls.up, o);
  }
  return ls;
}

Renewal Renewal::lattice(const StepLaw& step, double max_x) {
  require_centered(step);
  const LatticeStep ls = lattice_step(step);
  if (ls.down == 0 || ls.up == 0) throw PreconditionError("lattice walk cannot move both ways");
  Renewal r;
  r.exact_ = true;
  r.h_ = ls.h;
  r.max_x_ = std::max(0.0, max_x);
  r.ladder_ = ladder_heights(ls);
  double mean_h = 0.0;
  for (std::size_t i = 0; i < r.ladder_.size(); ++i) mean_h += static_cast<double>(i + 1) * r.ladder_[i];
  r.c_R_ = 1.0 / (mean_h * ls.h);
  const auto n = static_cast<std::size_t>(floor_index(r.max_x_, ls.h)) + 1;
  std::vector<double> dens(n, 0.0);
  r.cumulative_.assign(n, 0.0);
  dens[0] = 1.0;
  double acc = 1.0;
  r.cumulative_[0] = 1.0;
  for (std::size_t t = 1; t < n; ++t) {
    double v = 0.0;
    for (std::size_t i = 1; i <= r.ladder_.size() && i <= t; ++i) v += r.ladder_[i - 1] * dens[t - i];
    dens[t] = v;
    acc += v;
    r.cumulative_[t] = acc;
  }
  return r;
}

Renewal Renewal::tabulated(std::vector<double> grid, std::vector<double> values) {
  if (grid.size() != values.size() || grid.empty()) {
    throw ValidationError("renewal table: grid and values must be non-empty and of equal size");
  }
  if (grid.front() > 0.0) {
    grid.insert(grid.begin(), 0.0);
    values.insert(values.begin(), 1.0);
  }
  Renewal r;
  r.exact_ = false;
  r.max_x_ = grid.back();
  r.grid_ = std::move(grid);
  r.cumulative_ = std::move(values);
  if (r.grid_.size() >= 2) {
    const auto fit = fit_line(std::span(r.grid_).subspan(r.grid_.size() / 2),
                              std::span(r.cumulative_).subspan(r.grid_.size() / 2));
    r.c_R_ = fit.slope;
  }
  return r;
}

double Renewal::operator()(double x) const {
  if (exact_) {
    const std::int64_t j = floor_index(x, h_);
    if (j < 0) return 0.0;
    if (static_cast<std::size_t>(j) >= cumulative_.size()) {
      throw DomainError("renewal function requested at x = " + std::to_string(x) +
                        " beyond the tabulated range " + std::to_string(max_x_));
    }
    return cumulative_[static_cast<std::size_t>(j)];
  }
  if (x < 0.0) return 0.0;
  if (x > max_x_ * (1.0 + 1e-12)) {
    throw DomainError("renewal function requested at x = " + std::to_string(x) +
                      " beyond the tabulated range " + std::to_string(max_x_));
  }
  const auto it = std::upper_bound(grid_.begin(), grid_.end(), x);
  if (it == grid_.end()) return cumulative_.back();
  const auto i = static_cast<std::size_t>(it - grid_.begin());
  if (i == 0) return cumulative_.front();
  const double t = (x - grid_[i - 1]) / (grid_[i] - grid_[i - 1]);
  return cumulative_[i - 1] + t * (cumulative_[i] - cumulative_[i - 1]);
}

namespace {

std::size_t sample_index(const std::vector<double>& cumulative, Stream& rng) {
  const double u = uniform01(rng);
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  return it == cumulative.end() ? cumulative.size() - 1 : static_cast<std::size_t>(it - cumulative.begin());
}

std::vector<double> cumulative_of(const StepLaw& step) {
  std::vector<double> c;
  double acc = 0.0;
  for (const auto& [x, p] : step.support) c.push_back(acc += p);
  c.back() = 1.0;
  return c;
}

struct GridAccum {
  std::vector<RunningStats> count;
  std::vector<std::uint64_t> unreached;
};

RenewalTable renewal_monte_carlo(const StepLaw& step, const std::vector<double>& grid,
                                 std::int64_t horizon, const RenewalOptions& opts) {
  const auto cum = cumulative_of(step);
  const std::size_t g = grid.size();
  GridAccum init{std::vector<RunningStats>(g), std::vector<std::uint64_t>(g, 0)};
  auto acc = parallel_blocks(
      opts.replicas, 256, init,
      [&](std::size_t lo, std::size_t hi) {
        GridAccum part{std::vector<RunningStats>(g), std::vector<std::uint64_t>(g, 0)};
        std::vector<double> diff(g + 1);
        for (std::size_t rep = lo; rep < hi; ++rep) {
          Stream rng = make_stream(opts.seed, rep);
          std::fill(diff.begin(), diff.end(), 0.0);
          double pos = 0.0, low = 0.0;
          for (std::int64_t k = 0; k < horizon; ++k) {
            pos += step.support[sample_index(cum, rng)].first;
            if (pos < low) {
              low = pos;
              const auto i = static_cast<std::size_t>(std::lower_bound(grid.begin(), grid.end(), -pos) - grid.begin());
              diff[i] += 1.0;
            }
          }
          double run = 1.0;
          for (std::size_t i = 0; i < g; ++i) {
            run += diff[i];
            part.count[i].add(run);
            if (low >= -grid[i]) ++part.unreached[i];
          }
        }
        return part;
      },
      [](GridAccum& a, const GridAccum& b) {
        for (std::size_t i = 0; i < a.count.size(); ++i) {
          a.count[i].merge(b.count[i]);
          a.unreached[i] += b.unreached[i];
        }
      });
  RenewalTable t;
  t.grid = grid;
  t.horizon = horizon;
  t.exact = false;
  for (std::size_t i = 0; i < g; ++i) {
    t.values.push_back(acc.count[i].mean());
    t.stderr_.push_back(acc.count[i].stderr_mean());
    const double frac = static_cast<double>(acc.unreached[i]) / static_cast<double>(opts.replicas);
    t.tail_bound = std::max(t.tail_bound, t.values.back() * frac);
  }
  return t;
}

}  // namespace

RenewalTable renewal_function(const StepLaw& step, const std::vector<double>& grid,
                              std::int64_t horizon, const RenewalOptions& opts) {
  require_centered(step);
  if (horizon < 1) throw PreconditionError("renewal_function: horizon must be >= 1");
  if (grid.empty()) throw ValidationError("renewal_function: empty grid");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] < 0.0 || (i > 0 && grid[i] <= grid[i - 1])) {
      throw ValidationError("renewal_function: grid must be increasing and nonnegative");
    }
  }
  RenewalTable t;
  if (!step.lattice_span) {
    if (opts.replicas < 2) throw PreconditionError("renewal_function: need at least 2 replicas");
    t = renewal_monte_carlo(step, grid, horizon, opts);
  } else {
    const Renewal r = Renewal::lattice(step, grid.back());
    const double h = r.span();
    const std::int64_t top = floor_index(grid.back(), h);
    t.grid = grid;
    t.horizon = horizon;
    t.stderr_.assign(grid.size(), 0.0);
    if (horizon >= top) {
      for (double x : grid) t.values.push_back(r(x));
    } else {
      // Law of the sum of the first m ladder heights, for m = 0..horizon.
      const auto& q = r.ladder_pmf();
      const auto n = static_cast<std::size_t>(top) + 1;
      std::vector<double> dist(n, 0.0), next(n), kept(n, 0.0);
      dist[0] = 1.0;
      for (std::int64_t m = 0; m <= horizon; ++m) {
        for (std::size_t j = 0; j < n; ++j) kept[j] += dist[j];
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t j = 0; j < n; ++j) {
          for (std::size_t i = 1; i <= q.size() && j + i < n; ++i) next[j + i] += dist[j] * q[i - 1];
        }
        dist.swap(next);
      }
      std::vector<double> cum(n);
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) cum[j] = acc += kept[j];
      for (double x : grid) {
        const double v = cum[static_cast<std::size_t>(floor_index(x, h))];
        t.values.push_back(v);
        t.tail_bound = std::max(t.tail_bound, r(x) - v);
      }
    }
  }
  if (grid.size() >= 2) {
    const std::size_t from = grid.size() >= 4 ? grid.size() / 2 : 0;
    t.c_R_estimate = fit_line(std::span(t.grid).subspan(from), std::span(t.values).subspan(from)).slope;
  } else if (step.lattice_span) {
    t.c_R_estimate = Renewal::lattice(step, 0.0).c_R();
  }
  return t;
}

std::vector<double> survival_curve(const LatticeStep& step, double x, std::int64_t n) {
  std::vector<double> curve(static_cast<std::size_t>(n) + 1, 0.0);
  if (x < 0.0) return curve;
  const std::int64_t m0 = floor_index(x, step.h);
  std::vector<double> mass(static_cast<std::size_t>(m0) + 1, 0.0), scratch;
  mass.back() = 1.0;
  curve[0] = 1.0;
  for (std::int64_t k = 1; k <= n; ++k) {
    advance(step, mass, scratch, 0);
    curve[static_cast<std::size_t>(k)] = total(mass);
  }
  return curve;
}

Estimate survival_prob(const StepLaw& step, double x, std::int64_t n, double barrier,
                       const SurvivalOptions& opts) {
  if (n < 0) throw PreconditionError("survival_prob: n must be >= 0");
  if (step.lattice_span) {
    const auto curve = survival_curve(lattice_step(step), x - barrier, n);
    return {curve.back(), 0.0, 1};
  }
  const auto cum = cumulative_of(step);
  auto acc = parallel_blocks(
      opts.replicas, 1024, RunningStats{},
      [&](std::size_t lo, std::size_t hi) {
        RunningStats part;
        for (std::size_t rep = lo; rep < hi; ++rep) {
          Stream rng = make_stream(opts.seed, rep);
          double pos = x;
          bool alive = pos >= barrier;
          for (std::int64_t k = 0; k < n && alive; ++k) {
            pos += step.support[sample_index(cum, rng)].first;
            alive = pos >= barrier;
          }
          part.add(alive ? 1.0 : 0.0);
        }
        return part;
      },
      [](RunningStats& a, const RunningStats& b) { a.merge(b); });
  return acc.estimate();
}

std::vector<std::pair<double, double>> conditioned_kernel(const StepLaw& step,
                                                          const Renewal& renewal, double alpha,
                                                          double x) {
  if (x < -alpha - 1e-12) throw PreconditionError("conditioned_step: start below the barrier");
  std::vector<std::pair<double, double>> out;
  NeumaierSum mass;
  for (const auto& [v, p] : step.support) {
    const double y = x + v;
    if (y < -alpha - kIndexEps * (renewal.exact() ? renewal.span() : 1.0)) continue;
    const double w = p * renewal(alpha + y);
    if (w > 0.0) {
      out.emplace_back(y, w);
      mass += w;
    }
  }
  if (!(mass.value() > 0.0)) throw DomainError("conditioned_step: no admissible successor");
  for (auto& [y, w] : out) w /= mass.value();
  return out;
}

double conditioned_step(const StepLaw& step, const Renewal& renewal, double alpha, double x,
                        Stream& rng) {
  const auto k = conditioned_kernel(step, renewal, alpha, x);
  double u = uniform01(rng);
  for (const auto& [y, p] : k) {
    if (u < p) return y;
    u -= p;
  }
  return k.back().first;
}

std::map<std::int64_t, double> conditioned_marginal(const StepLaw& step, const Renewal& renewal,
                                                    double alpha, double x, int n) {
  const LatticeStep ls = lattice_step(step);
  const double h = ls.h;
  if (std::abs(x / h - std::round(x / h)) > kIndexEps) throw PreconditionError("start off the lattice");
  std::map<std::int64_t, double> cur{{std::llround(x / h), 1.0}};
  for (int k = 0; k < n; ++k) {
    std::map<std::int64_t, double> next;
    for (const auto& [site, p] : cur) {
      for (const auto& [y, q] : conditioned_kernel(step, renewal, alpha, static_cast<double>(site) * h)) {
        next[std::llround(y / h)] += p * q;
      }
    }
    cur.swap(next);
  }
  return cur;
}

std::map<std::int64_t, double> h_transform_marginal(const StepLaw& step, const Renewal& renewal,
                                                    double alpha, double x, int n) {
  const LatticeStep ls = lattice_step(step);
  const double h = ls.h;
  if (std::abs(x / h - std::round(x / h)) > kIndexEps) throw PreconditionError("start off the lattice");
  const std::int64_t kmin = ceil_index(-alpha, h);
  const std::int64_t start = std::llround(x / h);
  if (start < kmin) throw PreconditionError("start below the barrier");
  std::vector<double> mass(static_cast<std::size_t>(start - kmin) + 1, 0.0), scratch;
  mass.back() = 1.0;
  for (int k = 0; k < n; ++k) advance(ls, mass, scratch, 0);
  const double norm = renewal(alpha + x);
  std::map<std::int64_t, double> out;
  for (std::size_t j = 0; j < mass.size(); ++j) {
    if (mass[j] == 0.0) continue;
    const std::int64_t site = kmin + static_cast<std::int64_t>(j);
    const double w = mass[j] * renewal(alpha + static_cast<double>(site) * h) / norm;
    if (w > 0.0) out[site] = w;
  }
  return out;
}

double h_function(const StepLaw& step, const Renewal& renewal, double x, std::int64_t j) {
  if (x < 0.0) throw DomainError("h_function: x must be >= 0");
  if (j < 1) throw DomainError("h_function: j must be >= 1");
  const double r = renewal(x);
  if (r == 0.0) throw DomainError("h_function: R(x) = 0");
  return std::sqrt(static_cast<double>(j)) * survival_prob(step, x, j).value / r;
}

std::optional<EstimateSpec> parse_estimate_spec(const std::string& name) {
  if (name == "F1") return EstimateSpec::F1;
  if (name == "AJ") return EstimateSpec::AJ;
  if (name == "K1") return EstimateSpec::K1;
  if (name == "AS1") return EstimateSpec::AS1;
  if (name == "AS2") return EstimateSpec::AS2;
  if (name == "L22") return EstimateSpec::L22;
  if (name == "EPPEL") return EstimateSpec::EPPEL;
  return std::nullopt;
}

std::string to_string(EstimateSpec spec) {
  switch (spec) {
    case EstimateSpec::F1: return "F1";
    case EstimateSpec::AJ: return "AJ";
    case EstimateSpec::K1: return "K1";
    case EstimateSpec::AS1: return "AS1";
    case EstimateSpec::AS2: return "AS2";
    case EstimateSpec::L22: return "L22";
    case EstimateSpec::EPPEL: return "EPPEL";
  }
  return "?";
}

EstimateReport check_estimates(const StepLaw& step, const Renewal& renewal, EstimateSpec spec,
                               const EstimateParams& params, std::size_t max_states) {
  require_centered(step);
  const LatticeStep ls = lattice_step(step);
  const double h = ls.h;
  EstimateReport rep;
  rep.spec = spec;
  std::int64_t nmax = 0;
  for (auto n : params.ns) {
    if (n < 1) throw PreconditionError("check_estimates: n must be >= 1");
    nmax = std::max(nmax, n);
  }
  double xmax = 0.0;
  for (double x : params.xs) {
    if (x < 0.0) throw PreconditionError("check_estimates: x must be >= 0");
    xmax = std::max(xmax, x);
  }
  std::vector<std::int64_t> ks = params.ks;
  if (spec == EstimateSpec::EPPEL && ks.empty()) {
    for (std::int64_t k = 1; k <= nmax; ++k) ks.push_back(k);
  }
  for (auto k : ks) nmax = std::max(nmax, k);
  const double need = static_cast<double>(floor_index(xmax + params.y + params.b, h)) +
                      static_cast<double>(nmax) * std::max(ls.up, ls.down) + 1.0;
  if (need > static_cast<double>(max_states)) {
    std::ostringstream msg;
    msg << "DP window of " << need << " states exceeds the budget of " << max_states
        << "; split the (x, n) range into smaller pieces";
    throw BudgetError(msg.str(), need);
  }

  auto push = [&](double x, std::int64_t n, double lhs, double rhs) {
    const double ratio = rhs != 0.0 ? lhs / rhs : 0.0;
    rep.rows.push_back({x, n, lhs, rhs, ratio});
    rep.sup_ratio = std::max(rep.sup_ratio, ratio);
  };
  auto sorted_ns = params.ns;
  std::sort(sorted_ns.begin(), sorted_ns.end());
  const double theta = std::sqrt(2.0 / (std::numbers::pi * step.variance)) /
                       (renewal.exact() ? renewal.c_R() : 1.0);

  switch (spec) {
    case EstimateSpec::F1:
    case EstimateSpec::K1:
    case EstimateSpec::L22: {
      std::vector<double> base;
      if (spec == EstimateSpec::L22) base = survival_curve(ls, 0.0, nmax);
      for (double x : params.xs) {
        const auto curve = survival_curve(ls, x, nmax);
        for (auto n : sorted_ns) {
          const double p = curve[static_cast<std::size_t>(n)];
          const double sn = std::sqrt(static_cast<double>(n));
          if (spec == EstimateSpec::F1) {
            push(x, n, p, (1.0 + x) / sn);
          } else if (spec == EstimateSpec::K1) {
            push(x, n, sn * p / renewal(x), theta);
          } else {
            const double lhs = std::abs(p / (renewal(x) * base[static_cast<std::size_t>(n)]) - 1.0);
            push(x, n, lhs, (1.0 + x) / sn);
          }
        }
      }
      break;
    }
    case EstimateSpec::AJ: {
      // Time reversal: P_x(min_{i<n} S_i > S_n >= 0) = P(S'_1..S'_n < 0, S'_n >= -x).
      const LatticeStep rev = mirrored(ls);
      std::vector<double> mass{1.0}, scratch;
      std::size_t next = 0;
      for (std::int64_t k = 1; k <= nmax && next < sorted_ns.size(); ++k) {
        advance(rev, mass, scratch, 1);
        while (next < sorted_ns.size() && sorted_ns[next] == k) {
          for (double x : params.xs) {
            NeumaierSum s;
            const std::int64_t top = std::min<std::int64_t>(floor_index(x, h), static_cast<std::int64_t>(mass.size()) - 1);
            for (std::int64_t j = 1; j <= top; ++j) s += mass[static_cast<std::size_t>(j)];
            push(x, k, s.value(), (1.0 + x) * renewal(x) * std::pow(static_cast<double>(k), -1.5));
          }
          ++next;
        }
      }
      break;
    }
    case EstimateSpec::AS1:
    case EstimateSpec::AS2: {
      if (params.b < params.a || params.a < 0.0) throw PreconditionError("check_estimates: need b >= a >= 0");
      const bool two = spec == EstimateSpec::AS2;
      if (two && !(params.r > 0.0 && params.r < 1.0)) throw PreconditionError("check_estimates: need 0 < r < 1");
      for (double x : params.xs) {
        for (auto n : sorted_ns) {
          const std::int64_t m0 = floor_index(x, h);
          std::vector<double> mass(static_cast<std::size_t>(m0) + 1, 0.0), scratch;
          mass.back() = 1.0;
          const auto from = static_cast<std::int64_t>(std::ceil(params.r * static_cast<double>(n)));
          // index j is the position x + (j - m0) h
          const std::int64_t ykill = std::max<std::int64_t>(0, m0 + ceil_index(params.y - x, h));
          for (std::int64_t k = 1; k <= n; ++k) advance(ls, mass, scratch, two && k >= from ? ykill : 0);
          const double lo = (two ? params.y : 0.0) + params.a;
          const double hi = (two ? params.y : 0.0) + params.b;
          NeumaierSum s;
          for (std::size_t j = 0; j < mass.size(); ++j) {
            const double pos = x + (static_cast<double>(j) - static_cast<double>(m0)) * h;
            if (pos >= lo - kIndexEps * h && pos <= hi + kIndexEps * h) s += mass[j];
          }
          const double rhs = (1.0 + x) * (1.0 + params.b - params.a) * (1.0 + params.b) *
                             std::pow(static_cast<double>(n), -1.5);
          push(x, n, s.value(), rhs);
        }
      }
      break;
    }
    case EstimateSpec::EPPEL: {
      const auto curve = survival_curve(ls, 0.0, nmax);
      for (auto k : ks) {
        if (k < 1) throw PreconditionError("check_estimates: k must be >= 1");
        const double p = curve[static_cast<std::size_t>(k - 1)] - curve[static_cast<std::size_t>(k)];
        push(0.0, k, p, std::pow(static_cast<double>(k), -1.5));
      }
      break;
    }
  }
  return rep;
}

}  // namespace brw
