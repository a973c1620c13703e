#include "brw/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <optional>
#include <regex>
#include <sstream>

#include "brw/error.hpp"
#include "brw/oracle.hpp"
#include "brw/parallel.hpp"
#include "brw/rng.hpp"
#include "brw/spine.hpp"

namespace brw {

FSpec FSpec::parse(const std::string& text) {
  static const std::regex re(R"(^\s*(?:([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*\*\s*)?(loglog|sqrt-log|log\^([0-9]*\.?[0-9]+))\s*$)");
  std::smatch m;
  if (!std::regex_match(text, m, re))
    throw ValidationError("f-spec '" + text + "': expected [c*]loglog, [c*]sqrt-log or [c*]log^p");
  FSpec f;
  f.text_ = text;
  if (m[1].matched) f.c_ = std::stod(m[1].str());
  if (!(f.c_ > 0.0)) throw ValidationError("f-spec '" + text + "': scale must be positive");
  const std::string kind = m[2].str();
  if (kind == "loglog") {
    f.kind_ = Kind::LogLog;
  } else if (kind == "sqrt-log") {
    f.kind_ = Kind::SqrtLog;
  } else {
    f.kind_ = Kind::PowLog;
    f.p_ = std::stod(m[3].str());
  }
  return f;
}

double FSpec::operator()(double n) const {
  const double l = std::log(n);
  switch (kind_) {
    case Kind::LogLog: return c_ * std::log(l);
    case Kind::SqrtLog: return c_ * std::sqrt(l);
    case Kind::PowLog: return c_ * std::pow(l, p_);
  }
  return 0.0;
}

bool ExperimentResult::pass() const {
  return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.heuristic || v.pass; });
}

const ResultCell* ExperimentResult::find(const std::string& statistic, double n, const std::string& param) const {
  for (const auto& c : cells)
    if (c.statistic == statistic && c.n == n && c.param == param) return &c;
  return nullptr;
}

Verdict make_verdict(std::string name, double value, double lo, double hi, bool heuristic, std::string note) {
  Verdict v;
  v.name = std::move(name);
  v.value = value;
  v.lo = lo;
  v.hi = hi;
  v.pass = value >= lo && value <= hi;
  v.heuristic = heuristic;
  v.note = std::move(note);
  return v;
}

Estimate quantile_estimate(std::vector<double> xs, double p) {
  Estimate e;
  e.count = xs.size();
  if (xs.empty()) {
    e.value = kNaN;
    return e;
  }
  std::sort(xs.begin(), xs.end());
  e.value = quantile(xs, p);
  const double N = static_cast<double>(xs.size());
  const double d = std::sqrt(N * p * (1.0 - p));
  auto at = [&](double rank) {
    const auto i = static_cast<std::size_t>(std::clamp(std::round(rank), 0.0, N - 1.0));
    return xs[i];
  };
  e.stderr_ = 0.5 * (at(N * p + d) - at(N * p - d));
  return e;
}

namespace {

constexpr std::size_t kBlock = 64;

std::string fmt(double x) { return format_number(x); }

template <class T, class F>
std::vector<T> run_replicas(std::uint64_t replicas, F one) {
  return parallel_blocks(
      replicas, kBlock, std::vector<T>{},
      [&](std::size_t lo, std::size_t hi) {
        std::vector<T> v;
        v.reserve(hi - lo);
        for (std::size_t r = lo; r < hi; ++r) v.push_back(one(r));
        return v;
      },
      [](std::vector<T>& a, const std::vector<T>& b) { a.insert(a.end(), b.begin(), b.end()); });
}

ResultCell proportion(std::string statistic, double n, std::string param, double hits, double total) {
  ResultCell c;
  c.statistic = std::move(statistic);
  c.n = n;
  c.param = std::move(param);
  c.count = static_cast<std::uint64_t>(total);
  c.estimate = total > 0 ? hits / total : kNaN;
  c.stderr_ = total > 0 ? std::sqrt(c.estimate * (1.0 - c.estimate) / total) : kNaN;
  return c;
}

ResultCell from_estimate(std::string statistic, double n, std::string param, const Estimate& e) {
  ResultCell c;
  c.statistic = std::move(statistic);
  c.n = n;
  c.param = std::move(param);
  c.estimate = e.value;
  c.stderr_ = e.stderr_;
  c.count = e.count;
  return c;
}

std::vector<double> lambda_grid(int n, int points) {
  std::vector<double> out;
  const double top = std::log(static_cast<double>(n)) / 3.0;
  if (points <= 1) return {0.0};
  for (int i = 0; i < points; ++i) out.push_back(top * i / (points - 1));
  return out;
}

void require_boundary(const OffspringLaw& law) {
  if (!check_boundary(law).boundary) throw PreconditionError("experiment: law '" + law.name() + "' is not in the boundary case");
}

std::string lambda_param(double lambda) { return "lambda=" + fmt(lambda); }

nlohmann::json base_config(const std::string& name, const OffspringLaw& law, const ExperimentOptions& opt) {
  require_boundary(law);
  nlohmann::json j;
  j["experiment"] = name;
  j["law"] = law.name();
  j["replicas"] = opt.replicas;
  j["seed"] = opt.seed;
  j["prune_upper_level"] = std::isfinite(opt.prune.upper_level) ? nlohmann::json(opt.prune.upper_level) : nlohmann::json();
  j["prune_weight_floor"] = opt.prune.weight_floor;
  j["prune_cap"] = opt.prune.cap;
  return j;
}

// Depth records of one replica at the grid depths.
struct GridRecords {
  std::vector<DepthRecord> at;  // index follows the n grid
  std::vector<DepthRecord> all;  // kept only when requested
  bool truncated = false;
};

std::vector<GridRecords> simulate_grid(const OffspringLaw& law, const std::vector<int>& grid,
                                       const ExperimentOptions& opt, bool keep_all) {
  if (grid.empty()) throw PreconditionError("experiment: empty n grid");
  const int nmax = *std::max_element(grid.begin(), grid.end());
  if (*std::min_element(grid.begin(), grid.end()) < 1) throw PreconditionError("experiment: n must be >= 1");
  SimulateOptions so;
  std::optional<Renewal> R;
  if (law.lattice_span()) {
    R = renewal_for_depth(law, nmax, 0.0);
    so.renewal = &*R;
  }
  return run_replicas<GridRecords>(opt.replicas, [&](std::size_t r) {
    auto t = simulate(law, nmax, 0.0, opt.prune, derive_seed(opt.seed, r), so);
    GridRecords g;
    g.truncated = t.truncated;
    for (int n : grid) {
      if (static_cast<std::size_t>(n) < t.records.size()) {
        g.at.push_back(t.records[static_cast<std::size_t>(n)]);
      } else {
        DepthRecord d;
        d.k = n;
        d.extinct = !t.truncated;
        g.at.push_back(d);
      }
    }
    if (keep_all) g.all = std::move(t.records);
    return g;
  });
}

std::uint64_t truncated_count(const std::vector<GridRecords>& reps) {
  std::uint64_t c = 0;
  for (const auto& g : reps) c += g.truncated;
  return c;
}

void note_truncation(ExperimentResult& out, std::uint64_t truncated) {
  if (truncated) {
    out.notes.push_back(std::to_string(truncated) +
                        " replicas hit the population cap; their missing depths count as not surviving");
  }
}

void survival_cells(ExperimentResult& out, const std::vector<GridRecords>& reps, const std::vector<int>& grid) {
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double alive = 0;
    for (const auto& g : reps) alive += g.at[i].Z > 0.0;
    if (alive == 0) {
      throw DomainError("experiment: all " + std::to_string(reps.size()) + " replicas extinct at n = " +
                        std::to_string(grid[i]));
    }
    out.cells.push_back(proportion("survival", grid[i], "Z_n>0", alive, static_cast<double>(reps.size())));
  }
}

}  // namespace

ExperimentResult exp_min_fluctuation(const OffspringLaw& law, const std::vector<int>& n_grid,
                                     const std::vector<FSpec>& f_specs, const ExperimentOptions& opt,
                                     int lambda_points) {
  ExperimentResult out;
  out.name = "min-fluct";
  out.config = base_config(out.name, law, opt);
  out.config["n_grid"] = n_grid;
  for (const auto& f : f_specs) out.config["f_specs"].push_back(f.text());
  out.config["lambda_points"] = lambda_points;
  out.notes.push_back("survival is the finite-n proxy Z_n > 0 for the event that the population never dies out");
  out.notes.push_back("the almost-sure liminf dichotomy is not decided by finite-n frequencies; cells report the finite-n scalings only");

  const auto reps = simulate_grid(law, n_grid, opt, false);
  note_truncation(out, truncated_count(reps));
  survival_cells(out, reps, n_grid);

  std::vector<double> medians, logs;
  int monotone_violations = 0;
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    const double n = n_grid[i];
    const double half = 0.5 * std::log(n);
    std::vector<double> dev, centred;
    for (const auto& g : reps) {
      if (g.at[i].Z <= 0.0 || !g.at[i].M) continue;
      dev.push_back(*g.at[i].M - half);
      centred.push_back(*g.at[i].M - 1.5 * std::log(n));
    }
    const double N = static_cast<double>(dev.size());
    std::vector<std::pair<double, double>> by_f;
    for (const auto& f : f_specs) {
      const double thr = -f(n);
      const double hits = static_cast<double>(std::count_if(dev.begin(), dev.end(), [&](double d) { return d < thr; }));
      out.cells.push_back(proportion("freq_below_minus_f", n, f.text(), hits, N));
      by_f.emplace_back(f(n), hits / N);
    }
    std::sort(by_f.begin(), by_f.end());
    for (std::size_t j = 1; j < by_f.size(); ++j) monotone_violations += by_f[j].second > by_f[j - 1].second;

    std::vector<double> xs, ys;
    for (double lambda : lambda_grid(n_grid[i], lambda_points)) {
      const double hits = static_cast<double>(std::count_if(dev.begin(), dev.end(), [&](double d) { return d < -lambda; }));
      auto c = proportion("freq_below_minus_lambda", n, lambda_param(lambda), hits, N);
      c.lambda = lambda;
      out.cells.push_back(c);
      if (hits > 0) {
        xs.push_back(lambda);
        ys.push_back(std::log(hits / N));
      }
    }
    if (xs.size() >= 2) {
      const auto fit = fit_line(xs, ys);
      out.fits.push_back({"log_freq_vs_lambda n=" + fmt(n), fit});
      out.verdicts.push_back(make_verdict("lambda slope n=" + fmt(n), fit.slope, -1.15, -0.85, false,
                                          "e^{-lambda} window scaling"));
    } else {
      out.notes.push_back("n=" + fmt(n) + ": fewer than two lambda cells with hits; no slope fitted");
    }
    const auto med = quantile_estimate(centred, 0.5);
    out.cells.push_back(from_estimate("median_M_minus_1.5log", n, "", med));
    medians.push_back(med.value);
    logs.push_back(std::log(n));
  }
  out.verdicts.push_back(make_verdict("frequency nonincreasing in f", monotone_violations, 0, 0));
  const auto [lo, hi] = std::minmax_element(medians.begin(), medians.end());
  out.verdicts.push_back(make_verdict("median of M_n - 1.5 log n spread over grid", *hi - *lo, 0.0, 1.0));
  if (medians.size() >= 2) out.fits.push_back({"median_M_minus_1.5log_vs_log_n", fit_line(logs, medians)});
  return out;
}

ExperimentResult exp_additive_upper(const OffspringLaw& law, const std::vector<int>& n_grid,
                                    const std::vector<FSpec>& f_specs, const ExperimentOptions& opt) {
  ExperimentResult out;
  out.name = "additive-upper";
  out.config = base_config(out.name, law, opt);
  out.config["n_grid"] = n_grid;
  for (const auto& f : f_specs) out.config["f_specs"].push_back(f.text());
  out.notes.push_back("the limsup 0/infinity dichotomy is not decided at finite n; the tail slope is a heuristic proxy");

  const auto reps = simulate_grid(law, n_grid, opt, false);
  note_truncation(out, truncated_count(reps));
  survival_cells(out, reps, n_grid);

  std::uint64_t violations = 0;
  std::vector<double> medians;
  std::vector<double> last;
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    const double n = n_grid[i];
    const double rn = std::sqrt(n);
    std::vector<double> v;
    for (const auto& g : reps) {
      const auto& d = g.at[i];
      if (d.Z <= 0.0 || !d.M) continue;
      const double x = rn * d.W;
      if (x < rn * std::exp(-*d.M) * (1.0 - 1e-12)) ++violations;
      v.push_back(x);
    }
    for (double p : {0.1, 0.25, 0.5, 0.75, 0.9}) {
      const auto q = quantile_estimate(v, p);
      out.cells.push_back(from_estimate("quantile_sqrt_n_W", n, "p=" + fmt(p), q));
      if (p == 0.5) medians.push_back(q.value);
    }
    for (const auto& f : f_specs) {
      const double thr = f(n);
      const double hits = static_cast<double>(std::count_if(v.begin(), v.end(), [&](double x) { return x > thr; }));
      out.cells.push_back(proportion("tail_sqrt_n_W_above_f", n, f.text(), hits, static_cast<double>(v.size())));
    }
    if (i + 1 == n_grid.size()) last = v;
  }
  out.verdicts.push_back(make_verdict("replicas violating sqrt(n) W_n >= sqrt(n) e^{-M_n}",
                                      static_cast<double>(violations), 0, 0));
  double mean = 0;
  for (double m : medians) mean += m / static_cast<double>(medians.size());
  const auto [lo, hi] = std::minmax_element(medians.begin(), medians.end());
  out.verdicts.push_back(make_verdict("relative spread of median sqrt(n) W_n over grid", (*hi - *lo) / mean, 0.0, 0.25));

  // tail slope at the deepest n over the upper quantiles
  std::sort(last.begin(), last.end());
  std::vector<double> xs, ys;
  for (double p : {0.8, 0.9, 0.95, 0.98, 0.99}) {
    const double y = quantile(last, p);
    const double frac = static_cast<double>(last.end() - std::upper_bound(last.begin(), last.end(), y)) /
                        static_cast<double>(last.size());
    if (y > 0 && frac > 0) {
      xs.push_back(std::log(y));
      ys.push_back(std::log(frac));
    }
  }
  if (xs.size() >= 2) {
    const auto fit = fit_line(xs, ys);
    out.fits.push_back({"log_tail_vs_log_y n=" + fmt(n_grid.back()), fit});
    out.verdicts.push_back(make_verdict("tail slope of sqrt(n) W_n", fit.slope, -1.2, -0.8, true,
                                        "heuristic: 1/y tail suggested by the integral test"));
  }
  return out;
}

ExperimentResult exp_liminf_ratio(const OffspringLaw& law, const std::vector<int>& n_grid,
                                  const ExperimentOptions& opt, double d_floor, std::uint64_t spine_replicas) {
  ExperimentResult out;
  out.name = "liminf-ratio";
  out.config = base_config(out.name, law, opt);
  out.config["n_grid"] = n_grid;
  out.config["d_floor"] = d_floor;
  out.config["spine_replicas"] = spine_replicas;
  const double sigma2 = check_boundary(law).sigma2;
  const double c = std::sqrt(2.0 / (std::numbers::pi * sigma2));
  out.config["target"] = c;

  const auto reps = simulate_grid(law, n_grid, opt, true);
  note_truncation(out, truncated_count(reps));
  survival_cells(out, reps, n_grid);

  std::vector<double> dev_medians, spreads, surrogates;
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    const int n = n_grid[i];
    const double rn = std::sqrt(static_cast<double>(n));
    std::vector<double> paired, dev, ratio, running;
    std::uint64_t excluded = 0;
    double bound = 0.0;
    for (const auto& g : reps) {
      const auto& d = g.at[i];
      if (d.Z <= 0.0) continue;
      bound = std::max(bound, d.pruned_weight_bound);
      if (d.D <= d_floor) {
        ++excluded;
        continue;
      }
      paired.push_back(rn * d.W - c * d.D);
      ratio.push_back(rn * d.W / d.D);
      dev.push_back(std::abs(ratio.back() - c));
      double mn = std::numeric_limits<double>::infinity();
      for (int k = 1; k <= n && static_cast<std::size_t>(k) < g.all.size(); ++k) {
        const auto& rk = g.all[static_cast<std::size_t>(k)];
        if (rk.D > d_floor) mn = std::min(mn, std::sqrt(static_cast<double>(k)) * rk.W / rk.D);
      }
      if (std::isfinite(mn)) running.push_back(mn);
    }
    ResultCell ex;
    ex.statistic = "excluded_D_below_floor";
    ex.n = n;
    ex.estimate = static_cast<double>(excluded);
    ex.count = excluded;
    out.cells.push_back(ex);
    out.cells.push_back(from_estimate("median_paired", n, "sqrt(n)W_n-cD_n", quantile_estimate(paired, 0.5)));
    ResultCell iqr;
    iqr.statistic = "iqr_ratio";
    iqr.n = n;
    iqr.estimate = quantile(ratio, 0.75) - quantile(ratio, 0.25);
    iqr.count = ratio.size();
    out.cells.push_back(iqr);
    spreads.push_back(iqr.estimate);
    const auto md = quantile_estimate(dev, 0.5);
    out.cells.push_back(from_estimate("median_abs_ratio_minus_c", n, "", md));
    dev_medians.push_back(md.value);
    out.cells.push_back(from_estimate("median_running_min_ratio", n, "", quantile_estimate(running, 0.5)));

    // Pruning changes at most a fraction `bound` of replicas, so the median moves
    // at most to the (1/2 -+ bound) quantiles.
    double bias = 0.0;
    if (bound > 0.0) {
      const double up = quantile(dev, std::min(1.0, 0.5 + bound));
      const double dn = quantile(dev, std::max(0.0, 0.5 - bound));
      bias = std::max(up - md.value, md.value - dn);
    }
    ResultCell b;
    b.statistic = "median_bias_bound";
    b.n = n;
    b.estimate = bias;
    b.param = "prune_bound=" + fmt(bound);
    out.cells.push_back(b);
    out.verdicts.push_back(make_verdict("bias bound / median, n=" + std::to_string(n), bias / md.value, 0.0, 0.01));

    if (law.lattice_span()) {
      const auto v = variance_functional(law, 0.0, n, spine_replicas, derive_seed(opt.seed ^ 0x5350494e45ull, i));
      ResultCell s;
      s.statistic = "variance_surrogate";
      s.n = n;
      s.estimate = v.surrogate;
      out.cells.push_back(s);
      ResultCell q;
      q.statistic = "Q_variance_sqrt_n_W_over_D";
      q.n = n;
      q.estimate = v.variance;
      q.stderr_ = v.variance_stderr;
      q.count = spine_replicas;
      out.cells.push_back(q);
      surrogates.push_back(v.surrogate);
    }
  }
  int violations = 0;
  for (std::size_t i = 1; i < dev_medians.size(); ++i) violations += !(dev_medians[i] < dev_medians[i - 1]);
  out.verdicts.push_back(make_verdict("median |sqrt(n)W_n/D_n - c| strictly decreasing (violations)", violations, 0, 0));
  if (surrogates.size() >= 3) {
    out.verdicts.push_back(make_verdict("spearman(surrogate, IQR)", spearman(surrogates, spreads), 0.5, 1.0));
  } else if (!law.lattice_span()) {
    out.notes.push_back("spine variance surrogate needs a lattice law; skipped");
  }
  return out;
}

ExperimentResult exp_pair_correlation(const OffspringLaw& law, int n, int m, double lambda, double mu,
                                      const ExperimentOptions& opt, double K) {
  if (m < 4 * n) throw PreconditionError("pair-corr: requires m >= 4n");
  ExperimentResult out;
  out.name = "pair-corr";
  out.config = base_config(out.name, law, opt);
  out.config["n"] = n;
  out.config["m"] = m;
  out.config["lambda"] = lambda;
  out.config["mu"] = mu;
  out.config["K"] = K;
  const EventWindowSpec a(n, lambda, K), b(m, mu, K);
  SimulateOptions so;
  so.events = {a, b};
  so.events_only = true;
  struct Hit {
    bool a, b, trunc;
  };
  const auto hits = run_replicas<Hit>(opt.replicas, [&](std::size_t r) {
    const auto t = simulate(law, 1, 0.0, opt.prune, derive_seed(opt.seed, r), so);
    return Hit{t.events[0].occurred, t.events[1].occurred, t.truncated};
  });
  double na = 0, nb = 0, nab = 0, trunc = 0;
  for (const auto& h : hits) {
    na += h.a;
    nb += h.b;
    nab += h.a && h.b;
    trunc += h.trunc;
  }
  if (trunc > 0) {
    out.notes.push_back(fmt(trunc) + " replicas hit the population cap before both events were decided");
  }
  const double N = static_cast<double>(hits.size());
  const double pa = na / N, pb = nb / N, pab = nab / N;
  auto cell = [&](std::string stat, double est, double se) {
    ResultCell c;
    c.statistic = std::move(stat);
    c.n = n;
    c.m = m;
    c.lambda = lambda;
    c.mu = mu;
    c.estimate = est;
    c.stderr_ = se;
    c.count = hits.size();
    out.cells.push_back(c);
  };
  cell("P(A_n)", pa, std::sqrt(pa * (1 - pa) / N));
  cell("P(A_m)", pb, std::sqrt(pb * (1 - pb) / N));
  cell("P(A_n and A_m)", pab, std::sqrt(pab * (1 - pab) / N));
  // influence function of pab - pa pb
  RunningStats phi;
  for (const auto& h : hits) phi.add((h.a && h.b) - pb * h.a - pa * h.b);
  cell("product", pa * pb, kNaN);
  cell("joint_minus_product", pab - pa * pb, phi.stderr_mean());
  const double shape = std::exp(-lambda - mu) + std::exp(-mu) * std::log(static_cast<double>(n)) / std::sqrt(static_cast<double>(n));
  cell("joint_over_shape", pab / shape, std::sqrt(pab * (1 - pab) / N) / shape);
  cell("joint_over_exp", pab / std::exp(-lambda - mu), std::sqrt(pab * (1 - pab) / N) / std::exp(-lambda - mu));
  out.verdicts.push_back(make_verdict("joint / shape", pab / shape, 0.0, 10.0, false, "declared desk-scale constant 10"));
  const double se = phi.stderr_mean();
  out.verdicts.push_back(make_verdict("|joint - product| / SE", se > 0 ? std::abs(pab - pa * pb) / se : 0.0, 0.0, 4.0,
                                      false, "independence for m >= 4n"));
  if (law.lattice_span() && 2 * m <= 24) {
    const double exact = exact_joint_event_probability(law, a, b);
    cell("P(A_n and A_m) exact", exact, 0.0);
    const double sej = std::sqrt(exact * (1 - exact) / N);
    out.verdicts.push_back(make_verdict("|joint - exact| / SE", sej > 0 ? std::abs(pab - exact) / sej : std::abs(pab - exact),
                                        0.0, 4.0));
  }
  return out;
}

ExperimentResult exp_event_scaling(const OffspringLaw& law, const std::vector<int>& n_grid,
                                   const ExperimentOptions& opt, int lambda_points, double K) {
  ExperimentResult out;
  out.name = "event-scaling";
  out.config = base_config(out.name, law, opt);
  out.config["n_grid"] = n_grid;
  out.config["lambda_points"] = lambda_points;
  out.config["K"] = K;
  out.notes.push_back("replicas are per (n, lambda) cell; cells use disjoint seed streams");
  std::uint64_t cell_index = 0;
  for (int n : n_grid) {
    std::vector<double> xs, ys;
    std::uint64_t total = 0;
    for (double lambda : lambda_grid(n, lambda_points)) {
      SimulateOptions so;
      so.events = {EventWindowSpec(n, lambda, K)};
      so.events_only = true;
      const std::uint64_t cell_seed = derive_seed(opt.seed, cell_index++);
      const auto hits = run_replicas<char>(opt.replicas, [&](std::size_t r) {
        const auto t = simulate(law, 1, 0.0, opt.prune, derive_seed(cell_seed, r), so);
        if (t.truncated) throw BudgetError("event-scaling: population cap reached", static_cast<double>(opt.prune.cap));
        return static_cast<char>(t.events[0].occurred);
      });
      double h = 0;
      for (char c : hits) h += c;
      auto c = proportion("P(A)", n, lambda_param(lambda), h, static_cast<double>(hits.size()));
      c.lambda = lambda;
      out.cells.push_back(c);
      total += hits.size();
      if (h > 0) {
        xs.push_back(lambda);
        ys.push_back(std::log(h / static_cast<double>(hits.size())));
      }
    }
    ResultCell t;
    t.statistic = "replicas_total";
    t.n = n;
    t.estimate = static_cast<double>(total);
    t.count = total;
    out.cells.push_back(t);
    if (xs.size() >= 2) {
      const auto fit = fit_line(xs, ys);
      out.fits.push_back({"log_P(A)_vs_lambda n=" + std::to_string(n), fit});
      out.verdicts.push_back(make_verdict("slope of log P(A) on lambda, n=" + std::to_string(n), fit.slope, -1.15, -0.85));
    } else {
      out.verdicts.push_back(make_verdict("slope of log P(A) on lambda, n=" + std::to_string(n), kNaN, -1.15, -0.85,
                                          false, "fewer than two cells with hits"));
    }
  }
  return out;
}

std::vector<std::string> experiment_names() {
  return {"min-fluct", "additive-upper", "liminf-ratio", "pair-corr", "event-scaling"};
}

std::string cells_csv(const ExperimentResult& r) {
  std::ostringstream os;
  os << "statistic,n,m,lambda,mu,param,estimate,stderr,count\n";
  for (const auto& c : r.cells) {
    os << c.statistic << ',' << fmt(c.n) << ',' << fmt(c.m) << ',' << fmt(c.lambda) << ',' << fmt(c.mu) << ','
       << c.param << ',' << fmt(c.estimate) << ',' << fmt(c.stderr_) << ',' << c.count << '\n';
  }
  return os.str();
}

nlohmann::json verdict_json(const ExperimentResult& r) {
  auto num = [](double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(); };
  nlohmann::json j;
  j["experiment"] = r.name;
  j["config"] = r.config;
  j["pass"] = r.pass();
  for (const auto& v : r.verdicts) {
    j["verdicts"].push_back({{"name", v.name},
                             {"value", num(v.value)},
                             {"lo", num(v.lo)},
                             {"hi", num(v.hi)},
                             {"pass", v.pass},
                             {"heuristic", v.heuristic},
                             {"note", v.note}});
  }
  for (const auto& f : r.fits) {
    j["fits"].push_back({{"name", f.name},
                         {"slope", num(f.fit.slope)},
                         {"intercept", num(f.fit.intercept)},
                         {"slope_stderr", num(f.fit.slope_stderr)},
                         {"r2", num(f.fit.r2)},
                         {"points", f.fit.points}});
  }
  j["notes"] = r.notes;
  return j;
}

}  // namespace brw
