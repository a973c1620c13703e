#include "brw/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "brw/engine.hpp"
#include "brw/error.hpp"
#include "brw/harness.hpp"
#include "brw/numeric.hpp"
#include "brw/offspring.hpp"
#include "brw/oracle.hpp"
#include "brw/parallel.hpp"
#include "brw/rng.hpp"
#include "brw/spine.hpp"
#include "brw/walk.hpp"

namespace brw {

namespace {

using nlohmann::json;

constexpr const char* kVersion = "0.1.0";

std::string num(double x) { return format_number(x); }

json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(); }

struct Common {
  std::string seed_text;
  unsigned threads = 0;
  bool no_timestamp = false;
  std::string out = "-";
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed_text, "master seed (u64); falls back to BRWLAB_SEED, then 1");
  sub->add_option("--threads", c.threads, "worker threads, 0 = hardware parallelism");
  sub->add_flag("--no-timestamp", c.no_timestamp, "omit the timestamp from the header line");
  sub->add_option("--out", c.out, "output CSV path, - for stdout");
}

std::uint64_t resolve_seed(const Common& c) {
  std::string text = c.seed_text;
  if (text.empty()) {
    const char* env = std::getenv("BRWLAB_SEED");
    text = env && *env ? env : "1";
  }
  std::size_t used = 0;
  std::uint64_t v = 0;
  try {
    v = std::stoull(text, &used, 10);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || text.front() == '-') throw ValidationError("seed '" + text + "' is not a u64");
  return v;
}

/// The resolved option values of the leaf subcommand.
json echo_config(const CLI::App& sub, const std::string& path, std::uint64_t seed) {
  json cfg;
  cfg["subcommand"] = path;
  for (const CLI::Option* o : sub.get_options()) {
    if (o->get_lnames().empty()) continue;
    const std::string& name = o->get_lnames().front();
    if (name == "help" || name == "threads" || name == "no-timestamp" || name == "seed" || name == "out") continue;
    const bool list = o->get_expected_max() > 1;
    if (o->count() > 0) {
      const auto r = o->results();
      cfg[name] = list ? json(r) : json(r.front());
    } else if (list) {
      // CLI11 renders vector defaults as "[a,b]" or "{}"
      std::string d = o->get_default_str();
      std::erase_if(d, [](char ch) { return ch == '[' || ch == ']' || ch == '{' || ch == '}'; });
      json items = json::array();
      std::stringstream ss(d);
      std::string item;
      while (std::getline(ss, item, ',')) items.push_back(item);
      cfg[name] = items;
    } else {
      cfg[name] = o->get_default_str();
    }
  }
  cfg["seed"] = seed;
  return cfg;
}

std::string timestamp_utc() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

/// Writes "# {header}\n" followed by the CSV body to --out or `out`.
void emit(const Common& c, std::ostream& out, json config, const json& summary, const std::string& body) {
  json header;
  header["tool"] = "brwlab";
  header["version"] = kVersion;
  header["config"] = std::move(config);
  if (!summary.is_null()) header["summary"] = summary;
  if (!c.no_timestamp) header["timestamp"] = timestamp_utc();
  const std::string text = "# " + header.dump() + "\n" + body;
  if (c.out == "-" || c.out.empty()) {
    out << text;
    out.flush();
    return;
  }
  std::ofstream f(c.out, std::ios::binary);
  if (!f) throw NotFoundError("cannot open output file '" + c.out + "'");
  f << text;
}

std::vector<double> parse_grid(const std::string& text) {
  // "a:b:step" or a comma list
  std::vector<double> out;
  const auto colon = text.find(':');
  try {
    if (colon == std::string::npos) {
      std::stringstream ss(text);
      std::string item;
      while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
    } else {
      const auto colon2 = text.find(':', colon + 1);
      if (colon2 == std::string::npos) throw ValidationError("grid '" + text + "': expected a:b:step");
      const double a = std::stod(text.substr(0, colon));
      const double b = std::stod(text.substr(colon + 1, colon2 - colon - 1));
      const double step = std::stod(text.substr(colon2 + 1));
      if (!(step > 0) || b < a) throw ValidationError("grid '" + text + "': need step > 0 and b >= a");
      const auto count = static_cast<std::int64_t>(std::floor((b - a) / step + 1e-9));
      if (count > 10'000'000) throw ValidationError("grid '" + text + "': more than 1e7 points");
      for (std::int64_t i = 0; i <= count; ++i) out.push_back(a + static_cast<double>(i) * step);
    }
  } catch (const std::invalid_argument&) {
    throw ValidationError("grid '" + text + "': not a number");
  } catch (const std::out_of_range&) {
    throw ValidationError("grid '" + text + "': number out of range");
  }
  if (out.empty()) throw ValidationError("grid '" + text + "' is empty");
  return out;
}

// ---- check -----------------------------------------------------------------

int run_check(const Common& c, const json& cfg, std::ostream& out, const std::string& law_src) {
  const OffspringLaw law = load_law(law_src);
  const auto r = check_boundary(law);
  std::ostringstream body;
  body << "field,value\n";
  auto row = [&](const char* k, double v) { body << k << ',' << num(v) << '\n'; };
  row("atoms", static_cast<double>(law.atoms().size()));
  row("mean_offspring", r.mean_offspring);
  row("exp_mass", r.exp_mass);
  row("tilt_mean", r.tilt_mean);
  row("sigma2", r.sigma2);
  row("eta_log2_moment", r.eta_log2_moment);
  row("eps0_moment", r.eps0_moment);
  row("eps0", r.eps0);
  row("tol", r.tol);
  row("lattice_span", law.lattice_span().value_or(std::nan("")));
  row("supercritical", r.supercritical);
  row("boundary", r.boundary);
  row("int1", r.int1);
  row("int2", r.int2);
  row("int3", r.int3);
  json summary = {{"law", law.name()}, {"boundary", r.boundary}};
  emit(c, out, cfg, summary, body.str());
  return r.boundary ? kExitOk : kExitTolerance;
}

// ---- simulate --------------------------------------------------------------

struct SimulateArgs {
  std::string law;
  int n = 10;
  double alpha = 0.0;
  std::uint64_t replicas = 10;
  double prune_level = std::numeric_limits<double>::infinity();
  double weight_floor = 0.0;
  std::uint64_t cap = 10'000'000;
  std::string mode = "auto";
};

int run_simulate(const Common& c, const json& cfg, std::ostream& out, const SimulateArgs& a, std::uint64_t seed) {
  const OffspringLaw law = load_law(a.law);
  const PrunePolicy prune = prune_policy(a.prune_level, a.weight_floor, a.cap);
  SimulateOptions so;
  if (a.mode == "particle") so.mode = EngineMode::Particle;
  else if (a.mode == "occupancy") so.mode = EngineMode::Occupancy;
  std::optional<Renewal> R;
  if (law.lattice_span() && check_boundary(law).boundary) {
    R = renewal_for_depth(law, a.n, a.alpha);
    so.renewal = &*R;
  }
  std::uint64_t truncated = 0;
  struct Block {
    std::string text;
    std::uint64_t truncated = 0;
  };
  const auto all = parallel_blocks(
      a.replicas, 16, Block{},
      [&](std::size_t lo, std::size_t hi) {
        Block b;
        std::ostringstream os;
        for (std::size_t r = lo; r < hi; ++r) {
          const auto t = simulate(law, a.n, a.alpha, prune, derive_seed(seed, r), so);
          b.truncated += t.truncated;
          for (const auto& d : t.records) {
            os << r << ',' << d.k << ',' << (d.M ? num(*d.M) : std::string()) << ',' << num(d.W) << ',' << num(d.D)
               << ',' << num(d.W_alpha) << ',' << num(d.D_alpha) << ',' << num(d.Z) << ',' << int(d.extinct) << ','
               << num(d.pruned_weight_bound) << ',' << int(t.truncated) << '\n';
          }
        }
        b.text = os.str();
        return b;
      },
      [](Block& x, const Block& y) {
        x.text += y.text;
        x.truncated += y.truncated;
      });
  truncated = all.truncated;
  const std::string body = "replica,depth,M,W,D,W_alpha,D_alpha,Z,extinct,pruned_weight_bound,truncated\n" + all.text;
  emit(c, out, cfg, json{{"law", law.name()}, {"truncated_replicas", truncated}}, body);
  return kExitOk;
}

// ---- walk ------------------------------------------------------------------

int run_walk_renewal(const Common& c, const json& cfg, std::ostream& out, const std::string& law_src,
                     const std::string& grid_text, std::int64_t horizon, std::uint64_t mc_replicas,
                     std::uint64_t seed) {
  const OffspringLaw law = load_law(law_src);
  const StepLaw step = derive_step_law(law);
  RenewalOptions ro;
  ro.replicas = mc_replicas;
  ro.seed = seed;
  const auto t = renewal_function(step, parse_grid(grid_text), horizon, ro);
  std::ostringstream body;
  body << "x,R,stderr\n";
  for (std::size_t i = 0; i < t.grid.size(); ++i)
    body << num(t.grid[i]) << ',' << num(t.values[i]) << ',' << num(t.stderr_[i]) << '\n';
  json summary = {{"horizon", t.horizon},
                  {"tail_bound", t.tail_bound},
                  {"c_R_estimate", finite_or_null(t.c_R_estimate)},
                  {"exact", t.exact}};
  emit(c, out, cfg, summary, body.str());
  return kExitOk;
}

struct EstimateArgs {
  std::string law = "ssrw-coupled";
  std::string spec = "K1";
  std::vector<std::int64_t> ns{100};
  std::vector<double> xs{0.0};
  std::vector<std::int64_t> ks;
  double a = 0.0, b = 1.0, y = 0.0, r = 0.5;
};

int run_walk_estimates(const Common& c, const json& cfg, std::ostream& out, const EstimateArgs& e) {
  const auto spec = parse_estimate_spec(e.spec);
  if (!spec) throw ValidationError("unknown estimate '" + e.spec + "' (F1, AJ, K1, AS1, AS2, L22, EPPEL)");
  const OffspringLaw law = load_law(e.law);
  const StepLaw step = derive_step_law(law);
  EstimateParams p;
  p.xs = e.xs;
  p.ns = e.ns;
  p.ks = e.ks;
  p.a = e.a;
  p.b = e.b;
  p.y = e.y;
  p.r = e.r;
  double top = 0.0;
  for (double x : p.xs) top = std::max(top, x);
  std::int64_t nmax = 0;
  for (auto n : p.ns) nmax = std::max(nmax, n);
  for (auto k : p.ks) nmax = std::max(nmax, k);
  const auto ls = lattice_step(step);
  const double reach = top + std::max(p.b, p.y) + ls.h * static_cast<double>(std::max(ls.up, ls.down)) * static_cast<double>(nmax) + 1.0;
  const Renewal R = Renewal::lattice(step, reach);
  const auto rep = check_estimates(step, R, *spec, p);
  std::ostringstream body;
  body << "x," << (*spec == EstimateSpec::EPPEL ? "k" : "n") << ",lhs,rhs,ratio\n";
  for (const auto& row : rep.rows)
    body << num(row.x) << ',' << row.n << ',' << num(row.lhs) << ',' << num(row.rhs) << ',' << num(row.ratio) << '\n';
  emit(c, out, cfg, json{{"estimate", to_string(*spec)}, {"sup_ratio", finite_or_null(rep.sup_ratio)}}, body.str());
  return kExitOk;
}

// ---- spine -----------------------------------------------------------------

int run_spine(const Common& c, const json& cfg, std::ostream& out, const std::string& law_src, double alpha, int n,
              std::uint64_t replicas, const std::string& functional, std::uint64_t seed) {
  const OffspringLaw law = load_law(law_src);
  const auto f = parse_spine_functional(functional);
  const Renewal R = renewal_for_depth(law, spine_depth(f, n), alpha);
  struct Block {
    std::string text;
    RunningStats ratio;
  };
  const auto all = parallel_blocks(
      replicas, 64, Block{},
      [&](std::size_t lo, std::size_t hi) {
        Block b;
        std::ostringstream os;
        for (std::size_t r = lo; r < hi; ++r) {
          const auto s = spine_sample(law, alpha, n, f, R, derive_seed(seed, r));
          os << r << ',' << num(s.value) << ',' << num(s.weight) << '\n';
          if (s.weight > 0 && std::isfinite(s.weight)) b.ratio.add(s.value / s.weight);
        }
        b.text = os.str();
        return b;
      },
      [](Block& x, const Block& y) {
        x.text += y.text;
        x.ratio.merge(y.ratio);
      });
  const auto est = all.ratio.estimate();
  emit(c, out, cfg,
       json{{"functional", to_string(f)},
            {"importance_estimate", finite_or_null(est.value)},
            {"stderr", finite_or_null(est.stderr_)}},
       "replica,value,weight\n" + all.text);
  return kExitOk;
}

// ---- oracle ----------------------------------------------------------------

int run_oracle(const Common& c, const json& cfg, std::ostream& out, std::ostream& err, const std::string& law_src,
               int n, double alpha, const std::string& battery, double tol) {
  if (battery != "default") throw ValidationError("unknown battery '" + battery + "' (default)");
  if (n < 1) throw PreconditionError("oracle: n must be >= 1");
  const OffspringLaw law = load_law(law_src);
  if (!law.lattice_span()) throw PreconditionError("oracle: the battery needs a lattice law");
  const StepLaw step = derive_step_law(law);
  const Renewal R = renewal_for_depth(law, n, std::max(alpha, 1.0));
  std::ostringstream body;
  body << "check,n,alpha,lhs,rhs,gap,tol,pass\n";
  bool all_pass = true;
  double worst = 0.0;
  auto row = [&](const std::string& name, int k, double a, double lhs, double rhs, double gap) {
    const bool pass = gap <= tol;
    all_pass = all_pass && pass;
    worst = std::max(worst, gap);
    body << name << ',' << k << ',' << num(a) << ',' << num(lhs) << ',' << num(rhs) << ',' << num(gap) << ','
         << num(tol) << ',' << (pass ? "pass" : "FAIL") << '\n';
    err << (pass ? "pass " : "FAIL ") << name << " n=" << k << " alpha=" << num(a) << " gap=" << num(gap) << '\n';
  };
  for (const auto& f : functional_battery(R)) {
    for (int k = 1; k <= n; ++k) {
      const auto m = exact_expectation(law, k, f.f);
      row("many-to-one:" + f.name, k, 0.0, m.tree_side, m.walk_side, std::abs(m.tree_side - m.walk_side));
    }
  }
  const Renewal Ra = renewal_for_depth(law, n, alpha);
  for (auto [kind, name] : {std::pair{MartingaleKind::W, "martingale-gap:W"}, std::pair{MartingaleKind::D, "martingale-gap:D"},
                            std::pair{MartingaleKind::D_alpha, "martingale-gap:D_alpha"}}) {
    const double gap = exact_martingale_gap(law, alpha, n, kind, &Ra);
    row(name, n, alpha, gap, 0.0, gap);
  }
  const auto marginal = exact_spine_marginal(law, alpha, n, 0.0, &Ra);
  double mass = 0.0;
  for (const auto& [site, p] : marginal) mass += p;
  row("spine-marginal:mass", n, alpha, mass, 1.0, std::abs(mass - 1.0));
  const auto dp = h_transform_marginal(step, Ra, alpha, 0.0, n);
  double diff = 0.0;
  for (const auto& [site, p] : marginal) {
    const auto it = dp.find(site);
    diff = std::max(diff, std::abs(p - (it == dp.end() ? 0.0 : it->second)));
  }
  for (const auto& [site, p] : dp)
    if (!marginal.count(site)) diff = std::max(diff, p);
  row("spine-marginal:vs-walk-dp", n, alpha, diff, 0.0, diff);
  emit(c, out, cfg, json{{"law", law.name()}, {"pass", all_pass}, {"max_gap", worst}}, body.str());
  return all_pass ? kExitOk : kExitTolerance;
}

// ---- experiment ------------------------------------------------------------

struct ExperimentArgs {
  std::string name;
  std::string law = "ssrw-coupled";
  std::vector<int> ns{16, 32, 64};
  std::vector<std::string> fs{"loglog", "1.5*loglog"};
  std::uint64_t replicas = 1000;
  double prune_level = std::numeric_limits<double>::infinity();
  double weight_floor = 0.0;
  std::uint64_t cap = 10'000'000;
  int lambda_points = 5;
  double K = 10.0;
  int m = 0;
  double lambda = 0.0, mu = 0.0;
  double d_floor = 1e-3;
  std::uint64_t spine_replicas = 2000;
  std::string verdict_path;
};

int run_experiment(const Common& c, json cfg, std::ostream& out, std::ostream& err, const ExperimentArgs& e,
                   std::uint64_t seed) {
  const OffspringLaw law = load_law(e.law);
  ExperimentOptions opt;
  opt.replicas = e.replicas;
  opt.seed = seed;
  opt.prune = prune_policy(e.prune_level, e.weight_floor, e.cap);
  std::vector<FSpec> fs;
  for (const auto& f : e.fs) fs.push_back(FSpec::parse(f));
  ExperimentResult r;
  if (e.name == "min-fluct") {
    r = exp_min_fluctuation(law, e.ns, fs, opt, e.lambda_points);
  } else if (e.name == "additive-upper") {
    r = exp_additive_upper(law, e.ns, fs, opt);
  } else if (e.name == "liminf-ratio") {
    r = exp_liminf_ratio(law, e.ns, opt, e.d_floor, e.spine_replicas);
  } else if (e.name == "pair-corr") {
    if (e.ns.size() != 1) throw ValidationError("pair-corr takes a single --n");
    const int m = e.m > 0 ? e.m : 4 * e.ns.front();
    r = exp_pair_correlation(law, e.ns.front(), m, e.lambda, e.mu, opt, e.K);
  } else if (e.name == "event-scaling") {
    r = exp_event_scaling(law, e.ns, opt, e.lambda_points, e.K);
  } else {
    throw ValidationError("unknown experiment '" + e.name + "'");
  }
  for (const auto& v : r.verdicts) {
    err << (v.pass ? "pass " : (v.heuristic ? "warn " : "FAIL ")) << v.name << ": " << num(v.value) << " in ["
        << num(v.lo) << ", " << num(v.hi) << "]" << (v.heuristic ? " (heuristic)" : "") << '\n';
  }
  std::string verdict_path = e.verdict_path;
  if (verdict_path.empty() && c.out != "-" && !c.out.empty()) {
    const auto dot = c.out.rfind('.');
    const auto slash = c.out.rfind('/');
    const bool has_ext = dot != std::string::npos && (slash == std::string::npos || dot > slash);
    verdict_path = (has_ext ? c.out.substr(0, dot) : c.out) + ".verdict.json";
  }
  if (!verdict_path.empty()) {
    json vj = verdict_json(r);
    vj["run_config"] = cfg;
    std::ofstream f(verdict_path, std::ios::binary);
    if (!f) throw NotFoundError("cannot open verdict file '" + verdict_path + "'");
    f << vj.dump(2) << '\n';
  }
  emit(c, out, std::move(cfg), json{{"experiment", r.name}, {"pass", r.pass()}}, cells_csv(r));
  return r.pass() ? kExitOk : kExitTolerance;
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"brwlab: branching random walks in the boundary case"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  app.set_version_flag("--version", kVersion);

  Common common;

  std::string law = "ssrw-coupled";
  auto* check = app.add_subcommand("check", "boundary-case report for a law");
  check->add_option("--law", law, "builtin name or JSON law file");
  add_common(check, common);

  SimulateArgs sim;
  auto* simulate_cmd = app.add_subcommand("simulate", "depth records per replica");
  simulate_cmd->add_option("--law", sim.law, "builtin name or JSON law file")->required();
  simulate_cmd->add_option("--n", sim.n, "depth")->check(CLI::Range(1, 1'000'000));
  simulate_cmd->add_option("--alpha", sim.alpha, "barrier for W^(alpha), D^(alpha)")->check(CLI::NonNegativeNumber);
  simulate_cmd->add_option("--replicas", sim.replicas);
  simulate_cmd->add_option("--prune-level", sim.prune_level, "drop particles above this position");
  simulate_cmd->add_option("--weight-floor", sim.weight_floor, "drop particles with e^{-V} below this");
  simulate_cmd->add_option("--cap", sim.cap, "population cap");
  simulate_cmd->add_option("--mode", sim.mode)->check(CLI::IsMember({"auto", "particle", "occupancy"}));
  add_common(simulate_cmd, common);

  auto* walk = app.add_subcommand("walk", "many-to-one walk analytics");
  walk->require_subcommand(1);
  std::string grid = "0:50:1";
  std::int64_t horizon = 1'000'000;
  std::uint64_t mc_replicas = 20000;
  std::string walk_law = "ssrw-coupled";
  auto* renewal = walk->add_subcommand("renewal", "renewal function table");
  renewal->add_option("--law", walk_law, "builtin name or JSON law file");
  renewal->add_option("--grid", grid, "a:b:step or comma list");
  renewal->add_option("--horizon", horizon, "ladder epochs (lattice) or walk length (Monte Carlo)")
      ->check(CLI::PositiveNumber);
  renewal->add_option("--mc-replicas", mc_replicas, "Monte Carlo replicas for non-lattice laws");
  add_common(renewal, common);

  EstimateArgs est;
  auto* estimates = walk->add_subcommand("estimates", "finite-range check of a walk estimate");
  estimates->add_option("--law", est.law, "builtin name or JSON law file");
  estimates->add_option("--spec", est.spec, "F1, AJ, K1, AS1, AS2, L22 or EPPEL");
  estimates->add_option("--n", est.ns, "time horizons")->delimiter(',');
  estimates->add_option("--x", est.xs, "starting points")->delimiter(',');
  estimates->add_option("--k", est.ks, "times for EPPEL")->delimiter(',');
  estimates->add_option("--a", est.a);
  estimates->add_option("--b", est.b);
  estimates->add_option("--y", est.y);
  estimates->add_option("--r", est.r);
  add_common(estimates, common);

  std::string spine_law = "ssrw-coupled", functional = "one";
  double spine_alpha = 0.0;
  int spine_n = 10;
  std::uint64_t spine_replicas = 1000;
  auto* spine = app.add_subcommand("spine", "spine replicas under Q^(alpha)");
  spine->add_option("--law", spine_law, "builtin name or JSON law file");
  spine->add_option("--alpha", spine_alpha)->check(CLI::NonNegativeNumber);
  spine->add_option("--n", spine_n)->check(CLI::Range(1, 100'000));
  spine->add_option("--replicas", spine_replicas);
  spine->add_option("--functional", functional, "one, w-ratio, sqrt-n-w-alpha, event:A(n,lambda[,K])");
  add_common(spine, common);

  std::string oracle_law = "ssrw-coupled", battery = "default";
  int oracle_n = 3;
  double oracle_alpha = 0.0, tol = 1e-10;
  auto* oracle = app.add_subcommand("oracle", "exact enumeration battery");
  oracle->add_option("--law", oracle_law, "builtin name or JSON law file");
  oracle->add_option("--n", oracle_n)->check(CLI::Range(1, 12));
  oracle->add_option("--alpha", oracle_alpha)->check(CLI::NonNegativeNumber);
  oracle->add_option("--battery", battery);
  oracle->add_option("--tol", tol, "pass threshold for every gap");
  add_common(oracle, common);

  ExperimentArgs ex;
  auto* experiment = app.add_subcommand("experiment", "statistical experiment with verdicts");
  experiment->add_option("--name", ex.name)->required()->check(CLI::IsMember(experiment_names()));
  experiment->add_option("--law", ex.law, "builtin name or JSON law file");
  experiment->add_option("--n", ex.ns, "depth grid (pair-corr: the single n)")->delimiter(',');
  experiment->add_option("--f", ex.fs, "threshold functions f(n)")->delimiter(',');
  experiment->add_option("--replicas", ex.replicas);
  experiment->add_option("--prune-level", ex.prune_level);
  experiment->add_option("--weight-floor", ex.weight_floor);
  experiment->add_option("--cap", ex.cap);
  experiment->add_option("--lambda-points", ex.lambda_points)->check(CLI::Range(1, 1000));
  experiment->add_option("--K", ex.K);
  experiment->add_option("--m", ex.m, "pair-corr: second window, default 4n");
  experiment->add_option("--lambda", ex.lambda, "pair-corr");
  experiment->add_option("--mu", ex.mu, "pair-corr");
  experiment->add_option("--d-floor", ex.d_floor, "liminf-ratio: exclude replicas with D_n below this");
  experiment->add_option("--spine-replicas", ex.spine_replicas, "liminf-ratio");
  experiment->add_option("--verdict", ex.verdict_path, "verdict JSON path (default: beside --out)");
  add_common(experiment, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    const auto prev_threads = default_threads();
    set_default_threads(common.threads);
    struct Restore {
      unsigned t;
      ~Restore() { set_default_threads(t); }
    } restore{prev_threads};
    const std::uint64_t seed = resolve_seed(common);

    if (check->parsed()) return run_check(common, echo_config(*check, "check", seed), out, law);
    if (simulate_cmd->parsed())
      return run_simulate(common, echo_config(*simulate_cmd, "simulate", seed), out, sim, seed);
    if (renewal->parsed())
      return run_walk_renewal(common, echo_config(*renewal, "walk renewal", seed), out, walk_law, grid, horizon,
                              mc_replicas, seed);
    if (estimates->parsed()) return run_walk_estimates(common, echo_config(*estimates, "walk estimates", seed), out, est);
    if (spine->parsed())
      return run_spine(common, echo_config(*spine, "spine", seed), out, spine_law, spine_alpha, spine_n, spine_replicas,
                       functional, seed);
    if (oracle->parsed())
      return run_oracle(common, echo_config(*oracle, "oracle", seed), out, err, oracle_law, oracle_n, oracle_alpha,
                        battery, tol);
    if (experiment->parsed())
      return run_experiment(common, echo_config(*experiment, "experiment", seed), out, err, ex, seed);
  } catch (const BudgetError& e) {
    err << "budget: " << e.what() << " (required " << num(e.required()) << ")\n";
    return kExitBudget;
  } catch (const NotFoundError& e) {
    err << "not found: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ValidationError& e) {
    err << "invalid input: " << e.what() << '\n';
    return kExitUsage;
  } catch (const PreconditionError& e) {
    err << "precondition: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::bad_alloc&) {
    err << "out of memory\n";
    return kExitBudget;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitTolerance;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace brw
