// Acceptance run: one PASS/FAIL line per criterion. Every tolerance is pinned here.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "brw/engine.hpp"
#include "brw/harness.hpp"
#include "brw/oracle.hpp"
#include "brw/parallel.hpp"
#include "brw/spine.hpp"
#include "brw/walk.hpp"

#ifndef BRWLAB_CLI
#error "BRWLAB_CLI must name the command line binary"
#endif

using namespace brw;

namespace {

const double kRootTwoOverPi = std::sqrt(2.0 / std::numbers::pi);

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

OffspringLaw coupled() { return *builtin_law("ssrw-coupled"); }

// ---- 1 ----------------------------------------------------------------------
void many_to_one(Outcome& o) {
  constexpr double kTol = 1e-10;
  constexpr double kSeconds = 60.0;
  const auto t0 = std::chrono::steady_clock::now();
  const OffspringLaw root_found = normalize_to_boundary(OffspringLaw{{0.1, {-1.0, -1.0}}, {0.9, {1.0, 1.0}}}).law;
  const OffspringLaw law_c = coupled();
  const Renewal Rc = renewal_for_depth(law_c, 5, 1.0);
  std::vector<double> grid;
  for (double x = 0.0; x <= 17.0; x += 0.25) grid.push_back(x);
  const auto table = renewal_function(derive_step_law(root_found), grid, 200, {2000, 7});
  const Renewal Rr = Renewal::tabulated(table.grid, table.values);
  double worst = 0.0;
  int checks = 0;
  for (auto [law, R] : {std::pair{&law_c, &Rc}, std::pair{&root_found, &Rr}}) {
    for (const auto& f : functional_battery(*R)) {
      for (int n = 1; n <= 5; ++n) {
        const auto m = exact_expectation(*law, n, f.f);
        worst = std::max(worst, std::abs(m.tree_side - m.walk_side));
        ++checks;
      }
    }
  }
  const double secs = seconds_since(t0);
  o.detail << checks << " (law, functional, n) cells, max gap " << worst << ", " << secs << " s";
  o.require(worst <= kTol, "gap <= 1e-10");
  o.require(secs < kSeconds, "runtime < 60 s");
}

// ---- 2 ----------------------------------------------------------------------
void martingales(Outcome& o) {
  constexpr double kTol = 1e-10;
  constexpr std::uint64_t kReplicas = 100'000;
  constexpr int kDepth = 20;
  const OffspringLaw law = coupled();
  double worst = 0.0;
  for (double alpha : {0.0, 1.0, 2.0})
    for (int n = 1; n <= 3; ++n) worst = std::max(worst, exact_martingale_gap(law, alpha, n, MartingaleKind::D_alpha));
  o.detail << "max D^(alpha) gap " << worst;
  o.require(worst <= kTol, "D^(alpha) gap <= 1e-10");

  const Renewal R = renewal_for_depth(law, kDepth, 0.0);
  SimulateOptions so;
  so.renewal = &R;
  const auto stats = parallel_blocks(
      kReplicas, 256, std::vector<RunningStats>(kDepth + 1),
      [&](std::size_t lo, std::size_t hi) {
        std::vector<RunningStats> s(kDepth + 1);
        for (std::size_t r = lo; r < hi; ++r) {
          const auto t = simulate(law, kDepth, 0.0, PrunePolicy{}, derive_seed(20260001, r), so);
          for (const auto& d : t.records) s[static_cast<std::size_t>(d.k)].add(d.W);
        }
        return s;
      },
      [](std::vector<RunningStats>& a, const std::vector<RunningStats>& b) {
        for (std::size_t i = 0; i < a.size(); ++i) a[i].merge(b[i]);
      });
  double worst_z = 0.0;
  for (int n = 1; n <= kDepth; ++n) {
    const auto e = stats[static_cast<std::size_t>(n)].estimate();
    worst_z = std::max(worst_z, std::abs(e.value - 1.0) / e.stderr_);
  }
  o.detail << "; E W_n = 1 over n = 1..20 at 1e5 replicas, max |z| " << worst_z;
  o.require(worst_z < 4.0, "|mean W_n - 1| < 4 SE");
}

// ---- 3 ----------------------------------------------------------------------
void renewal(Outcome& o) {
  constexpr std::int64_t kHorizon = 1'000'000;
  constexpr double kTailBound = 1e-6;
  const StepLaw step = derive_step_law(coupled());
  std::vector<double> grid;
  for (int x = 0; x <= 50; ++x) grid.push_back(x);
  const auto t = renewal_function(step, grid, kHorizon);
  double worst = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) worst = std::max(worst, std::abs(t.values[i] - (std::floor(grid[i]) + 1)));
  o.detail << "max |R(x) - (floor(x)+1)| = " << worst << ", tail bound " << t.tail_bound << ", c_R " << t.c_R_estimate;
  o.require(t.tail_bound < kTailBound, "tail bound < 1e-6");
  o.require(worst <= t.tail_bound, "exact up to the tail bound");
  o.require(t.c_R_estimate >= 0.99 && t.c_R_estimate <= 1.01, "c_R in [0.99, 1.01]");
}

// ---- 4 ----------------------------------------------------------------------
void k1_constant(Outcome& o) {
  constexpr std::int64_t kN = 10'000;
  constexpr double kRel = 0.05;
  const auto t0 = std::chrono::steady_clock::now();
  const StepLaw step = derive_step_law(coupled());
  const Renewal R = Renewal::lattice(step, 10.0);
  const double v = std::sqrt(static_cast<double>(kN)) * survival_prob(step, 0.0, kN, 0.0).value / R(0.0);
  const double secs = seconds_since(t0);
  o.detail << "sqrt(n) P(min S >= 0)/R(0) = " << v << " vs " << kRootTwoOverPi << ", " << secs << " s";
  o.require(std::abs(v / kRootTwoOverPi - 1.0) < kRel, "within 5%");
  o.require(secs < 30.0, "runtime < 30 s");
}

// ---- 5 ----------------------------------------------------------------------
void spine_fidelity(Outcome& o) {
  constexpr int kReplicas = 100'000;
  const OffspringLaw law = coupled();
  double worst = 0.0;
  for (int n = 1; n <= 6; ++n) {
    for (double alpha : {0.0, 1.0}) {
      const Renewal R = renewal_for_depth(law, n, alpha);
      const auto exact = exact_spine_marginal(law, alpha, n, 0.0, &R);
      const auto counts = parallel_blocks(
          kReplicas, 256, std::map<std::int64_t, double>{},
          [&](std::size_t lo, std::size_t hi) {
            std::map<std::int64_t, double> c;
            for (std::size_t r = lo; r < hi; ++r) {
              Stream rng(derive_seed(derive_seed(31337, static_cast<std::uint64_t>(10 * n + alpha)), r));
              c[std::llround(sample_spine_tree(law, alpha, n, R, rng).spine_positions.back())] += 1;
            }
            return c;
          },
          [](std::map<std::int64_t, double>& a, const std::map<std::int64_t, double>& b) {
            for (const auto& [k, v] : b) a[k] += v;
          });
      const auto tv = tv_check(exact, counts, kReplicas);
      worst = std::max(worst, tv.tv / tv.se);
      if (n == 1 && alpha == 0.0) {
        const bool point = exact.size() == 1 && exact.count(1) && counts.size() == 1 && counts.count(1);
        o.require(point, "n=1 alpha=0 point mass at +1");
      }
    }
  }
  o.detail << "n = 1..6, alpha in {0,1}, 1e5 replicas each: max TV/SE " << worst;
  o.require(worst < 4.0, "TV < 4 SE");
}

// ---- 6 ----------------------------------------------------------------------
void change_of_measure(Outcome& o) {
  constexpr std::uint64_t kReplicas = 20'000;
  const OffspringLaw law = coupled();
  const auto one = importance_estimate(parse_spine_functional("one"), law, 0.0, 20, kReplicas, 606);
  const double z1 = std::abs(one.estimate.value - 1.0) / one.estimate.stderr_;
  o.detail << "E_Q[D_0/D_20] z = " << z1;
  o.require(z1 < 4.0, "importance(1) = 1 within 4 SE");
  double worst = 0.0;
  const auto f = parse_spine_functional("sqrt-n-w-alpha");
  for (int n : {5, 10, 20}) {
    for (double alpha : {0.0, 1.0}) {
      const auto imp = importance_estimate(f, law, alpha, n, kReplicas, 607 + n);
      const Renewal R = renewal_for_depth(law, n, alpha);
      SimulateOptions so;
      so.renewal = &R;
      const auto direct = parallel_blocks(
          kReplicas, 256, RunningStats{},
          [&](std::size_t lo, std::size_t hi) {
            RunningStats s;
            for (std::size_t r = lo; r < hi; ++r) {
              const auto t = simulate(law, n, alpha, PrunePolicy{}, derive_seed(708 + n, r), so);
              s.add(std::sqrt(static_cast<double>(n)) * t.records.back().W_alpha);
            }
            return s;
          },
          [](RunningStats& a, const RunningStats& b) { a.merge(b); });
      const auto d = direct.estimate();
      const double z = std::abs(imp.estimate.value - d.value) / std::hypot(imp.estimate.stderr_, d.stderr_);
      worst = std::max(worst, z);
    }
  }
  o.detail << "; sqrt(n) E W_n^(alpha), importance vs direct for n in {5,10,20}, alpha in {0,1}: max z " << worst;
  o.require(worst < 4.0, "agreement within 4 combined SE");
}

// ---- 7 ----------------------------------------------------------------------
void rare_event(Outcome& o) {
  constexpr std::uint64_t kPerCell = 200'000;  // 5 lambda cells: 1e6 replicas per n
  ExperimentOptions opt;
  opt.replicas = kPerCell;
  opt.seed = 7007;
  const auto r = exp_event_scaling(coupled(), {16, 32}, opt, 5, 10.0);
  for (int n : {16, 32}) {
    const auto* total = r.find("replicas_total", n);
    o.require(total && total->count >= 1'000'000, "1e6 replicas at n=" + std::to_string(n));
  }
  for (const auto& v : r.verdicts) {
    o.detail << v.name << " = " << v.value << " (target [" << v.lo << ", " << v.hi << "]); ";
    o.require(v.pass, v.name);
  }
  for (const auto& c : r.cells)
    if (c.statistic == "P(A)") o.detail << "P(A(" << c.n << "," << c.lambda << "))=" << c.estimate << " ";
}

// ---- 8 ----------------------------------------------------------------------
void liminf_shadow(Outcome& o) {
  ExperimentOptions opt;
  opt.replicas = 4000;
  opt.seed = 8008;
  // positions after n <= 64 unit steps stay below 64, so level 150 removes
  // nothing while the certified bound sigma^2 n / L^2 stays below 0.003
  opt.prune = prune_policy(150.0, 0.0);
  const auto r = exp_liminf_ratio(coupled(), {16, 32, 64}, opt);
  o.require(std::abs(r.config["target"].get<double>() - kRootTwoOverPi) < 1e-15, "target sqrt(2/pi)");
  for (int n : {16, 32, 64}) {
    const auto* m = r.find("median_abs_ratio_minus_c", n);
    o.detail << "n=" << n << " median " << m->estimate << " (SE " << m->stderr_ << "); ";
  }
  for (const auto& v : r.verdicts) {
    if (v.name.rfind("spearman", 0) == 0) continue;  // not part of this criterion
    o.require(v.pass, v.name);
    if (v.name.rfind("bias", 0) == 0) o.detail << v.name << " = " << v.value << "; ";
  }
}

// ---- 9 ----------------------------------------------------------------------
void h_function_check(Outcome& o) {
  const StepLaw step = derive_step_law(coupled());
  const Renewal R = Renewal::lattice(step, 10.0);
  const double h4 = h_function(step, R, 0.0, 4);
  const double h = h_function(step, R, 0.0, 10'000);
  o.detail << "h_0(4) = " << h4 << ", h_0(1e4) = " << h;
  o.require(h4 == 0.75, "h_0(4) = 0.75 exactly");
  o.require(std::abs(h / kRootTwoOverPi - 1.0) < 0.05, "h_0(1e4) within 5%");
}

// ---- 10 ---------------------------------------------------------------------
std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void determinism(Outcome& o) {
  const auto dir = std::filesystem::temp_directory_path() / ("brwlab-acceptance-" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  const std::vector<std::string> cmds = {
      "check --law ssrw-coupled",
      "simulate --law ssrw-coupled --n 12 --replicas 64 --seed 5",
      "simulate --law ssrw-ln2 --n 10 --replicas 32 --alpha 1 --prune-level 6 --seed 6",
      "walk renewal --law ssrw-coupled --grid 0:20:1 --horizon 1000",
      "walk estimates --spec K1 --n 10,100",
      "spine --law ssrw-coupled --n 10 --replicas 500 --functional w-ratio --alpha 1 --seed 7",
      "spine --law ssrw-coupled --n 8 --replicas 300 --functional 'event:A(4,0.2,2)' --seed 8",
      "oracle --law ssrw-coupled --n 3 --battery default",
      "experiment --name min-fluct --n 8,16 --replicas 500 --seed 9",
      "experiment --name pair-corr --n 2 --m 8 --K 1 --replicas 2000 --seed 10",
  };
  int identical = 0;
  for (std::size_t i = 0; i < cmds.size(); ++i) {
    std::vector<std::string> outputs;
    std::vector<int> codes;
    for (const char* threads : {"1", "4", "1", "4"}) {
      const auto file = dir / ("run" + std::to_string(i) + "-" + std::to_string(outputs.size()) + ".csv");
      const std::string line = std::string(BRWLAB_CLI) + " " + cmds[i] + " --no-timestamp --threads " + threads +
                               " --out " + file.string() + " 2>/dev/null";
      const int rc = std::system(line.c_str());
      // experiments may exit 1 on a failed verdict; that status must repeat too
      o.require(rc != -1 && WIFEXITED(rc) && WEXITSTATUS(rc) <= 1, "exit 0 or 1: " + cmds[i]);
      codes.push_back(rc);
      outputs.push_back(slurp(file));
    }
    o.require(std::count(codes.begin(), codes.end(), codes.front()) == 4, "same exit status: " + cmds[i]);
    const bool same = !outputs[0].empty() && outputs[0] == outputs[1] && outputs[0] == outputs[2] && outputs[0] == outputs[3];
    o.require(same, "identical bytes: " + cmds[i]);
    identical += same;
  }
  std::filesystem::remove_all(dir);
  o.detail << identical << "/" << cmds.size() << " invocations byte-identical over 2 runs x threads {1,4}";
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<void(Outcome&)>>> criteria = {
      {"many-to-one exactness", many_to_one},
      {"martingale exactness", martingales},
      {"renewal ground truth", renewal},
      {"K1 constant", k1_constant},
      {"spine fidelity", spine_fidelity},
      {"change-of-measure consistency", change_of_measure},
      {"rare-event scaling", rare_event},
      {"in-probability limit shadow", liminf_shadow},
      {"h-function", h_function_check},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    failed += !o.pass;
    std::printf("criterion %zu %s: %s (%.1f s) %s\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first,
                seconds_since(t0), o.detail.str().c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed ? 1 : 0;
}
