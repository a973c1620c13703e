#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "brw/error.hpp"
#include "brw/numeric.hpp"
#include "brw/oracle.hpp"
#include "brw/rng.hpp"
#include "brw/stats.hpp"
#include "support.hpp"

using namespace brw;

namespace {

const OffspringLaw& coupled() {
  static const OffspringLaw law = *builtin_law("ssrw-coupled");
  return law;
}

const OffspringLaw& ln2law() {
  static const OffspringLaw law = *builtin_law("ssrw-ln2");
  return law;
}

const OffspringLaw& root_found() {
  static const OffspringLaw law =
      normalize_to_boundary(OffspringLaw{{0.1, {-1.0, -1.0}}, {0.9, {1.0, 1.0}}}).law;
  return law;
}

// Monte Carlo renewal table; the many-to-one identity holds for any path functional.
Renewal tabulated_renewal(const OffspringLaw& law, double top) {
  std::vector<double> grid;
  for (double x = 0.0; x <= top + 0.5; x += 0.25) grid.push_back(x);
  auto table = renewal_function(derive_step_law(law), grid, 200, {2000, 7});
  return Renewal::tabulated(table.grid, table.values);
}

OffspringLaw shuffled(const OffspringLaw& law, std::uint64_t seed) {
  Stream rng(seed);
  auto atoms = law.atoms();
  std::shuffle(atoms.begin(), atoms.end(), rng);
  for (auto& a : atoms) std::shuffle(a.children.begin(), a.children.end(), rng);
  return OffspringLaw(std::move(atoms), law.name());
}

double population(const Tree& t) {
  double z = 0;
  for (const auto& v : t.nodes) z += v.depth == t.depth;
  return z;
}

double lowest(const Tree& t) {
  double m = 1e9;
  for (const auto& v : t.nodes)
    if (v.depth == t.depth) m = std::min(m, v.position);
  return m;
}

}  // namespace

TEST_CASE("many-to-one examples") {
  for (const char* name : {"ssrw-coupled", "ssrw-ln2", "binary-lattice2"}) {
    auto r = exact_expectation(*builtin_law(name), 1, [](std::span<const double>) { return 1.0; });
    CHECK(r.tree_side == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(r.walk_side == doctest::Approx(1.0).epsilon(1e-14));
  }
  auto nonneg = [](std::span<const double> p) {
    return std::all_of(p.begin(), p.end(), [](double v) { return v >= 0; }) ? 1.0 : 0.0;
  };
  auto r = exact_expectation(coupled(), 3, nonneg);
  CHECK(r.walk_side == doctest::Approx(3.0 / 8).epsilon(1e-15));
  CHECK(r.tree_side == doctest::Approx(3.0 / 8).epsilon(1e-13));
  CHECK(r.walk_terms == 8);
  CHECK(r.tree_terms == 512);

  const Renewal R = renewal_for_depth(coupled(), 2, 0.0);
  auto weighted = [&](std::span<const double> p) { return nonneg(p) * R(p.back()); };
  r = exact_expectation(coupled(), 2, weighted);
  CHECK(r.walk_side == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(r.tree_side == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("many-to-one battery, lineage and full-tree enumeration") {
  const Renewal Rc = renewal_for_depth(coupled(), 5, 1.0);
  const Renewal Rr = tabulated_renewal(root_found(), 1.0 + 5 * 3.0);
  for (auto [law, R] : {std::pair{&coupled(), &Rc}, std::pair{&root_found(), &Rr}}) {
    for (const auto& f : functional_battery(*R)) {
      for (int n = 1; n <= 5; ++n) {
        CAPTURE(law->name());
        CAPTURE(f.name);
        CAPTURE(n);
        const auto r = exact_expectation(*law, n, f.f);
        CHECK(std::abs(r.tree_side - r.walk_side) <= 1e-10);
        if (count_trees(*law, n) < 1e5 || (n == 3 && f.name == "min>=0")) {
          const auto full = exact_expectation(*law, n, f.f, TreeMethod::FullTree);
          CHECK(std::abs(full.tree_side - r.walk_side) <= 1e-10);
        }
      }
    }
  }
}

TEST_CASE("many-to-one on random boundary laws") {
  int tested = 0;
  for (std::uint64_t seed = 1; tested < 25 && seed < 400; ++seed) {
    const auto raw = testing::random_integer_law(seed);
    std::optional<OffspringLaw> law;
    try {
      law = normalize_to_boundary(raw).law;
    } catch (const Error&) {
      continue;
    }
    ++tested;
    CAPTURE(seed);
    auto f = [](std::span<const double> p) {
      double m = 0;
      for (double v : p) m = std::min(m, v);
      return std::sin(p.back()) + (m > -1.5 ? 1.0 : 0.0);
    };
    for (int n = 1; n <= 3; ++n) {
      try {
        const auto r = exact_expectation(*law, n, f);
        CHECK(std::abs(r.tree_side - r.walk_side) <= 1e-10);
      } catch (const BudgetError&) {
      }
    }
  }
  CHECK(tested == 25);
}

TEST_CASE("budget refusals carry the exact count") {
  EnumerationBudget small;
  small.max_trees = 1000;
  try {
    exact_expectation(coupled(), 4, [](std::span<const double>) { return 1.0; }, TreeMethod::Lineage, small);
    FAIL("expected BudgetError");
  } catch (const BudgetError& e) {
    CHECK(e.required() == 4096.0);
  }
  CHECK(count_trees(coupled(), 2) == 100.0);
  CHECK(count_trees(coupled(), 3) == 1020100.0);
  try {
    enumerate_trees(coupled(), 4, [](const Tree&, double) {});
    FAIL("expected BudgetError");
  } catch (const BudgetError& e) {
    CHECK(e.required() > 1e17);
  }
  EnumerationBudget shallow;
  shallow.max_depth = 2;
  CHECK_THROWS_AS(exact_spine_marginal(coupled(), 0.0, 3, 0.0, nullptr, shallow), BudgetError);
}

TEST_CASE("enumerated trees carry total probability one") {
  for (int d = 0; d <= 3; ++d) {
    NeumaierSum mass;
    std::uint64_t trees = 0;
    enumerate_trees(coupled(), d, [&](const Tree& t, double p) {
      mass += p;
      ++trees;
      CHECK(t.depth == d);
    });
    CHECK(mass.value() == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(static_cast<double>(trees) == count_trees(coupled(), d));
  }
}

TEST_CASE("martingale gaps") {
  for (int n = 1; n <= 3; ++n) {
    for (double alpha : {0.0, 1.0, 2.0}) {
      CAPTURE(n);
      CAPTURE(alpha);
      CHECK(exact_martingale_gap(coupled(), alpha, n) <= 1e-10);
    }
    CHECK(exact_martingale_gap(coupled(), 0.0, n, MartingaleKind::W) <= 1e-12);
    CHECK(exact_martingale_gap(coupled(), 0.0, n, MartingaleKind::D) <= 1e-12);
    CHECK(exact_martingale_gap(ln2law(), 1.0, n) <= 1e-10);
  }
  for (const char* name : {"ssrw-ln2", "binary-lattice2"})
    CHECK(exact_martingale_gap(*builtin_law(name), 0.0, 1) <= 1e-10);

  // move eps of probability between atoms; keep the renewal of the unperturbed law
  auto atoms = coupled().atoms();
  atoms[0].prob -= 0.01;
  atoms[1].prob += 0.01;
  const OffspringLaw perturbed(atoms, "perturbed");
  const Renewal R = renewal_for_depth(coupled(), 3, 1.0);
  CHECK(exact_martingale_gap(perturbed, 1.0, 2, MartingaleKind::D_alpha, &R) > 1e-4);
  CHECK(exact_martingale_gap(perturbed, 0.0, 2, MartingaleKind::W) > 1e-4);
}

TEST_CASE("spine marginal examples") {
  auto m1 = exact_spine_marginal(coupled(), 0.0, 1);
  REQUIRE(m1.size() == 1);
  CHECK(m1.at(1) == doctest::Approx(1.0).epsilon(1e-15));
  auto m2 = exact_spine_marginal(coupled(), 0.0, 2);
  REQUIRE(m2.size() == 2);
  CHECK(m2.at(0) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(m2.at(2) == doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("spine marginals are distributions and match the killed-walk DP") {
  for (const char* name : {"ssrw-coupled", "ssrw-ln2", "binary-lattice2"}) {
    const auto law = *builtin_law(name);
    const StepLaw step = derive_step_law(law);
    for (double alpha : {0.0, 1.0, 2.0}) {
      for (int n = 0; n <= 7; ++n) {
        CAPTURE(name);
        CAPTURE(alpha);
        CAPTURE(n);
        const Renewal R = renewal_for_depth(law, n + 2, alpha);
        const auto m = exact_spine_marginal(law, alpha, n, 0.0, &R);
        double mass = 0;
        for (auto [site, p] : m) mass += p;
        CHECK(std::abs(mass - 1.0) <= 1e-12);
        const auto dp = h_transform_marginal(step, R, alpha, 0.0, n);
        for (auto [site, p] : m) CHECK(std::abs(p - (dp.count(site) ? dp.at(site) : 0.0)) <= 1e-12);
      }
    }
  }
}

TEST_CASE("oracle values do not depend on enumeration order") {
  const Renewal R = renewal_for_depth(coupled(), 4, 1.0);
  const auto battery = functional_battery(R);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto law = shuffled(coupled(), seed);
    for (const auto& f : battery) {
      const auto a = exact_expectation(coupled(), 4, f.f);
      const auto b = exact_expectation(law, 4, f.f);
      CHECK(std::abs(a.tree_side - b.tree_side) <= 1e-12);
    }
    CHECK(std::abs(exact_martingale_gap(law, 1.0, 3, MartingaleKind::D_alpha, &R) -
                   exact_martingale_gap(coupled(), 1.0, 3, MartingaleKind::D_alpha, &R)) <= 1e-12);
    const auto m1 = exact_spine_marginal(law, 1.0, 4, 0.0, &R);
    const auto m2 = exact_spine_marginal(coupled(), 1.0, 4, 0.0, &R);
    for (auto [site, p] : m1) CHECK(std::abs(p - m2.at(site)) <= 1e-12);
    const EventWindowSpec spec(4, 0.3, 2.0);
    CHECK(std::abs(exact_event_probability(law, spec) - exact_event_probability(coupled(), spec)) <= 1e-12);
  }
}

TEST_CASE("measure change consistency on enumerated trees") {
  std::vector<std::pair<const char*, TreeFunctional>> fs = {
      {"one", [](const Tree&) { return 1.0; }},
      {"Z", population},
      {"min", [](const Tree& t) { return population(t) > 0 ? lowest(t) : 0.0; }},
      {"extinct", [](const Tree& t) { return population(t) == 0 ? 1.0 : 0.0; }},
      {"nodes", [](const Tree& t) { return static_cast<double>(t.nodes.size()); }},
  };
  for (double alpha : {0.0, 1.0}) {
    for (int n = 1; n <= 4; ++n) {
      const Renewal R = renewal_for_depth(ln2law(), n, alpha);
      for (const auto& [name, f] : fs) {
        CAPTURE(name);
        CAPTURE(n);
        CAPTURE(alpha);
        const double p = exact_tilted_expectation(ln2law(), alpha, n, f, R);
        const double q = exact_spine_expectation(ln2law(), alpha, n, f, R);
        CHECK(std::abs(p - q) <= 1e-10);
      }
      CHECK(spine_conditional_gap(ln2law(), alpha, n, R) <= 1e-12);
    }
  }
  const Renewal R = renewal_for_depth(coupled(), 2, 0.0);
  CHECK(exact_spine_expectation(coupled(), 0.0, 2, [](const Tree&) { return 1.0; }, R) ==
        doctest::Approx(1.0).epsilon(1e-13));
  CHECK(spine_conditional_gap(coupled(), 0.0, 2, R) <= 1e-12);
}

TEST_CASE("event recursion agrees with brute-force tree enumeration") {
  const double lmax = std::log(4.0) / 3;
  for (double lambda : {0.0, lmax / 2, lmax}) {
    for (double K : {0.5, 1.0, 2.0}) {
      CAPTURE(lambda);
      CAPTURE(K);
      const EventWindowSpec spec(4, lambda, K);
      const auto brute = enumerate_event_probability(ln2law(), spec);
      CHECK(brute.disagreements == 0);
      CHECK(static_cast<double>(brute.trees) == brute.expected_trees);
      CHECK(brute.total_mass == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(std::abs(brute.probability - exact_event_probability(ln2law(), spec)) <= 1e-12);
    }
  }
  for (double K : {2.0, 10.0}) {
    const EventWindowSpec spec(3, 0.2, K);
    const auto brute = enumerate_event_probability(ln2law(), spec);
    CHECK(brute.disagreements == 0);
    CHECK(std::abs(brute.probability - exact_event_probability(ln2law(), spec)) <= 1e-12);
  }
  const EventWindowSpec a(4, 0.0, 2.0), b(3, 0.0, 3.0);
  const auto joint = enumerate_event_probability(ln2law(), a, &b);
  CHECK(joint.disagreements == 0);
  CHECK(static_cast<double>(joint.trees) == joint.expected_trees);
  CHECK(joint.probability > 0.0);
  CHECK(std::abs(joint.probability - exact_joint_event_probability(ln2law(), a, b)) <= 1e-12);
  for (double K : {0.5, 1.0}) {
    const EventWindowSpec spec(2, 0.2, K);
    const auto brute = enumerate_event_probability(coupled(), spec);
    CHECK(brute.disagreements == 0);
    CHECK(std::abs(brute.probability - exact_event_probability(coupled(), spec)) <= 1e-12);
  }
}

TEST_CASE("event probability against engine frequencies") {
  for (double lambda = 0.0; lambda <= std::log(16.0) / 3; lambda += 0.1) {
    const double p = exact_event_probability(coupled(), EventWindowSpec(16, lambda, 10.0));
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
  }
  const EventWindowSpec spec(6, 0.3, 2.0);
  const double exact = exact_event_probability(coupled(), spec);
  SimulateOptions o;
  o.events = {spec};
  o.events_only = true;
  RunningStats hits;
  for (std::uint64_t r = 0; r < 20000; ++r)
    hits.add(simulate(coupled(), 1, 0.0, PrunePolicy{}, derive_seed(11, r), o).events[0].occurred ? 1.0 : 0.0);
  CAPTURE(exact);
  CHECK(std::abs(hits.mean() - exact) <= 4 * hits.stderr_mean());
  CHECK_THROWS_AS(exact_event_probability(root_found(), EventWindowSpec(4, 0.0)), PreconditionError);
}
