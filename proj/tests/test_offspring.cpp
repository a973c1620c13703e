#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "brw/error.hpp"
#include "brw/offspring.hpp"
#include "brw/stats.hpp"
#include "support.hpp"

using namespace brw;

TEST_CASE("two children at ln2 have unit mass and positive tilt") {
  const double l = std::numbers::ln2;
  const auto r = check_boundary(OffspringLaw({{1.0, {l, l}}}));
  CHECK(r.exp_mass == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(r.tilt_mean == doctest::Approx(l).epsilon(1e-15));
  CHECK_FALSE(r.boundary);
  CHECK(r.supercritical);
}

TEST_CASE("single child at the origin is critical") {
  const auto r = check_boundary(OffspringLaw({{1.0, {0.0}}}));
  CHECK(r.exp_mass == 1.0);
  CHECK(r.tilt_mean == 0.0);
  CHECK(r.mean_offspring == 1.0);
  CHECK_FALSE(r.supercritical);
  CHECK(r.boundary);
}

TEST_CASE("ssrw-coupled sits in the boundary case with unit variance") {
  const double e = std::numbers::e;
  // +1 children: mean e/2, weight e^{-1}; -1 child: probability 1/(2e), weight e.
  const double mass = std::exp(-1.0) * (e / 2) + e * (1 / (2 * e));
  const double tilt = std::exp(-1.0) * (e / 2) - e * (1 / (2 * e));
  const auto r = check_boundary(*builtin_law("ssrw-coupled"));
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(tilt) < 1e-15);
  CHECK(r.exp_mass == doctest::Approx(mass).epsilon(1e-14));
  CHECK(std::abs(r.tilt_mean) < 1e-14);
  CHECK(r.sigma2 == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(r.mean_offspring == doctest::Approx(e / 2 + 1 / (2 * e)).epsilon(1e-14));
  CHECK(r.boundary);
  CHECK(r.int1);
  CHECK(r.int2);
  CHECK(r.int3);
}

TEST_CASE("builtin laws are boundary laws") {
  for (const auto& name : builtin_law_names()) {
    CAPTURE(name);
    const auto law = builtin_law(name);
    REQUIRE(law);
    CHECK(check_boundary(*law).boundary);
    CHECK(law->lattice_span().has_value());
  }
  CHECK(*builtin_law("ssrw-ln2")->lattice_span() == doctest::Approx(std::numbers::ln2));
  CHECK(*builtin_law("ssrw-coupled")->lattice_span() == doctest::Approx(1.0));
  CHECK_FALSE(builtin_law("nope"));
}

TEST_CASE("lattice span detection") {
  CHECK(*OffspringLaw({{1.0, {2.0, -4.0, 6.0}}}).lattice_span() == doctest::Approx(2.0));
  CHECK(*OffspringLaw({{1.0, {0.5, 1.5}}}).lattice_span() == doctest::Approx(0.5));
  CHECK_FALSE(OffspringLaw({{1.0, {1.0, std::sqrt(2.0)}}}).lattice_span());
  CHECK_FALSE(OffspringLaw({{1.0, {0.0}}}).lattice_span());
}

TEST_CASE("validation names the defect") {
  CHECK_THROWS_AS(OffspringLaw({{0.5, {1.0}}, {0.4, {}}}), ValidationError);
  try {
    OffspringLaw({{0.5, {1.0}}, {-0.1, {}}, {0.6, {}}});
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("atom 1") != std::string::npos);
  }
  CHECK_THROWS_AS(OffspringLaw({{1.0, {NAN}}}), ValidationError);
  CHECK_NOTHROW(OffspringLaw({{0.5, {}}, {0.5 + 5e-13, {1.0}}}));
}

TEST_CASE("normalization of a boundary law is the identity") {
  const auto law = *builtin_law("ssrw-coupled");
  const auto n = normalize_to_boundary(law);
  CHECK(n.scale == 1.0);
  CHECK(n.drift == 0.0);
  CHECK(n.law.atoms().size() == law.atoms().size());
}

TEST_CASE("degenerate and subcritical laws cannot be normalized") {
  CHECK_THROWS_AS(normalize_to_boundary(OffspringLaw({{1.0, {0.0, 0.0}}})), InfeasibleError);
  CHECK_THROWS_AS(normalize_to_boundary(OffspringLaw({{0.1, {-1.0}}, {0.9, {1.0}}})), InfeasibleError);
  CHECK_THROWS_AS(normalize_to_boundary(OffspringLaw({{1.0, {}}})), InfeasibleError);
}

TEST_CASE("two-point law normalizes to the boundary") {
  const OffspringLaw law({{0.1, {-1.0, -1.0}}, {0.9, {1.0, 1.0}}});
  const auto n = normalize_to_boundary(law, 1e-12);
  const auto r = check_boundary(n.law);
  CHECK(std::abs(r.exp_mass - 1.0) < 1e-10);
  CHECK(std::abs(r.tilt_mean) < 1e-10);
  CHECK(n.scale > 0.0);
  // Scale solves log M0(theta) = -theta M1(theta) / M0(theta), M_k = E sum X^k e^{-theta X}.
  const double t = n.scale;
  const double m0 = 2 * (0.1 * std::exp(t) + 0.9 * std::exp(-t));
  const double m1 = 2 * (-0.1 * std::exp(t) + 0.9 * std::exp(-t));
  CHECK(std::log(m0) == doctest::Approx(-t * m1 / m0).epsilon(1e-9));
  CHECK(n.drift == doctest::Approx(std::log(m0)).epsilon(1e-12));
}

TEST_CASE("property: normalization succeeds exactly when a root exists") {
  int normalized = 0;
  for (std::uint64_t seed = 1; seed <= 400; ++seed) {
    const auto law = testing::random_integer_law(seed);
    CAPTURE(seed);
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& a : law.atoms())
      for (double c : a.children) lo = std::min(lo, c), hi = std::max(hi, c);
    const bool feasible = law.mean_offspring() > 1.0 && lo < hi && testing::mass_at_minimum(law) < 1.0;
    if (!feasible) {
      CHECK_THROWS_AS(normalize_to_boundary(law), InfeasibleError);
      continue;
    }
    const auto n = normalize_to_boundary(law);
    CHECK(check_boundary(n.law).boundary);
    ++normalized;
  }
  CHECK(normalized > 50);
}

TEST_CASE("property: report is invariant under permutations") {
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto law = testing::random_integer_law(seed);
    auto atoms = law.atoms();
    std::reverse(atoms.begin(), atoms.end());
    for (auto& a : atoms) std::reverse(a.children.begin(), a.children.end());
    const auto a = check_boundary(law);
    const auto b = check_boundary(OffspringLaw(atoms));
    CHECK(a.exp_mass == doctest::Approx(b.exp_mass).epsilon(1e-14));
    CHECK(a.tilt_mean == doctest::Approx(b.tilt_mean).epsilon(1e-14));
    CHECK(a.sigma2 == doctest::Approx(b.sigma2).epsilon(1e-14));
    CHECK(a.eta_log2_moment == doctest::Approx(b.eta_log2_moment).epsilon(1e-14));
    CHECK(a.eps0_moment == doctest::Approx(b.eps0_moment).epsilon(1e-14));
    CHECK(a.mean_offspring == doctest::Approx(b.mean_offspring).epsilon(1e-14));
  }
}

TEST_CASE("sampling follows the atom probabilities") {
  const auto law = *builtin_law("ssrw-coupled");
  Stream rng(20240611);
  const int draws = 1'000'000;
  std::vector<int> hits(law.atoms().size(), 0);
  RunningStats mass, tilt;
  for (int i = 0; i < draws; ++i) {
    const auto k = law.sample_atom(rng);
    ++hits[k];
    double m = 0, t = 0;
    for (double c : law.atoms()[k].children) m += std::exp(-c), t += c * std::exp(-c);
    mass.add(m);
    tilt.add(t);
  }
  for (std::size_t k = 0; k < hits.size(); ++k) {
    const double p = law.atoms()[k].prob;
    const double se = std::sqrt(p * (1 - p) / draws);
    CHECK(std::abs(hits[k] / double(draws) - p) < 4 * se);
  }
  CHECK(std::abs(mass.mean() - 1.0) < 4 * mass.stderr_mean());
  CHECK(std::abs(tilt.mean()) < 4 * tilt.stderr_mean());
}

TEST_CASE("sampling edge cases") {
  Stream rng(7);
  const OffspringLaw one({{1.0, {0.5, -0.25}}});
  for (int i = 0; i < 100; ++i) CHECK(sample_offspring(one, rng) == std::vector<double>{0.5, -0.25});
  const OffspringLaw ext({{0.5, {}}, {0.5, {1.0, 1.0}}});
  int empty = 0;
  for (int i = 0; i < 1000; ++i) empty += sample_offspring(ext, rng).empty();
  CHECK(empty > 400);
  CHECK(empty < 600);
}

TEST_CASE("JSON round trip and loading") {
  const auto law = *builtin_law("binary-lattice2");
  const auto back = law_from_json(law_to_json(law));
  CHECK(back.name() == "binary-lattice2");
  REQUIRE(back.atoms().size() == law.atoms().size());
  for (std::size_t i = 0; i < law.atoms().size(); ++i) {
    CHECK(back.atoms()[i].prob == law.atoms()[i].prob);
    CHECK(back.atoms()[i].children == law.atoms()[i].children);
  }
  const auto path = std::filesystem::temp_directory_path() / "brw_law_test.json";
  std::ofstream(path) << R"({"name": "coin", "atoms": [{"prob": 0.5, "children": []}, {"prob": 0.5, "children": [1, -1, 2]}]})";
  const auto loaded = load_law(path.string());
  CHECK(loaded.name() == "coin");
  CHECK(loaded.max_arity() == 3);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_law("/nonexistent/law.json"), NotFoundError);
  CHECK_THROWS_AS(law_from_json("{\"atoms\": [{\"prob\": 1}]}"), ValidationError);
  CHECK_THROWS_AS(law_from_json("not json"), ValidationError);
}
