#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "brw/offspring.hpp"
#include "brw/rng.hpp"

namespace brw::testing {

/// Random law with 1..4 atoms, 0..3 children each, integer displacements in [-3, 3].
inline OffspringLaw random_integer_law(std::uint64_t seed) {
  Stream rng(seed);
  const int natoms = 1 + static_cast<int>(rng() % 4);
  std::vector<double> w(static_cast<std::size_t>(natoms));
  double total = 0.0;
  for (auto& x : w) total += (x = 0.05 + uniform01(rng));
  std::vector<Atom> atoms;
  double acc = 0.0;
  for (int i = 0; i < natoms; ++i) {
    Atom a;
    a.prob = i + 1 == natoms ? 1.0 - acc : w[static_cast<std::size_t>(i)] / total;
    acc += a.prob;
    const int k = static_cast<int>(rng() % 4);
    for (int j = 0; j < k; ++j) a.children.push_back(static_cast<double>(static_cast<int>(rng() % 7) - 3));
    atoms.push_back(std::move(a));
  }
  return OffspringLaw(std::move(atoms));
}

/// Expected number of children at the smallest displacement of the law.
inline double mass_at_minimum(const OffspringLaw& law) {
  double lo = INFINITY;
  for (const auto& a : law.atoms())
    for (double c : a.children)
      if (a.prob > 0) lo = std::min(lo, c);
  double m = 0.0;
  for (const auto& a : law.atoms())
    for (double c : a.children)
      if (c == lo) m += a.prob;
  return m;
}

}  // namespace brw::testing
