#pragma once

// Shared pieces of the occupancy (counts per lattice site) evolution.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <tuple>
#include <vector>

#include "brw/offspring.hpp"
#include "brw/rng.hpp"

namespace brw::detail {

inline constexpr int kMaxEvents = 2;

struct Cell {
  std::int64_t site;
  bool alpha_ok;
  std::array<int, kMaxEvents> ev;
  double count;
  auto key() const { return std::tie(site, alpha_ok, ev); }
};

inline constexpr double kExactCountLimit = 1125899906842624.0;  // 2^50

inline void multinomial(double count, const OffspringLaw& law, Stream& rng, std::vector<double>& out) {
  const auto& atoms = law.atoms();
  out.assign(atoms.size(), 0.0);
  if (count <= 32.0) {
    const auto c = static_cast<int>(count);
    for (int i = 0; i < c; ++i) out[law.sample_atom(rng)] += 1.0;
    return;
  }
  double remaining = count;
  double rest = 1.0;
  for (std::size_t a = 0; a + 1 < atoms.size() && remaining > 0.0; ++a) {
    const double p = std::clamp(rest > 0.0 ? atoms[a].prob / rest : 1.0, 0.0, 1.0);
    double m;
    if (remaining <= kExactCountLimit) {
      std::binomial_distribution<std::int64_t> bin(static_cast<std::int64_t>(remaining), p);
      m = static_cast<double>(bin(rng));
    } else {
      std::normal_distribution<double> nd(remaining * p, std::sqrt(remaining * p * (1.0 - p)));
      m = std::clamp(std::round(nd(rng)), 0.0, remaining);
    }
    out[a] = m;
    remaining -= m;
    rest -= atoms[a].prob;
  }
  out.back() += remaining;
}

inline void merge_cells(std::vector<Cell>& cells) {
  std::sort(cells.begin(), cells.end(), [](const Cell& x, const Cell& y) { return x.key() < y.key(); });
  std::size_t w = 0;
  for (std::size_t r = 0; r < cells.size(); ++r) {
    if (w > 0 && cells[w - 1].key() == cells[r].key()) {
      cells[w - 1].count += cells[r].count;
    } else {
      cells[w++] = cells[r];
    }
  }
  cells.resize(w);
}

}  // namespace brw::detail
