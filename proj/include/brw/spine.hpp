#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "brw/engine.hpp"
#include "brw/offspring.hpp"
#include "brw/rng.hpp"
#include "brw/stats.hpp"
#include "brw/walk.hpp"

namespace brw {

/// One draw of the BRW under Q^(alpha) with its spine.
struct SpineRealization {
  struct Subtree {
    double position = 0.0;
    int depth = 0;  // generation of the subtree root
  };
  std::vector<double> spine_positions;                  // V(xi_0..xi_n)
  std::vector<std::vector<double>> offspring_of_spine;  // positions of all children of xi_k
  std::vector<std::size_t> spine_child;                 // index of xi_{k+1} among them
  std::vector<Subtree> offspring_subtrees;              // roots of the untilted subtrees
  std::vector<DepthRecord> records;                     // whole tree, spine included
  std::vector<EventOutcome> events;
  double weight = 0.0;  // D_n^(alpha) / D_0^(alpha)
  double alpha = 0.0;
};

/// Tilted offspring law at a spine particle at x: atom a gets
/// p_a sum_j R_alpha(x+c_j) e^{-c_j} 1{x+c_j >= -alpha} / R_alpha(x).
std::vector<double> spine_atom_probs(const OffspringLaw& law, const Renewal& renewal, double alpha,
                                     double x);
/// Probability of each child becoming the next spine particle, proportional to
/// R_alpha(V) e^{-V} 1{V >= -alpha}.
std::vector<double> spine_child_probs(const Renewal& renewal, double alpha,
                                      const std::vector<double>& positions);

struct SpineOptions {
  std::vector<EventWindowSpec> events;  // at most two
  /// Cell cap for the off-spine occupancy population.
  std::uint64_t cap = 10'000'000;
};

/// Samples the spine construction to depth n on a lattice law: tilted offspring
/// along the spine, spine child chosen by R_alpha e^{-V}, every other child the
/// root of an independent P-subtree (evolved as counts per lattice site).
SpineRealization sample_spine_tree(const OffspringLaw& law, double alpha, int n,
                                   const Renewal& renewal, Stream& rng,
                                   const SpineOptions& options = {});

enum class SpineFunctionalKind { One, WRatio, SqrtNWAlpha, Event };

struct SpineFunctional {
  SpineFunctionalKind kind = SpineFunctionalKind::One;
  EventWindowSpec event;  // for Event
};

/// "one", "w-ratio", "sqrt-n-w-alpha", "event:A(n,lambda)" or "event:A(n,lambda,K)".
SpineFunctional parse_spine_functional(const std::string& text);
std::string to_string(const SpineFunctional& f);

/// Depth a replica must reach: n, or 2n' for A(n', lambda) when larger.
int spine_depth(const SpineFunctional& f, int n);

struct SpineSample {
  double value = 0.0;   // functional(tree)
  double weight = 0.0;  // D_m^(alpha) / D_0^(alpha) at the replica depth m
};

SpineSample spine_sample(const OffspringLaw& law, double alpha, int n, const SpineFunctional& f,
                         const Renewal& renewal, std::uint64_t seed);

struct ImportanceResult {
  Estimate estimate;
  std::uint64_t replicas = 0;
  std::uint64_t rejected = 0;  // zero or non-finite weights
};

/// Mean of functional(tree) D_0^(alpha) / D_m^(alpha) over spine replicas. This
/// estimates E_P[functional; D_m^(alpha) > 0], which is E_P[functional] when
/// the truncated tree cannot die out (for example when every atom has a child
/// with nonnegative displacement). Replica r uses seed derive_seed(seed, r).
ImportanceResult importance_estimate(const SpineFunctional& f, const OffspringLaw& law, double alpha,
                                     int n, std::uint64_t replicas, std::uint64_t seed,
                                     const Renewal* renewal = nullptr);

struct VarianceResult {
  Estimate mean;      // E_Q[sqrt(n) W_n^(alpha) / D_n^(alpha)], equal to h_alpha(n)
  double variance = 0.0;
  double variance_stderr = 0.0;
  double h_alpha_n = 0.0;
  double surrogate = 0.0;  // c (n^{-delta} + sup |h_{x+alpha}(n-k_n)/h_alpha(n) - 1|)
  int k_n = 0;
};

inline constexpr double kSurrogateC = 1.0;
inline constexpr double kSurrogateDelta = 0.25;

/// Var_Q(sqrt(n) W_n^(alpha)/D_n^(alpha)) over spine replicas with the comparison
/// surrogate, k_n = floor(n^{1/3}) and sup over lattice x in [k_n^{1/3}, k_n].
VarianceResult variance_functional(const OffspringLaw& law, double alpha, int n,
                                   std::uint64_t replicas, std::uint64_t seed,
                                   const Renewal* renewal = nullptr);

}  // namespace brw
