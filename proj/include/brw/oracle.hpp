#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "brw/engine.hpp"
#include "brw/offspring.hpp"
#include "brw/walk.hpp"

namespace brw {

struct EnumerationBudget {
  int max_depth = 12;
  std::uint64_t max_trees = 10'000'000;
  std::size_t arity = 8;
};

/// f(V(u_0), ..., V(u_n)) along an ancestral line.
using PathFunctional = std::function<double(std::span<const double>)>;
using TreeFunctional = std::function<double(const Tree&)>;

struct ManyToOne {
  double tree_side = 0.0;  // E[sum_{|u|=n} e^{-V(u)} f(path of u)]
  double walk_side = 0.0;  // E[f(S_0..S_n)]
  std::uint64_t tree_terms = 0;
  std::uint64_t walk_terms = 0;
};

enum class TreeMethod { Lineage, FullTree };

/// Both sides of the many-to-one identity at depth n. The tree side sums over
/// ancestral lines (atom and child choices per generation), or over every
/// labelled outcome tree with TreeMethod::FullTree; the walk side sums over all
/// step paths. Throws BudgetError carrying the exact term count.
ManyToOne exact_expectation(const OffspringLaw& law, int n, const PathFunctional& f,
                            TreeMethod method = TreeMethod::Lineage,
                            const EnumerationBudget& budget = {});

struct NamedFunctional {
  std::string name;
  PathFunctional f;
};

/// Constants, barrier indicators, coordinate projections and the R_alpha-weighted
/// barrier functional, for alpha in {0, 1}.
std::vector<NamedFunctional> functional_battery(const Renewal& renewal);

/// Number of labelled outcome trees of depth `depth`.
double count_trees(const OffspringLaw& law, int depth);

/// Visits every outcome tree of depth `depth` with its probability.
void enumerate_trees(const OffspringLaw& law, int depth,
                     const std::function<void(const Tree&, double)>& visit,
                     const EnumerationBudget& budget = {});

enum class MartingaleKind { W, D, D_alpha };

/// sup over depth-(n-1) histories of |E[X_n | history] - X_{n-1}|.
double exact_martingale_gap(const OffspringLaw& law, double alpha, int n,
                            MartingaleKind kind = MartingaleKind::D_alpha,
                            const Renewal* renewal = nullptr,
                            const EnumerationBudget& budget = {});

/// (1/R_alpha(x)) E_x[1{S_n = site} R_alpha(S_n) 1{min S >= -alpha}] by path
/// enumeration; keys are lattice indices.
std::map<std::int64_t, double> exact_spine_marginal(const OffspringLaw& law, double alpha, int n,
                                                    double x = 0.0,
                                                    const Renewal* renewal = nullptr,
                                                    const EnumerationBudget& budget = {});

/// E_P[f D_n^(alpha) / D_0^(alpha)] by enumeration of outcome trees.
double exact_tilted_expectation(const OffspringLaw& law, double alpha, int n,
                                const TreeFunctional& f, const Renewal& renewal,
                                const EnumerationBudget& budget = {});

/// E_Q[f] by enumerating (tree, spine) pairs under the spine construction:
/// spine offspring tilted by sum_j R_alpha(x+c_j) e^{-c_j} 1{x+c_j >= -alpha} / R_alpha(x),
/// spine child chosen proportionally to R_alpha(V) e^{-V}, other nodes untilted.
double exact_spine_expectation(const OffspringLaw& law, double alpha, int n,
                               const TreeFunctional& f, const Renewal& renewal,
                               const EnumerationBudget& budget = {});

/// max over trees of |E_Q[1/R_alpha(V(xi_n)) | F_n] - W_n^(alpha)/D_n^(alpha)|.
double spine_conditional_gap(const OffspringLaw& law, double alpha, int n, const Renewal& renewal,
                             const EnumerationBudget& budget = {});

/// P(A(n, lambda)) by an exact recursion over (generation, site, tracker state).
double exact_event_probability(const OffspringLaw& law, const EventWindowSpec& spec);
/// P(A(n, lambda) and A(m, mu)).
double exact_joint_event_probability(const OffspringLaw& law, const EventWindowSpec& first,
                                     const EventWindowSpec& second);

struct EventEnumeration {
  double probability = 0.0;
  double total_mass = 0.0;
  std::uint64_t trees = 0;
  double expected_trees = 0.0;
  std::uint64_t disagreements = 0;  // trees where detect_events and the brute-force check differ
};

/// P(A(n, lambda)) (or of the intersection with `second`) by enumerating every
/// outcome tree to depth 2n. A node is expanded only while, for some k beyond
/// its generation, every E_k and F_k condition visible so far holds on its line;
/// no other node can have a witness below it. Each tree is decided by a
/// brute-force membership check and compared with detect_events.
EventEnumeration enumerate_event_probability(const OffspringLaw& law, const EventWindowSpec& spec,
                                             const EventWindowSpec* second = nullptr,
                                             const EnumerationBudget& budget = {});

}  // namespace brw
