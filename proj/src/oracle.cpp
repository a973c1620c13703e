#include "brw/oracle.hpp"

#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <tuple>

#include "brw/error.hpp"
#include "brw/numeric.hpp"

namespace brw {

namespace {

void check_depth(int n, const EnumerationBudget& budget, const char* who) {
  if (n < 0) throw PreconditionError(std::string(who) + ": depth must be nonnegative");
  if (n > budget.max_depth) {
    std::ostringstream os;
    os << who << ": depth " << n << " exceeds budget max_depth " << budget.max_depth;
    throw BudgetError(os.str(), n);
  }
}

void check_count(double count, const EnumerationBudget& budget, const char* who) {
  if (count > static_cast<double>(budget.max_trees)) {
    std::ostringstream os;
    os.precision(17);
    os << who << ": " << count << " outcomes exceed budget max_trees " << budget.max_trees;
    throw BudgetError(os.str(), count);
  }
}

void check_arity(const OffspringLaw& law, const EnumerationBudget& budget, const char* who) {
  if (law.max_arity() > budget.arity) {
    std::ostringstream os;
    os << who << ": law arity " << law.max_arity() << " exceeds budget arity " << budget.arity;
    throw BudgetError(os.str(), static_cast<double>(law.max_arity()));
  }
}

double lattice_h(const OffspringLaw& law, const char* who) {
  auto h = law.lattice_span();
  if (!h) throw PreconditionError(std::string(who) + ": law " + law.name() + " is not lattice");
  return *h;
}

// R_alpha(y) e^{-y} 1{y >= -alpha}
double spine_weight(const Renewal& R, double alpha, double y) {
  if (y < -alpha - kWindowEps) return 0.0;
  return R(std::max(0.0, alpha + y)) * std::exp(-y);
}

std::optional<Renewal> own_renewal(const OffspringLaw& law, int n, double alpha,
                                   const Renewal* given) {
  if (given) return std::nullopt;
  return renewal_for_depth(law, n, alpha);
}

std::vector<double> line_of(const Tree& t, std::int64_t node) {
  std::vector<double> path(t.nodes[node].depth + 1);
  for (std::int64_t v = node; v >= 0; v = t.nodes[v].parent) path[t.nodes[v].depth] = t.nodes[v].position;
  return path;
}

bool line_above(const Tree& t, std::int64_t node, double alpha) {
  for (std::int64_t v = node; v >= 0; v = t.nodes[v].parent)
    if (t.nodes[v].position < -alpha - kWindowEps) return false;
  return true;
}

// Expands nodes in breadth-first order; `expand(node)` says whether a node gets an atom.
class TreeWalker {
 public:
  TreeWalker(const OffspringLaw& law, int depth, std::function<bool(const Tree&, std::size_t)> expand,
             const std::function<void(const Tree&, double)>& visit)
      : law_(law), depth_(depth), expand_(std::move(expand)), visit_(visit) {
    tree_.depth = depth;
    tree_.complete = true;
    tree_.nodes.push_back(Tree::Node{});
  }
  std::uint64_t run() {
    rec(0, 1.0);
    return visited_;
  }

 private:
  void rec(std::size_t idx, double prob) {
    while (idx < tree_.nodes.size() &&
           (tree_.nodes[idx].depth >= depth_ || !expand_(tree_, idx)))
      ++idx;
    if (idx == tree_.nodes.size()) {
      ++visited_;
      visit_(tree_, prob);
      return;
    }
    const auto before = tree_.nodes.size();
    const double x = tree_.nodes[idx].position;
    const int d = tree_.nodes[idx].depth;
    for (const auto& atom : law_.atoms()) {
      tree_.nodes[idx].child_count = static_cast<int>(atom.children.size());
      tree_.nodes[idx].first_child = atom.children.empty() ? -1 : static_cast<std::int64_t>(before);
      for (double c : atom.children)
        tree_.nodes.push_back(Tree::Node{static_cast<std::int64_t>(idx), d + 1, x + c, -1, 0});
      rec(idx + 1, prob * atom.prob);
      tree_.nodes.resize(before);
    }
    tree_.nodes[idx].child_count = 0;
    tree_.nodes[idx].first_child = -1;
  }

  const OffspringLaw& law_;
  int depth_;
  std::function<bool(const Tree&, std::size_t)> expand_;
  const std::function<void(const Tree&, double)>& visit_;
  Tree tree_;
  std::uint64_t visited_ = 0;
};

// Collects the per-tree D_n, W_n and spine data for the measure-change checks.
struct SpineTreeData {
  double W = 0.0, D = 0.0;
  NeumaierSum q_mass, q_inv_R;  // sum over spines of the Q/P ratio, and of ratio / R_alpha(V(xi_n))
};

SpineTreeData spine_data(const Tree& t, int n, double alpha, const Renewal& R) {
  SpineTreeData out;
  NeumaierSum W, D;
  for (std::size_t v = 0; v < t.nodes.size(); ++v) {
    const auto& node = t.nodes[v];
    if (node.depth != n || !line_above(t, static_cast<std::int64_t>(v), alpha)) continue;
    W += std::exp(-node.position);
    D += spine_weight(R, alpha, node.position);
  }
  out.W = W.value();
  out.D = D.value();
  // Spines built step by step: offspring tilt sum_j w(x + c_j) / w(x), then pick w(child) / sum_j w.
  std::function<void(std::size_t, double)> walk = [&](std::size_t v, double ratio) {
    const auto& node = t.nodes[v];
    if (node.depth == n) {
      out.q_mass += ratio;
      out.q_inv_R += ratio / R(std::max(0.0, alpha + node.position));
      return;
    }
    const double wx = spine_weight(R, alpha, node.position);
    NeumaierSum total;
    for (int j = 0; j < node.child_count; ++j)
      total += spine_weight(R, alpha, t.nodes[node.first_child + j].position);
    if (total.value() <= 0.0) return;
    const double tilt = total.value() / wx;
    for (int j = 0; j < node.child_count; ++j) {
      const auto c = static_cast<std::size_t>(node.first_child + j);
      const double pick = spine_weight(R, alpha, t.nodes[c].position) / total.value();
      if (pick > 0.0) walk(c, ratio * tilt * pick);
    }
  };
  if (spine_weight(R, alpha, t.nodes[0].position) > 0.0) walk(0, 1.0);
  return out;
}

}  // namespace

double count_trees(const OffspringLaw& law, int depth) {
  double t = 1.0;
  for (int d = 1; d <= depth; ++d) {
    double next = 0.0;
    for (const auto& a : law.atoms()) next += std::pow(t, static_cast<double>(a.children.size()));
    t = next;
  }
  return t;
}

void enumerate_trees(const OffspringLaw& law, int depth,
                     const std::function<void(const Tree&, double)>& visit,
                     const EnumerationBudget& budget) {
  check_depth(depth, budget, "enumerate_trees");
  check_arity(law, budget, "enumerate_trees");
  check_count(count_trees(law, depth), budget, "enumerate_trees");
  TreeWalker(law, depth, [](const Tree&, std::size_t) { return true; }, visit).run();
}

ManyToOne exact_expectation(const OffspringLaw& law, int n, const PathFunctional& f,
                            TreeMethod method, const EnumerationBudget& budget) {
  check_depth(n, budget, "exact_expectation");
  ManyToOne out;
  const StepLaw step = derive_step_law(law);
  out.walk_terms = static_cast<std::uint64_t>(std::llround(std::pow(step.support.size(), n)));
  check_count(std::pow(static_cast<double>(step.support.size()), n), budget, "exact_expectation");

  std::vector<double> path{0.0};
  NeumaierSum tree;
  if (method == TreeMethod::Lineage) {
    const double lines = std::pow(static_cast<double>(law.total_children()), n);
    check_count(lines, budget, "exact_expectation");
    out.tree_terms = static_cast<std::uint64_t>(lines);
    std::function<void(double)> rec = [&](double prob) {
      if (static_cast<int>(path.size()) == n + 1) {
        tree += prob * std::exp(-path.back()) * f(path);
        return;
      }
      const double x = path.back();
      for (const auto& a : law.atoms()) {
        for (double c : a.children) {
          path.push_back(x + c);
          rec(prob * a.prob);
          path.pop_back();
        }
      }
    };
    rec(1.0);
  } else {
    check_arity(law, budget, "exact_expectation");
    const double trees = count_trees(law, n);
    check_count(trees, budget, "exact_expectation");
    out.tree_terms = static_cast<std::uint64_t>(trees);
    enumerate_trees(law, n, [&](const Tree& t, double prob) {
      for (std::size_t v = 0; v < t.nodes.size(); ++v) {
        if (t.nodes[v].depth != n) continue;
        tree += prob * std::exp(-t.nodes[v].position) * f(line_of(t, static_cast<std::int64_t>(v)));
      }
    }, budget);
  }
  out.tree_side = tree.value();

  NeumaierSum walk;
  path.assign(1, 0.0);
  std::function<void(double)> rec = [&](double prob) {
    if (static_cast<int>(path.size()) == n + 1) {
      walk += prob * f(path);
      return;
    }
    const double x = path.back();
    for (const auto& [v, p] : step.support) {
      path.push_back(x + v);
      rec(prob * p);
      path.pop_back();
    }
  };
  rec(1.0);
  out.walk_side = walk.value();
  return out;
}

std::vector<NamedFunctional> functional_battery(const Renewal& R) {
  std::vector<NamedFunctional> out;
  out.push_back({"one", [](std::span<const double>) { return 1.0; }});
  out.push_back({"const-2.5", [](std::span<const double>) { return 2.5; }});
  auto above = [](double level) {
    return [level](std::span<const double> p) {
      for (double v : p)
        if (v < level - kWindowEps) return 0.0;
      return 1.0;
    };
  };
  out.push_back({"min>=0", above(0.0)});
  out.push_back({"min>=-1", above(-1.0)});
  out.push_back({"end>=0", [](std::span<const double> p) { return p.back() >= -kWindowEps ? 1.0 : 0.0; }});
  out.push_back({"end", [](std::span<const double> p) { return p.back(); }});
  out.push_back({"first", [](std::span<const double> p) { return p.size() > 1 ? p[1] : p[0]; }});
  out.push_back({"end^2", [](std::span<const double> p) { return p.back() * p.back(); }});
  out.push_back({"max", [](std::span<const double> p) {
                   double m = p[0];
                   for (double v : p) m = std::max(m, v);
                   return m;
                 }});
  for (double alpha : {0.0, 1.0}) {
    std::ostringstream name;
    name << "R_alpha(end)1{min>=-alpha},alpha=" << alpha;
    out.push_back({name.str(), [alpha, &R, above](std::span<const double> p) {
                     if (above(-alpha)(p) == 0.0) return 0.0;
                     return R(std::max(0.0, alpha + p.back()));
                   }});
  }
  return out;
}

double exact_martingale_gap(const OffspringLaw& law, double alpha, int n, MartingaleKind kind,
                            const Renewal* renewal, const EnumerationBudget& budget) {
  if (n < 1) throw PreconditionError("exact_martingale_gap: n must be at least 1");
  std::optional<Renewal> own;
  if (kind == MartingaleKind::D_alpha) {
    own = own_renewal(law, n, alpha, renewal);
    if (own) renewal = &*own;
  }
  auto value = [&](double x) {
    switch (kind) {
      case MartingaleKind::W: return std::exp(-x);
      case MartingaleKind::D: return x * std::exp(-x);
      case MartingaleKind::D_alpha: return spine_weight(*renewal, alpha, x);
    }
    return 0.0;
  };
  // one-step conditional expectation of a particle's contribution
  auto step = [&](double x) {
    NeumaierSum s;
    for (const auto& a : law.atoms())
      for (double c : a.children) s += a.prob * value(x + c);
    return s.value();
  };
  double gap = 0.0;
  enumerate_trees(law, n - 1, [&](const Tree& t, double) {
    NeumaierSum now, next;
    for (std::size_t v = 0; v < t.nodes.size(); ++v) {
      if (t.nodes[v].depth != n - 1) continue;
      if (kind == MartingaleKind::D_alpha && !line_above(t, static_cast<std::int64_t>(v), alpha)) continue;
      now += value(t.nodes[v].position);
      next += step(t.nodes[v].position);
    }
    gap = std::max(gap, std::abs(next.value() - now.value()));
  }, budget);
  return gap;
}

std::map<std::int64_t, double> exact_spine_marginal(const OffspringLaw& law, double alpha, int n,
                                                    double x, const Renewal* renewal,
                                                    const EnumerationBudget& budget) {
  check_depth(n, budget, "exact_spine_marginal");
  const double h = lattice_h(law, "exact_spine_marginal");
  if (x < -alpha) throw PreconditionError("exact_spine_marginal: start below the barrier");
  auto own = own_renewal(law, n + static_cast<int>(std::ceil(std::max(0.0, x) / h)) + 1, alpha, renewal);
  const Renewal& R = renewal ? *renewal : *own;
  const StepLaw step = derive_step_law(law);
  check_count(std::pow(static_cast<double>(step.support.size()), n), budget, "exact_spine_marginal");
  const double Rx = R(alpha + x);
  std::map<std::int64_t, NeumaierSum> acc;
  std::function<void(int, double, double)> rec = [&](int k, double pos, double prob) {
    if (pos < -alpha - kWindowEps) return;
    if (k == n) {
      acc[std::llround(pos / h)] += prob * R(std::max(0.0, alpha + pos)) / Rx;
      return;
    }
    for (const auto& [v, p] : step.support) rec(k + 1, pos + v, prob * p);
  };
  rec(0, x, 1.0);
  std::map<std::int64_t, double> out;
  for (auto& [site, s] : acc)
    if (s.value() > 0.0) out[site] = s.value();
  return out;
}

double exact_tilted_expectation(const OffspringLaw& law, double alpha, int n,
                                const TreeFunctional& f, const Renewal& renewal,
                                const EnumerationBudget& budget) {
  const double D0 = spine_weight(renewal, alpha, 0.0);
  if (D0 <= 0.0) throw PreconditionError("exact_tilted_expectation: D_0 must be positive");
  NeumaierSum acc;
  enumerate_trees(law, n, [&](const Tree& t, double prob) {
    NeumaierSum D;
    for (std::size_t v = 0; v < t.nodes.size(); ++v)
      if (t.nodes[v].depth == n && line_above(t, static_cast<std::int64_t>(v), alpha))
        D += spine_weight(renewal, alpha, t.nodes[v].position);
    if (D.value() > 0.0) acc += prob * f(t) * D.value() / D0;
  }, budget);
  return acc.value();
}

double exact_spine_expectation(const OffspringLaw& law, double alpha, int n,
                               const TreeFunctional& f, const Renewal& renewal,
                               const EnumerationBudget& budget) {
  NeumaierSum acc;
  enumerate_trees(law, n, [&](const Tree& t, double prob) {
    const auto d = spine_data(t, n, alpha, renewal);
    if (d.q_mass.value() > 0.0) acc += prob * d.q_mass.value() * f(t);
  }, budget);
  return acc.value();
}

double spine_conditional_gap(const OffspringLaw& law, double alpha, int n, const Renewal& renewal,
                             const EnumerationBudget& budget) {
  double gap = 0.0;
  enumerate_trees(law, n, [&](const Tree& t, double) {
    const auto d = spine_data(t, n, alpha, renewal);
    if (d.q_mass.value() <= 0.0) return;
    const double conditional = d.q_inv_R.value() / d.q_mass.value();
    gap = std::max(gap, std::abs(conditional - d.W / d.D));
  }, budget);
  return gap;
}

namespace {

class EventRecursion {
 public:
  EventRecursion(const OffspringLaw& law, std::vector<EventTracker> trackers)
      : law_(law), trackers_(std::move(trackers)) {
    h_ = lattice_h(law, "exact_event_probability");
    for (const auto& t : trackers_) depth_ = std::max(depth_, t.max_depth());
  }

  // P(no particle of the tree witnesses any of the events)
  double none() {
    State root{};
    for (std::size_t e = 0; e < trackers_.size(); ++e) root[e] = trackers_[e].root();
    return survive(0, 0, root);
  }

 private:
  using State = std::array<int, 2>;

  double survive(int i, std::int64_t site, const State& st) {
    if (i >= depth_) return 1.0;
    const auto key = std::make_tuple(i, site, st[0], st[1]);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    const double x = static_cast<double>(site) * h_;
    NeumaierSum total;
    std::vector<double> sib;
    for (const auto& atom : law_.atoms()) {
      sib.resize(atom.children.size());
      for (std::size_t j = 0; j < sib.size(); ++j) sib[j] = x + atom.children[j];
      double prod = 1.0;
      for (std::size_t j = 0; j < sib.size() && prod > 0.0; ++j) {
        const std::int64_t cs = site + std::llround(atom.children[j] / h_);
        const double cx = static_cast<double>(cs) * h_;
        State cst{EventTracker::kDead, EventTracker::kDead};
        bool live = false, hit = false;
        for (std::size_t e = 0; e < trackers_.size(); ++e) {
          const auto& tr = trackers_[e];
          if (i + 1 > tr.max_depth()) continue;
          cst[e] = tr.child(i, st[e], brother_sum(sib, j, tr.spec().a(i)), cx);
          if (tr.witness(i + 1, cst[e], cx)) hit = true;
          live = live || cst[e] >= 0;
        }
        if (hit) prod = 0.0;
        else if (live) prod *= survive(i + 1, cs, cst);
      }
      total += atom.prob * prod;
    }
    memo_.emplace(key, total.value());
    return total.value();
  }

  const OffspringLaw& law_;
  std::vector<EventTracker> trackers_;
  double h_ = 1.0;
  int depth_ = 0;
  std::map<std::tuple<int, std::int64_t, int, int>, double> memo_;
};

}  // namespace

double exact_event_probability(const OffspringLaw& law, const EventWindowSpec& spec) {
  return 1.0 - EventRecursion(law, {EventTracker(spec)}).none();
}

double exact_joint_event_probability(const OffspringLaw& law, const EventWindowSpec& first,
                                     const EventWindowSpec& second) {
  const double none1 = EventRecursion(law, {EventTracker(first)}).none();
  const double none2 = EventRecursion(law, {EventTracker(second)}).none();
  const double neither = EventRecursion(law, {EventTracker(first), EventTracker(second)}).none();
  return 1.0 - none1 - none2 + neither;
}

namespace {

// Verbatim membership test for E_k and F_k, with brothers found by scanning all nodes.
bool brute_member(const Tree& t, const EventWindowSpec& sp, std::int64_t u, int k) {
  const auto& node = t.nodes[static_cast<std::size_t>(u)];
  if (node.depth != k) return false;
  if (node.position < sp.s() - kWindowEps || node.position > sp.s() + sp.K + kWindowEps) return false;
  std::vector<std::int64_t> line(static_cast<std::size_t>(k) + 1);
  for (std::int64_t v = u; v >= 0; v = t.nodes[static_cast<std::size_t>(v)].parent)
    line[static_cast<std::size_t>(t.nodes[static_cast<std::size_t>(v)].depth)] = v;
  for (int i = 0; i <= k; ++i)
    if (t.nodes[static_cast<std::size_t>(line[static_cast<std::size_t>(i)])].position < sp.a(i) - kWindowEps)
      return false;
  for (int i = 0; i < k; ++i) {
    NeumaierSum mass;
    for (std::size_t v = 0; v < t.nodes.size(); ++v) {
      if (t.nodes[v].parent != line[static_cast<std::size_t>(i)]) continue;
      if (static_cast<std::int64_t>(v) == line[static_cast<std::size_t>(i) + 1]) continue;
      const double y = t.nodes[v].position - sp.a(i);
      mass += (1.0 + std::max(0.0, y)) * std::exp(-y);
    }
    if (mass.value() > sp.K * std::exp(-sp.b(i, k))) return false;
  }
  return true;
}

bool brute_occurred(const Tree& t, const EventWindowSpec& sp) {
  for (std::size_t v = 0; v < t.nodes.size(); ++v) {
    const int k = t.nodes[v].depth;
    if (k > sp.n && k <= 2 * sp.n && brute_member(t, sp, static_cast<std::int64_t>(v), k)) return true;
  }
  return false;
}

// Bit t set: every condition of E_k and F_k visible from generation d still holds
// for k = n + 1 + t along the line ending at (d, x) with brothers `brothers` at level d - 1.
unsigned viable_step(const EventWindowSpec& sp, unsigned mask, int d, double x, double brothers) {
  unsigned out = 0;
  for (int k = sp.n + 1; k <= 2 * sp.n; ++k) {
    const unsigned bit = 1u << (k - sp.n - 1);
    if (!(mask & bit) || k <= d) continue;
    if (x < sp.a(d) - kWindowEps) continue;
    if (d > 0 && brothers > sp.K * std::exp(-sp.b(d - 1, k))) continue;
    out |= bit;
  }
  return out;
}

}  // namespace

EventEnumeration enumerate_event_probability(const OffspringLaw& law, const EventWindowSpec& spec,
                                             const EventWindowSpec* second,
                                             const EnumerationBudget& budget) {
  const double h = lattice_h(law, "enumerate_event_probability");
  check_arity(law, budget, "enumerate_event_probability");
  const int depth = 2 * std::max(spec.n, second ? second->n : 0);
  check_depth(depth, budget, "enumerate_event_probability");
  if (std::max(spec.n, second ? second->n : 0) > 16)
    throw PreconditionError("enumerate_event_probability: n too large for the enumeration");
  const unsigned full1 = (1u << spec.n) - 1, full2 = second ? (1u << second->n) - 1 : 0u;

  // A node is expanded while some k > depth could still have a witness below it.
  auto expand = [&](const Tree& t, std::size_t v) {
    std::vector<std::int64_t> line(static_cast<std::size_t>(t.nodes[v].depth) + 1);
    for (std::int64_t u = static_cast<std::int64_t>(v); u >= 0; u = t.nodes[static_cast<std::size_t>(u)].parent)
      line[static_cast<std::size_t>(t.nodes[static_cast<std::size_t>(u)].depth)] = u;
    auto along = [&](const EventWindowSpec& sp, unsigned mask) {
      for (std::size_t d = 0; d < line.size() && mask; ++d) {
        const auto& node = t.nodes[static_cast<std::size_t>(line[d])];
        double brothers = 0.0;
        if (d > 0) {
          const auto& parent = t.nodes[static_cast<std::size_t>(node.parent)];
          std::vector<double> sib;
          for (int j = 0; j < parent.child_count; ++j)
            sib.push_back(t.nodes[static_cast<std::size_t>(parent.first_child + j)].position);
          brothers = brother_sum(sib, static_cast<std::size_t>(line[d] - parent.first_child),
                                 sp.a(static_cast<int>(d) - 1));
        }
        mask = viable_step(sp, mask, static_cast<int>(d), node.position, brothers);
      }
      return mask != 0;
    };
    return along(spec, full1) || (second && along(*second, full2));
  };

  // Exact outcome count of the restricted enumeration.
  std::map<std::tuple<int, std::int64_t, unsigned, unsigned>, double> memo;
  std::function<double(int, std::int64_t, unsigned, unsigned)> count =
      [&](int d, std::int64_t site, unsigned m1, unsigned m2) -> double {
    if (d >= depth || (m1 == 0 && m2 == 0)) return 1.0;
    const auto key = std::make_tuple(d, site, m1, m2);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    const double x = static_cast<double>(site) * h;
    double total = 0.0;
    std::vector<double> sib;
    for (const auto& a : law.atoms()) {
      sib.resize(a.children.size());
      for (std::size_t j = 0; j < sib.size(); ++j) sib[j] = x + a.children[j];
      double prod = 1.0;
      for (std::size_t j = 0; j < sib.size(); ++j) {
        const std::int64_t cs = site + std::llround(a.children[j] / h);
        const double cx = static_cast<double>(cs) * h;
        const unsigned c1 = viable_step(spec, m1, d + 1, cx, brother_sum(sib, j, spec.a(d)));
        const unsigned c2 = second ? viable_step(*second, m2, d + 1, cx, brother_sum(sib, j, second->a(d))) : 0u;
        prod *= count(d + 1, cs, c1, c2);
      }
      total += prod;
    }
    memo.emplace(key, total);
    return total;
  };
  EventEnumeration out;
  out.expected_trees = count(0, 0, viable_step(spec, full1, 0, 0.0, 0.0),
                             second ? viable_step(*second, full2, 0, 0.0, 0.0) : 0u);
  check_count(out.expected_trees, budget, "enumerate_event_probability");

  NeumaierSum hit, mass;
  out.trees = TreeWalker(law, depth, expand, [&](const Tree& t, double prob) {
    mass += prob;
    bool occurred = detect_events(t, spec).occurred;
    bool brute = brute_occurred(t, spec);
    if (second) {
      occurred = occurred && detect_events(t, *second).occurred;
      brute = brute && brute_occurred(t, *second);
    }
    if (occurred != brute) ++out.disagreements;
    if (brute) hit += prob;
  }).run();
  out.probability = hit.value();
  out.total_mass = mass.value();
  return out;
}

}  // namespace brw
