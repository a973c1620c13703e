#include "brw/engine.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <tuple>

#include "brw/error.hpp"
#include "brw/numeric.hpp"
#include "brw/rng.hpp"
#include "occupancy.hpp"

namespace brw {

EventWindowSpec::EventWindowSpec(int n_, double lambda_, double K_) : n(n_), lambda(lambda_), K(K_) {
  if (n < 2) throw PreconditionError("event window: n must be >= 2");
  if (!(K > 0.0)) throw PreconditionError("event window: K must be positive");
}

double EventWindowSpec::s() const noexcept { return 0.5 * std::log(static_cast<double>(n)) - lambda; }

double EventWindowSpec::a(int i) const noexcept {
  return (2 * i > n && i <= 2 * n) ? s() : 0.0;
}

double EventWindowSpec::b(int i, int k) const noexcept {
  if (2 * i <= n) return std::pow(static_cast<double>(i), 1.0 / 12.0);
  return std::pow(static_cast<double>(k - i), 1.0 / 12.0);
}

bool EventWindowSpec::in_validity_range() const noexcept {
  return lambda >= 0.0 && lambda <= std::log(static_cast<double>(n)) / 3.0;
}

double brother_sum(std::span<const double> siblings, std::size_t self, double a) {
  double s = 0.0;
  for (std::size_t j = 0; j < siblings.size(); ++j) {
    if (j == self) continue;
    const double d = siblings[j] - a;
    s += (1.0 + std::max(d, 0.0)) * std::exp(-d);
  }
  return s;
}

int EventTracker::child(int i, int parent, double brothers, double x) const noexcept {
  if (parent < 0) return kDead;
  if (x < spec_.a(i + 1) - kWindowEps) return kDead;
  const int lo = std::max(spec_.n, i) + 1;
  int k = parent;
  while (k >= lo && brothers > spec_.K * std::exp(-spec_.b(i, k))) --k;
  return k >= lo ? k : kDead;
}

bool EventTracker::witness(int g, int state, double x) const noexcept {
  if (state < 0 || g <= spec_.n || g > 2 * spec_.n || g > state) return false;
  const double s = spec_.s();
  return x >= s - kWindowEps && x <= s + spec_.K + kWindowEps;
}

double PrunePolicy::level() const noexcept {
  const double floor_level = weight_floor > 0.0 ? -std::log(weight_floor) : std::numeric_limits<double>::infinity();
  return std::min(upper_level, floor_level);
}

bool PrunePolicy::active() const noexcept { return std::isfinite(level()); }

PrunePolicy prune_policy(double upper_level, double weight_floor, std::uint64_t cap) {
  PrunePolicy p{upper_level, weight_floor, cap};
  if (cap < 1) throw PreconditionError("prune policy: cap must be at least 1");
  if (std::isnan(upper_level) || std::isnan(weight_floor) || weight_floor < 0.0) {
    throw PreconditionError("prune policy: invalid level or weight floor");
  }
  if (p.level() < 0.0) throw PreconditionError("prune policy would prune the root");
  return p;
}

Renewal renewal_for_depth(const OffspringLaw& law, int n, double alpha) {
  double up = 0.0;
  for (const auto& a : law.atoms())
    for (double c : a.children) up = std::max(up, c);
  return Renewal::lattice(derive_step_law(law), alpha + n * up + 1.0);
}

namespace {

using detail::Cell;
using detail::kMaxEvents;
using detail::multinomial;

struct Sums {
  NeumaierSum W, D, Wa, Da, Z;
  double M = std::numeric_limits<double>::infinity();
  void add(double pos, double count, bool alpha_ok, const Renewal* R, double alpha) {
    const double w = count * std::exp(-pos);
    W += w;
    D += pos * w;
    Z += count;
    if (alpha_ok) {
      Wa += w;
      Da += R ? (*R)(alpha + pos) * w : std::numeric_limits<double>::quiet_NaN();
    }
    M = std::min(M, pos);
  }
  DepthRecord record(int k, double bound) const {
    DepthRecord r;
    r.k = k;
    r.Z = Z.value();
    r.extinct = r.Z == 0.0;
    if (!r.extinct) r.M = M;
    r.W = W.value();
    r.D = D.value();
    r.W_alpha = Wa.value();
    r.D_alpha = Da.value();
    r.pruned_weight_bound = bound;
    return r;
  }
};

double prune_bound(const PrunePolicy& prune, double sigma2, int k) {
  if (!prune.active()) return 0.0;
  const double L = prune.level();
  if (L <= 0.0) return 1.0;
  return std::min(1.0, sigma2 * k / (L * L));
}

void finish_extinct(TrajectoryStats& out, int from, int n, const PrunePolicy& prune, double sigma2) {
  for (int k = from; k <= n; ++k) {
    DepthRecord r;
    r.k = k;
    r.extinct = true;
    r.pruned_weight_bound = prune_bound(prune, sigma2, k);
    out.records.push_back(r);
  }
}

struct Particle {
  double pos;
  double minp;
  std::uint64_t key;
  std::array<int, kMaxEvents> ev;
};

TrajectoryStats run_particles(const OffspringLaw& law, int n, double alpha, const PrunePolicy& prune,
                              std::uint64_t seed, const SimulateOptions& opt,
                              const std::vector<EventTracker>& trackers, const Renewal* R,
                              double sigma2, int depth) {
  TrajectoryStats out;
  out.alpha = alpha;
  out.seed = seed;
  out.events.resize(trackers.size());
  const double L = prune.level();
  std::vector<Particle> cur{{0.0, 0.0, seed, {}}}, next;
  for (std::size_t e = 0; e < trackers.size(); ++e) cur[0].ev[e] = trackers[e].root();
  auto alpha_ok = [&](const Particle& p) { return p.minp >= -alpha - kWindowEps; };
  auto keep = [&](int k) {
    if (opt.keep_generations) {
      Generation g;
      g.depth = k;
      for (const auto& p : cur) {
        g.positions.push_back(p.pos);
        g.min_prefix.push_back(p.minp);
      }
      g.pruned_weight_bound = prune_bound(prune, sigma2, k);
      out.generations.push_back(std::move(g));
    }
  };
  if (!opt.events_only) {
    Sums s;
    s.add(0.0, 1.0, alpha >= 0.0, R, alpha);
    out.records.push_back(s.record(0, 0.0));
  }
  keep(0);
  std::vector<double> sib;
  for (int k = 1; k <= depth; ++k) {
    next.clear();
    for (const auto& p : cur) {
      const auto& kids = law.atoms()[law.atom_for(key_uniform(p.key))].children;
      sib.resize(kids.size());
      for (std::size_t j = 0; j < kids.size(); ++j) sib[j] = p.pos + kids[j];
      for (std::size_t j = 0; j < kids.size(); ++j) {
        Particle c{sib[j], std::min(p.minp, sib[j]), child_key(p.key, j), {}};
        bool live_event = false;
        for (std::size_t e = 0; e < trackers.size(); ++e) {
          const double a = trackers[e].spec().a(k - 1);
          c.ev[e] = k <= trackers[e].max_depth()
                        ? trackers[e].child(k - 1, p.ev[e], brother_sum(sib, j, a), c.pos)
                        : EventTracker::kDead;
          if (trackers[e].witness(k, c.ev[e], c.pos) && !out.events[e].occurred) {
            out.events[e].occurred = true;
            out.events[e].first_depth = k;
          }
          live_event = live_event || c.ev[e] >= 0;
        }
        if (c.pos < -alpha - kWindowEps) out.tree_above_barrier = false;
        if (c.pos > L) continue;
        if (opt.events_only && !live_event) continue;
        next.push_back(c);
      }
    }
    if (next.size() > prune.cap) {
      out.truncated = true;
      break;
    }
    cur.swap(next);
    if (opt.events_only) {
      bool all = true;
      for (const auto& e : out.events) all = all && e.occurred;
      if (all || cur.empty()) break;
      continue;
    }
    if (k <= n) {
      Sums s;
      for (const auto& p : cur) s.add(p.pos, 1.0, alpha_ok(p), R, alpha);
      out.records.push_back(s.record(k, prune_bound(prune, sigma2, k)));
      keep(k);
      if (cur.empty()) {
        finish_extinct(out, k + 1, n, prune, sigma2);
        break;
      }
    }
  }
  return out;
}

TrajectoryStats run_occupancy(const OffspringLaw& law, int n, double alpha, const PrunePolicy& prune,
                              std::uint64_t seed, const SimulateOptions& opt,
                              const std::vector<EventTracker>& trackers, const Renewal* R,
                              double sigma2, int depth) {
  TrajectoryStats out;
  out.alpha = alpha;
  out.seed = seed;
  out.events.resize(trackers.size());
  const double h = *law.lattice_span();
  const double L = prune.level();
  std::vector<std::vector<std::int64_t>> offs;
  for (const auto& a : law.atoms()) {
    offs.emplace_back();
    for (double c : a.children) offs.back().push_back(std::llround(c / h));
  }
  Stream rng(seed);
  std::vector<Cell> cur{{0, alpha >= 0.0, {}, 1.0}}, next;
  for (std::size_t e = 0; e < trackers.size(); ++e) cur[0].ev[e] = trackers[e].root();
  if (!opt.events_only) {
    Sums s;
    s.add(0.0, 1.0, alpha >= 0.0, R, alpha);
    out.records.push_back(s.record(0, 0.0));
  }
  std::vector<double> counts, sib;
  for (int k = 1; k <= depth; ++k) {
    next.clear();
    for (const auto& cell : cur) {
      multinomial(cell.count, law, rng, counts);
      for (std::size_t a = 0; a < offs.size(); ++a) {
        if (counts[a] == 0.0) continue;
        const auto& o = offs[a];
        sib.resize(o.size());
        for (std::size_t j = 0; j < o.size(); ++j) sib[j] = static_cast<double>(cell.site + o[j]) * h;
        for (std::size_t j = 0; j < o.size(); ++j) {
          Cell c{cell.site + o[j], cell.alpha_ok && sib[j] >= -alpha - kWindowEps, {}, counts[a]};
          bool live_event = false;
          for (std::size_t e = 0; e < trackers.size(); ++e) {
            const double thr = trackers[e].spec().a(k - 1);
            c.ev[e] = k <= trackers[e].max_depth()
                          ? trackers[e].child(k - 1, cell.ev[e], brother_sum(sib, j, thr), sib[j])
                          : EventTracker::kDead;
            if (trackers[e].witness(k, c.ev[e], sib[j]) && !out.events[e].occurred) {
              out.events[e].occurred = true;
              out.events[e].first_depth = k;
            }
            live_event = live_event || c.ev[e] >= 0;
          }
          if (sib[j] < -alpha - kWindowEps) out.tree_above_barrier = false;
          if (sib[j] > L) continue;
          if (opt.events_only && !live_event) continue;
          next.push_back(c);
        }
      }
    }
    detail::merge_cells(next);
    if (next.size() > prune.cap) {
      out.truncated = true;
      break;
    }
    cur.swap(next);
    if (opt.events_only) {
      bool all = true;
      for (const auto& e : out.events) all = all && e.occurred;
      if (all || cur.empty()) break;
      continue;
    }
    if (k <= n) {
      Sums s;
      for (const auto& c : cur) s.add(static_cast<double>(c.site) * h, c.count, c.alpha_ok, R, alpha);
      out.records.push_back(s.record(k, prune_bound(prune, sigma2, k)));
      if (cur.empty()) {
        finish_extinct(out, k + 1, n, prune, sigma2);
        break;
      }
    }
  }
  return out;
}

}  // namespace

TrajectoryStats simulate(const OffspringLaw& law, int n, double alpha, const PrunePolicy& prune,
                         std::uint64_t seed, const SimulateOptions& options) {
  if (n < 1) throw PreconditionError("simulate: n must be >= 1");
  if (options.events.size() > static_cast<std::size_t>(kMaxEvents)) {
    throw PreconditionError("simulate: at most two event windows per run");
  }
  std::vector<EventTracker> trackers;
  int depth = n;
  for (const auto& e : options.events) {
    trackers.emplace_back(e);
    if (options.events_only) {
      depth = std::max(depth, 2 * e.n);
    } else if (2 * e.n > n) {
      throw PreconditionError("simulate: event windows need depth 2n");
    }
  }
  const auto rep = check_boundary(law);
  const bool lattice = law.lattice_span().has_value();
  EngineMode mode = options.mode;
  if (mode == EngineMode::Auto) mode = lattice ? EngineMode::Occupancy : EngineMode::Particle;
  if (mode == EngineMode::Occupancy && !lattice) {
    throw PreconditionError("simulate: occupancy mode needs a lattice law");
  }
  if (mode == EngineMode::Occupancy && options.keep_generations) {
    throw PreconditionError("simulate: generations are only kept in particle mode");
  }
  std::optional<Renewal> own;
  const Renewal* R = options.renewal;
  if (!R && lattice && !options.events_only && rep.boundary) {
    own = renewal_for_depth(law, n, alpha);
    R = &*own;
  }
  if (mode == EngineMode::Occupancy) {
    return run_occupancy(law, n, alpha, prune, seed, options, trackers, R, rep.sigma2, depth);
  }
  return run_particles(law, n, alpha, prune, seed, options, trackers, R, rep.sigma2, depth);
}

Tree grow_tree(const OffspringLaw& law, int depth, std::uint64_t seed, std::uint64_t max_nodes) {
  Tree t;
  t.depth = depth;
  std::vector<std::uint64_t> keys{seed};
  t.nodes.push_back({});
  std::size_t begin = 0;
  for (int d = 0; d < depth; ++d) {
    const std::size_t end = t.nodes.size();
    for (std::size_t i = begin; i < end; ++i) {
      const auto& kids = law.atoms()[law.atom_for(key_uniform(keys[i]))].children;
      if (t.nodes.size() + kids.size() > max_nodes) {
        t.complete = false;
        return t;
      }
      t.nodes[i].first_child = static_cast<std::int64_t>(t.nodes.size());
      t.nodes[i].child_count = static_cast<int>(kids.size());
      const double pos = t.nodes[i].position;
      const std::uint64_t key = keys[i];
      for (std::size_t j = 0; j < kids.size(); ++j) {
        Tree::Node c;
        c.parent = static_cast<std::int64_t>(i);
        c.depth = d + 1;
        c.position = pos + kids[j];
        t.nodes.push_back(c);
        keys.push_back(child_key(key, j));
      }
    }
    begin = end;
  }
  return t;
}

EventDetection detect_events(const Tree& tree, const EventWindowSpec& spec) {
  if (!tree.complete) throw PreconditionError("detect_events: tree is incomplete (pruned or capped)");
  if (tree.depth < 2 * spec.n) throw PreconditionError("detect_events: tree must reach depth 2n");
  EventDetection out;
  const double s = spec.s();
  std::vector<std::int64_t> path;
  std::vector<double> sib;
  for (std::size_t u = 0; u < tree.nodes.size(); ++u) {
    const int k = tree.nodes[u].depth;
    if (k <= spec.n || k > 2 * spec.n) continue;
    const double v = tree.nodes[u].position;
    if (v < s - kWindowEps || v > s + spec.K + kWindowEps) continue;
    path.assign(static_cast<std::size_t>(k) + 1, 0);
    for (std::int64_t x = static_cast<std::int64_t>(u); x >= 0; x = tree.nodes[static_cast<std::size_t>(x)].parent) {
      path[static_cast<std::size_t>(tree.nodes[static_cast<std::size_t>(x)].depth)] = x;
    }
    bool member = true;
    for (int i = 0; i <= k && member; ++i) {
      member = tree.nodes[static_cast<std::size_t>(path[static_cast<std::size_t>(i)])].position >= spec.a(i) - kWindowEps;
    }
    for (int i = 0; i < k && member; ++i) {
      const auto& parent = tree.nodes[static_cast<std::size_t>(path[static_cast<std::size_t>(i)])];
      sib.clear();
      for (int j = 0; j < parent.child_count; ++j) {
        sib.push_back(tree.nodes[static_cast<std::size_t>(parent.first_child + j)].position);
      }
      const auto self = static_cast<std::size_t>(path[static_cast<std::size_t>(i) + 1] - parent.first_child);
      member = brother_sum(sib, self, spec.a(i)) <= spec.K * std::exp(-spec.b(i, k));
    }
    if (member) out.witnesses.emplace_back(k, static_cast<std::int64_t>(u));
  }
  out.occurred = !out.witnesses.empty();
  return out;
}

}  // namespace brw
