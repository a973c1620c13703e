#include "brw/spine.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <regex>
#include <sstream>
#include <unordered_map>

#include "brw/error.hpp"
#include "brw/numeric.hpp"
#include "brw/parallel.hpp"
#include "occupancy.hpp"

namespace brw {

namespace {

double spine_weight(const Renewal& R, double alpha, double y) {
  if (y < -alpha - kWindowEps) return 0.0;
  return R(std::max(0.0, alpha + y)) * std::exp(-y);
}

std::size_t pick(const std::vector<double>& probs, double u) {
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    last = i;
    acc += probs[i];
    if (u < acc) return i;
  }
  return last;
}

struct Totals {
  NeumaierSum W, D, Wa, Da, Z;
  double M = std::numeric_limits<double>::infinity();
  void add(double pos, double count, bool alpha_ok, const Renewal& R, double alpha) {
    const double w = count * std::exp(-pos);
    W += w;
    D += pos * w;
    Z += count;
    if (alpha_ok) {
      Wa += w;
      Da += count * spine_weight(R, alpha, pos);
    }
    M = std::min(M, pos);
  }
  DepthRecord record(int k) const {
    DepthRecord r;
    r.k = k;
    r.Z = Z.value();
    r.extinct = r.Z == 0.0;
    if (!r.extinct) r.M = M;
    r.W = W.value();
    r.D = D.value();
    r.W_alpha = Wa.value();
    r.D_alpha = Da.value();
    return r;
  }
};

}  // namespace

std::vector<double> spine_atom_probs(const OffspringLaw& law, const Renewal& renewal, double alpha,
                                     double x) {
  const double wx = spine_weight(renewal, alpha, x);
  if (wx <= 0.0) throw PreconditionError("spine_atom_probs: spine position below the barrier");
  std::vector<double> out;
  NeumaierSum total;
  for (const auto& a : law.atoms()) {
    NeumaierSum s;
    for (double c : a.children) s += spine_weight(renewal, alpha, x + c);
    out.push_back(a.prob * s.value() / wx);
    total += out.back();
  }
  // Harmonicity of R_alpha for the killed walk makes the tilt a probability.
  if (std::abs(total.value() - 1.0) > 1e-9) {
    std::ostringstream os;
    os.precision(17);
    os << "spine_atom_probs: tilt mass " << total.value() << " at x = " << x
       << " (law not in the boundary case or renewal function of another law)";
    throw PreconditionError(os.str());
  }
  for (auto& p : out) p /= total.value();
  return out;
}

std::vector<double> spine_child_probs(const Renewal& renewal, double alpha,
                                      const std::vector<double>& positions) {
  std::vector<double> out;
  NeumaierSum total;
  for (double y : positions) {
    out.push_back(spine_weight(renewal, alpha, y));
    total += out.back();
  }
  if (!(total.value() > 0.0)) throw PreconditionError("spine_child_probs: no child above the barrier");
  for (auto& p : out) p /= total.value();
  return out;
}

SpineRealization sample_spine_tree(const OffspringLaw& law, double alpha, int n,
                                   const Renewal& renewal, Stream& rng, const SpineOptions& options) {
  using detail::Cell;
  if (n < 0) throw PreconditionError("sample_spine_tree: n must be nonnegative");
  if (alpha < 0.0) throw PreconditionError("sample_spine_tree: alpha must be nonnegative");
  const auto span = law.lattice_span();
  if (!span) throw PreconditionError("sample_spine_tree: law " + law.name() + " is not lattice");
  if (options.events.size() > static_cast<std::size_t>(detail::kMaxEvents))
    throw PreconditionError("sample_spine_tree: at most two event windows");
  const double h = *span;
  const double D0 = spine_weight(renewal, alpha, 0.0);
  if (!(D0 > 0.0)) throw PreconditionError("sample_spine_tree: R(alpha) must be positive");

  std::vector<EventTracker> trackers;
  for (const auto& e : options.events) trackers.emplace_back(e);
  std::vector<std::vector<std::int64_t>> offs;
  for (const auto& a : law.atoms()) {
    offs.emplace_back();
    for (double c : a.children) offs.back().push_back(std::llround(c / h));
  }

  SpineRealization out;
  out.alpha = alpha;
  out.events.resize(trackers.size());
  std::int64_t spine = 0;
  std::array<int, detail::kMaxEvents> spine_ev{};
  for (std::size_t e = 0; e < trackers.size(); ++e) spine_ev[e] = trackers[e].root();
  out.spine_positions.push_back(0.0);
  {
    Totals t;
    t.add(0.0, 1.0, true, renewal, alpha);
    out.records.push_back(t.record(0));
  }
  std::unordered_map<std::int64_t, std::vector<double>> tilt_cache;
  std::vector<Cell> cur, next;
  std::vector<double> counts, sib;

  auto child_state = [&](int k, const std::array<int, detail::kMaxEvents>& parent, const std::vector<double>& s,
                         std::size_t j, std::array<int, detail::kMaxEvents>& ev) {
    for (std::size_t e = 0; e < trackers.size(); ++e) {
      ev[e] = k <= trackers[e].max_depth()
                  ? trackers[e].child(k - 1, parent[e], brother_sum(s, j, trackers[e].spec().a(k - 1)), s[j])
                  : EventTracker::kDead;
      if (trackers[e].witness(k, ev[e], s[j]) && !out.events[e].occurred) {
        out.events[e].occurred = true;
        out.events[e].first_depth = k;
      }
    }
  };

  for (int k = 1; k <= n; ++k) {
    next.clear();
    for (const auto& cell : cur) {
      detail::multinomial(cell.count, law, rng, counts);
      for (std::size_t a = 0; a < offs.size(); ++a) {
        if (counts[a] == 0.0) continue;
        const auto& o = offs[a];
        sib.resize(o.size());
        for (std::size_t j = 0; j < o.size(); ++j) sib[j] = static_cast<double>(cell.site + o[j]) * h;
        for (std::size_t j = 0; j < o.size(); ++j) {
          Cell c{cell.site + o[j], cell.alpha_ok && sib[j] >= -alpha - kWindowEps, {}, counts[a]};
          child_state(k, cell.ev, sib, j, c.ev);
          next.push_back(c);
        }
      }
    }

    const double x = static_cast<double>(spine) * h;
    auto it = tilt_cache.find(spine);
    if (it == tilt_cache.end()) it = tilt_cache.emplace(spine, spine_atom_probs(law, renewal, alpha, x)).first;
    const std::size_t atom = pick(it->second, uniform01(rng));
    const auto& o = offs[atom];
    sib.resize(o.size());
    for (std::size_t j = 0; j < o.size(); ++j) sib[j] = static_cast<double>(spine + o[j]) * h;
    const auto probs = spine_child_probs(renewal, alpha, sib);
    const std::size_t chosen = pick(probs, uniform01(rng));
    out.offspring_of_spine.push_back(sib);
    out.spine_child.push_back(chosen);
    std::array<int, detail::kMaxEvents> chosen_ev{};
    for (std::size_t j = 0; j < o.size(); ++j) {
      std::array<int, detail::kMaxEvents> ev{};
      child_state(k, spine_ev, sib, j, ev);
      if (j == chosen) {
        chosen_ev = ev;
        continue;
      }
      out.offspring_subtrees.push_back({sib[j], k});
      next.push_back(Cell{spine + o[j], sib[j] >= -alpha - kWindowEps, ev, 1.0});
    }
    spine += o[chosen];
    spine_ev = chosen_ev;
    const double sx = static_cast<double>(spine) * h;
    if (sx < -alpha - kWindowEps) throw Error("sample_spine_tree: spine crossed the barrier");
    out.spine_positions.push_back(sx);

    detail::merge_cells(next);
    if (next.size() > options.cap) {
      std::ostringstream os;
      os << "sample_spine_tree: " << next.size() << " occupancy cells exceed cap " << options.cap;
      throw BudgetError(os.str(), static_cast<double>(next.size()));
    }
    cur.swap(next);
    Totals t;
    for (const auto& c : cur) t.add(static_cast<double>(c.site) * h, c.count, c.alpha_ok, renewal, alpha);
    t.add(sx, 1.0, true, renewal, alpha);
    out.records.push_back(t.record(k));
  }
  out.weight = out.records.back().D_alpha / D0;
  return out;
}

SpineFunctional parse_spine_functional(const std::string& text) {
  SpineFunctional f;
  if (text == "one") return f;
  if (text == "w-ratio") {
    f.kind = SpineFunctionalKind::WRatio;
    return f;
  }
  if (text == "sqrt-n-w-alpha") {
    f.kind = SpineFunctionalKind::SqrtNWAlpha;
    return f;
  }
  static const std::regex event(R"(event:A\(\s*(\d+)\s*,\s*([-+0-9.eE]+)\s*(?:,\s*([-+0-9.eE]+)\s*)?\))");
  std::smatch m;
  if (std::regex_match(text, m, event)) {
    f.kind = SpineFunctionalKind::Event;
    try {
      const double K = m[3].matched ? std::stod(m[3].str()) : 10.0;
      f.event = EventWindowSpec(std::stoi(m[1].str()), std::stod(m[2].str()), K);
    } catch (const std::logic_error&) {
      throw ValidationError("spine functional: bad number in '" + text + "'");
    }
    return f;
  }
  throw ValidationError("unknown spine functional '" + text +
                        "' (expected one, w-ratio, sqrt-n-w-alpha or event:A(n,lambda[,K]))");
}

std::string to_string(const SpineFunctional& f) {
  switch (f.kind) {
    case SpineFunctionalKind::One: return "one";
    case SpineFunctionalKind::WRatio: return "w-ratio";
    case SpineFunctionalKind::SqrtNWAlpha: return "sqrt-n-w-alpha";
    case SpineFunctionalKind::Event: {
      std::ostringstream os;
      os.precision(17);
      os << "event:A(" << f.event.n << "," << f.event.lambda << "," << f.event.K << ")";
      return os.str();
    }
  }
  return "?";
}

int spine_depth(const SpineFunctional& f, int n) {
  return f.kind == SpineFunctionalKind::Event ? std::max(n, 2 * f.event.n) : n;
}

SpineSample spine_sample(const OffspringLaw& law, double alpha, int n, const SpineFunctional& f,
                         const Renewal& renewal, std::uint64_t seed) {
  Stream rng(seed);
  SpineOptions opt;
  if (f.kind == SpineFunctionalKind::Event) opt.events = {f.event};
  const auto r = sample_spine_tree(law, alpha, spine_depth(f, n), renewal, rng, opt);
  SpineSample s;
  s.weight = r.weight;
  const auto& rec = r.records[static_cast<std::size_t>(n)];
  const double rn = std::sqrt(static_cast<double>(n));
  switch (f.kind) {
    case SpineFunctionalKind::One: s.value = 1.0; break;
    case SpineFunctionalKind::WRatio: s.value = rn * rec.W_alpha / rec.D_alpha; break;
    case SpineFunctionalKind::SqrtNWAlpha: s.value = rn * rec.W_alpha; break;
    case SpineFunctionalKind::Event: s.value = r.events[0].occurred ? 1.0 : 0.0; break;
  }
  return s;
}

namespace {

constexpr std::size_t kBlock = 256;

struct Acc {
  RunningStats stats;
  std::uint64_t rejected = 0;
};

const Renewal& pick_renewal(const OffspringLaw& law, int depth, double alpha, const Renewal* given,
                            std::optional<Renewal>& own) {
  if (given) return *given;
  own = renewal_for_depth(law, depth, alpha);
  return *own;
}

}  // namespace

ImportanceResult importance_estimate(const SpineFunctional& f, const OffspringLaw& law, double alpha,
                                     int n, std::uint64_t replicas, std::uint64_t seed,
                                     const Renewal* renewal) {
  std::optional<Renewal> own;
  const Renewal& R = pick_renewal(law, spine_depth(f, n), alpha, renewal, own);
  auto acc = parallel_blocks(
      replicas, kBlock, Acc{},
      [&](std::size_t lo, std::size_t hi) {
        Acc a;
        for (std::size_t r = lo; r < hi; ++r) {
          const auto s = spine_sample(law, alpha, n, f, R, derive_seed(seed, r));
          if (!(s.weight > 0.0) || !std::isfinite(s.weight)) {
            ++a.rejected;
            continue;
          }
          a.stats.add(s.value / s.weight);
        }
        return a;
      },
      [](Acc& x, const Acc& y) {
        x.stats.merge(y.stats);
        x.rejected += y.rejected;
      });
  return {acc.stats.estimate(), replicas, acc.rejected};
}

VarianceResult variance_functional(const OffspringLaw& law, double alpha, int n,
                                   std::uint64_t replicas, std::uint64_t seed, const Renewal* renewal) {
  if (n < 1) throw PreconditionError("variance_functional: n must be at least 1");
  std::optional<Renewal> own;
  const Renewal& R = pick_renewal(law, n, alpha, renewal, own);
  const SpineFunctional f{SpineFunctionalKind::WRatio, {}};
  auto values = parallel_blocks(
      replicas, kBlock, std::vector<double>{},
      [&](std::size_t lo, std::size_t hi) {
        std::vector<double> v;
        for (std::size_t r = lo; r < hi; ++r) v.push_back(spine_sample(law, alpha, n, f, R, derive_seed(seed, r)).value);
        return v;
      },
      [](std::vector<double>& x, const std::vector<double>& y) { x.insert(x.end(), y.begin(), y.end()); });

  VarianceResult out;
  RunningStats st;
  for (double v : values) st.add(v);
  out.mean = st.estimate();
  out.variance = st.variance();
  NeumaierSum m4;
  for (double v : values) m4 += std::pow(v - st.mean(), 4);
  const double N = static_cast<double>(values.size());
  if (N > 1) out.variance_stderr = std::sqrt(std::max(0.0, m4.value() / N - out.variance * out.variance) / N);

  const StepLaw step = derive_step_law(law);
  out.h_alpha_n = h_function(step, R, alpha, n);
  out.k_n = static_cast<int>(std::floor(std::cbrt(static_cast<double>(n)) + 1e-12));
  const double h = *law.lattice_span();
  double sup = 0.0;
  if (n - out.k_n >= 1) {
    const double lo = std::cbrt(static_cast<double>(out.k_n));
    for (std::int64_t j = static_cast<std::int64_t>(std::ceil(lo / h - 1e-9));
         static_cast<double>(j) * h <= out.k_n + 1e-9; ++j) {
      const double x = static_cast<double>(j) * h;
      sup = std::max(sup, std::abs(h_function(step, R, x + alpha, n - out.k_n) / out.h_alpha_n - 1.0));
    }
  }
  out.surrogate = kSurrogateC * (std::pow(static_cast<double>(n), -kSurrogateDelta) + sup);
  return out;
}

}  // namespace brw
