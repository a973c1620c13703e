#include "brw/offspring.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "brw/error.hpp"
#include "brw/numeric.hpp"

namespace brw {

OffspringLaw::OffspringLaw(std::vector<Atom> atoms, std::string name)
    : atoms_(std::move(atoms)), name_(std::move(name)) {
  if (atoms_.empty()) throw ValidationError("law has no atoms");
  NeumaierSum total;
  std::vector<double> all;
  for (std::size_t i = 0; i < atoms_.size(); ++i) {
    const Atom& a = atoms_[i];
    if (!std::isfinite(a.prob) || a.prob < 0.0 || a.prob > 1.0) {
      throw ValidationError("atom " + std::to_string(i) + ": probability " +
                            std::to_string(a.prob) + " outside [0, 1]");
    }
    for (double c : a.children) {
      if (!std::isfinite(c)) {
        throw ValidationError("atom " + std::to_string(i) + ": non-finite displacement");
      }
      all.push_back(c);
    }
    total += a.prob;
    cumulative_.push_back(total.value());
    max_arity_ = std::max(max_arity_, a.children.size());
    total_children_ += a.children.size();
  }
  if (std::abs(total.value() - 1.0) > 1e-12) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "atom probabilities sum to " << total.value() << ", not 1 (last atom index "
        << atoms_.size() - 1 << ")";
    throw ValidationError(msg.str());
  }
  cumulative_.back() = 1.0;
  span_ = brw::lattice_span(all);
}

double OffspringLaw::mean_offspring() const noexcept {
  NeumaierSum s;
  for (const auto& a : atoms_) s += a.prob * static_cast<double>(a.children.size());
  return s.value();
}

std::size_t OffspringLaw::atom_for(double u) const noexcept {
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  if (it == cumulative_.end()) return atoms_.size() - 1;
  return static_cast<std::size_t>(it - cumulative_.begin());
}

BoundaryReport check_boundary(const OffspringLaw& law, double tol, double eps0) {
  if (!(tol > 0.0)) throw PreconditionError("check_boundary: tol must be positive");
  BoundaryReport r;
  r.tol = tol;
  r.eps0 = eps0;
  NeumaierSum mean, mass, tilt, var, logm, epsm;
  for (const auto& a : law.atoms()) {
    double eta = 0.0, eta_pos = 0.0, spread = 0.0;
    for (double c : a.children) {
      const double w = std::exp(-c);
      mass += a.prob * w;
      tilt += a.prob * c * w;
      var += a.prob * c * c * w;
      eta += w;
      if (c >= 0.0) eta_pos += c * w;
      spread += w * std::pow(std::abs(c), 2.0 + eps0);
    }
    mean += a.prob * static_cast<double>(a.children.size());
    const double lp = eta > 1.0 ? std::log(eta) : 0.0;
    const double lq = eta_pos > 1.0 ? std::log(eta_pos) : 0.0;
    logm += a.prob * (eta * lp * lp + eta_pos * lq);
    epsm += a.prob * (std::pow(eta, 1.0 + eps0) + spread);
  }
  r.mean_offspring = mean.value();
  r.exp_mass = mass.value();
  r.tilt_mean = tilt.value();
  r.sigma2 = var.value();
  r.eta_log2_moment = logm.value();
  r.eps0_moment = epsm.value();
  r.supercritical = r.mean_offspring > 1.0;
  r.boundary = std::abs(r.exp_mass - 1.0) <= tol && std::abs(r.tilt_mean) <= tol;
  r.int1 = std::isfinite(r.sigma2) && r.sigma2 > 0.0;
  r.int2 = std::isfinite(r.eta_log2_moment);
  r.int3 = std::isfinite(r.eps0_moment);
  return r;
}

namespace {

OffspringLaw transform(const OffspringLaw& law, double scale, double drift) {
  std::vector<Atom> atoms = law.atoms();
  for (auto& a : atoms) {
    for (auto& c : a.children) c = scale * c + drift;
  }
  return OffspringLaw(std::move(atoms), law.name());
}

// Moments of the law under exp(-theta x), scaled by exp(theta * xmin) to avoid overflow.
struct Tilted {
  double m0, m1, m2, shift;
  double kappa() const { return std::log(m0) - shift; }
  double dkappa() const { return -m1 / m0; }
};

Tilted tilted(const OffspringLaw& law, double theta, double xmin) {
  NeumaierSum m0, m1, m2;
  for (const auto& a : law.atoms()) {
    for (double c : a.children) {
      const double w = a.prob * std::exp(-theta * (c - xmin));
      m0 += w;
      m1 += w * c;
      m2 += w * c * c;
    }
  }
  return {m0.value(), m1.value(), m2.value(), theta * xmin};
}

// Residuals of the map x -> theta x + c: (log exp_mass, tilt_mean).
std::array<double, 2> residual(const Tilted& t, double theta, double c) {
  const double scale = std::exp(-t.shift - c);
  return {t.kappa() - c, scale * (theta * t.m1 + c * t.m0)};
}

}  // namespace

Normalization normalize_to_boundary(const OffspringLaw& law, double tol, int max_iter) {
  double xmin = INFINITY, xmax = -INFINITY;
  for (const auto& a : law.atoms()) {
    if (a.prob == 0.0) continue;
    for (double c : a.children) {
      xmin = std::min(xmin, c);
      xmax = std::max(xmax, c);
    }
  }
  if (!(xmin <= xmax)) throw InfeasibleError("law has no children; nothing to normalize");
  if (xmax - xmin <= 1e-15 * std::max(1.0, std::abs(xmin))) {
    throw InfeasibleError("all displacements are equal; no boundary normalization exists");
  }
  if (law.mean_offspring() <= 1.0) {
    throw InfeasibleError("law is not supercritical (mean offspring <= 1)");
  }

  // g(theta) below tends to log of this mass as theta grows, so a root needs it < 1.
  double at_min = 0.0;
  for (const auto& a : law.atoms()) {
    for (double c : a.children) {
      if (c == xmin) at_min += a.prob;
    }
  }
  if (at_min >= 1.0 - 1e-12) {
    throw InfeasibleError(
        "no boundary normalization: the expected number of children at the minimal "
        "displacement is at least 1");
  }

  const auto first = check_boundary(law, tol);
  if (first.boundary) return {1.0, 0.0, law, 0, false};

  // Any root has c = kappa(theta); g(theta) = kappa - theta kappa' decreases from log E[N] > 0.
  auto g = [&](double theta) {
    const auto t = tilted(law, theta, xmin);
    return t.kappa() - theta * t.dkappa();
  };

  double theta = 1.0;
  double c = tilted(law, theta, xmin).kappa();
  int it = 0;
  bool converged = false;
  for (; it < max_iter; ++it) {
    const auto t = tilted(law, theta, xmin);
    const auto f = residual(t, theta, c);
    const double norm = std::hypot(f[0], f[1]);
    if (norm <= 0.1 * tol) {
      converged = true;
      break;
    }
    const double e = std::exp(-t.shift - c);
    const double j11 = t.dkappa(), j12 = -1.0;
    const double j21 = e * (t.m1 - theta * t.m2 - c * t.m1);
    const double j22 = e * t.m0 - f[1];
    const double det = j11 * j22 - j12 * j21;
    if (!std::isfinite(det) || std::abs(det) < 1e-300) break;
    const double d0 = (-f[0] * j22 + j12 * f[1]) / det;
    const double d1 = (-j11 * f[1] + j21 * f[0]) / det;
    double step = 1.0;
    bool improved = false;
    for (int h = 0; h < 40; ++h, step *= 0.5) {
      const double nt = theta + step * d0;
      const double nc = c + step * d1;
      if (!(nt > 0.0)) continue;
      const auto f2 = residual(tilted(law, nt, xmin), nt, nc);
      if (std::hypot(f2[0], f2[1]) < norm) {
        theta = nt;
        c = nc;
        improved = true;
        break;
      }
    }
    if (!improved) break;
  }

  bool fallback = false;
  if (!converged) {
    fallback = true;
    double lo = 0.0, hi = 1.0;
    int expand = 0;
    while (g(hi) > 0.0) {
      lo = hi;
      hi *= 2.0;
      if (++expand > 200) {
        throw InfeasibleError(
            "no boundary normalization: the expected number of children at the minimal "
            "displacement is at least 1");
      }
    }
    for (it = 0; it < max_iter && hi - lo > 1e-15 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (g(mid) > 0.0 ? lo : hi) = mid;
    }
    theta = 0.5 * (lo + hi);
  }
  c = tilted(law, theta, xmin).kappa();

  OffspringLaw out = transform(law, theta, c);
  const auto rep = check_boundary(out, tol);
  if (!rep.boundary) {
    throw ConvergenceError("boundary normalization did not converge",
                           std::hypot(rep.exp_mass - 1.0, rep.tilt_mean));
  }
  return {theta, c, std::move(out), it, fallback};
}

const std::vector<double>& sample_offspring(const OffspringLaw& law, Stream& rng) {
  return law.atoms()[law.sample_atom(rng)].children;
}

namespace {

OffspringLaw ssrw_coupled() {
  const double e = std::numbers::e;
  const double p2 = e / 2.0 - 1.0;
  const double p1 = 2.0 - e / 2.0;
  const double q = 1.0 / (2.0 * e);
  return OffspringLaw({{p1 * (1.0 - q), {1.0}},
                       {p1 * q, {1.0, -1.0}},
                       {p2 * (1.0 - q), {1.0, 1.0}},
                       {p2 * q, {1.0, 1.0, -1.0}}},
                      "ssrw-coupled");
}

OffspringLaw ssrw_ln2() {
  const double l = std::numbers::ln2;
  return OffspringLaw({{0.75, {l}}, {0.25, {l, -l}}}, "ssrw-ln2");
}

// Binary branching with i.i.d. displacements whose many-to-one step law w sits
// on {-2, 0, 1, 2} with w(2) = 0.15 and w(1) = 2 w(-2) - 0.3 (centred).
OffspringLaw binary_lattice2() {
  const double e = std::numbers::e;
  const double a = (0.85 + 0.3 * e - 0.15 * e * e) / (std::exp(-2.0) + 2.0 * e - 3.0);
  const std::array<double, 4> xs{-2.0, 0.0, 1.0, 2.0};
  const std::array<double, 4> w{a, 1.15 - 3.0 * a, 2.0 * a - 0.3, 0.15};
  std::array<double, 4> nu{};
  for (std::size_t i = 0; i < 4; ++i) nu[i] = w[i] * std::exp(xs[i]) / 2.0;
  std::vector<Atom> atoms;
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) atoms.push_back({nu[i] * nu[j], {xs[i], xs[j]}});
  }
  return OffspringLaw(std::move(atoms), "binary-lattice2");
}

}  // namespace

std::vector<std::string> builtin_law_names() {
  return {"ssrw-coupled", "ssrw-ln2", "binary-lattice2"};
}

std::optional<OffspringLaw> builtin_law(const std::string& name) {
  if (name == "ssrw-coupled") return ssrw_coupled();
  if (name == "ssrw-ln2") return ssrw_ln2();
  if (name == "binary-lattice2") return binary_lattice2();
  return std::nullopt;
}

OffspringLaw law_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("law file is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("atoms") || !j["atoms"].is_array()) {
    throw ValidationError("law JSON must be an object with an \"atoms\" array");
  }
  std::vector<Atom> atoms;
  std::size_t idx = 0;
  for (const auto& ja : j["atoms"]) {
    const std::string where = "atom " + std::to_string(idx++);
    if (!ja.is_object() || !ja.contains("prob") || !ja["prob"].is_number()) {
      throw ValidationError(where + ": missing numeric \"prob\"");
    }
    if (!ja.contains("children") || !ja["children"].is_array()) {
      throw ValidationError(where + ": missing \"children\" array");
    }
    Atom a;
    a.prob = ja["prob"].get<double>();
    for (const auto& c : ja["children"]) {
      if (!c.is_number()) throw ValidationError(where + ": non-numeric displacement");
      a.children.push_back(c.get<double>());
    }
    atoms.push_back(std::move(a));
  }
  std::string name = j.value("name", std::string{});
  return OffspringLaw(std::move(atoms), std::move(name));
}

std::string law_to_json(const OffspringLaw& law) {
  nlohmann::json j;
  j["name"] = law.name();
  j["atoms"] = nlohmann::json::array();
  for (const auto& a : law.atoms()) j["atoms"].push_back({{"prob", a.prob}, {"children", a.children}});
  return j.dump();
}

OffspringLaw load_law(const std::string& source) {
  if (auto b = builtin_law(source)) return *b;
  std::ifstream in(source);
  if (!in) {
    throw NotFoundError("law '" + source + "' is neither a builtin law nor a readable file");
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return law_from_json(buf.str());
}

}  // namespace brw
