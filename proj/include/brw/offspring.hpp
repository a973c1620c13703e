#pragma once

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include "brw/rng.hpp"

namespace brw {

/// One outcome of the reproduction law: with probability `prob` the parent
/// begets children displaced by `children` relative to itself.
struct Atom {
  double prob = 0.0;
  std::vector<double> children;
};

/// Finite point-process reproduction law.
class OffspringLaw {
 public:
  /// Throws ValidationError (naming the atom) on negative or non-finite
  /// probabilities, non-finite displacements, or total mass off 1 by > 1e-12.
  explicit OffspringLaw(std::vector<Atom> atoms, std::string name = {});
  OffspringLaw(std::initializer_list<Atom> atoms, std::string name = {})
      : OffspringLaw(std::vector<Atom>(atoms), std::move(name)) {}

  const std::vector<Atom>& atoms() const noexcept { return atoms_; }
  const std::string& name() const noexcept { return name_; }
  /// Maximal h with every displacement in hZ; nullopt when non-lattice.
  std::optional<double> lattice_span() const noexcept { return span_; }
  std::size_t max_arity() const noexcept { return max_arity_; }
  /// Sum over atoms of the number of children (lineage branching factor).
  std::size_t total_children() const noexcept { return total_children_; }
  double mean_offspring() const noexcept;

  std::size_t atom_for(double u) const noexcept;
  std::size_t sample_atom(Stream& rng) const { return atom_for(uniform01(rng)); }

 private:
  std::vector<Atom> atoms_;
  std::string name_;
  std::vector<double> cumulative_;
  std::optional<double> span_;
  std::size_t max_arity_ = 0;
  std::size_t total_children_ = 0;
};

struct BoundaryReport {
  double mean_offspring = 0.0;
  double exp_mass = 0.0;
  double tilt_mean = 0.0;
  double sigma2 = 0.0;
  double eta_log2_moment = 0.0;
  double eps0_moment = 0.0;
  double eps0 = 0.1;
  double tol = 1e-10;
  bool supercritical = false;
  bool boundary = false;
  bool int1 = false;
  bool int2 = false;
  bool int3 = false;
};

BoundaryReport check_boundary(const OffspringLaw& law, double tol = 1e-10, double eps0 = 0.1);

struct Normalization {
  double scale = 1.0;
  double drift = 0.0;
  OffspringLaw law;
  int iterations = 0;
  bool used_fallback = false;
};

/// Finds (scale, drift) so that x -> scale*x + drift puts `law` in the
/// boundary case. Throws InfeasibleError for degenerate or non-supercritical
/// laws and ConvergenceError when no root is found within `max_iter`.
Normalization normalize_to_boundary(const OffspringLaw& law, double tol = 1e-10,
                                    int max_iter = 200);

const std::vector<double>& sample_offspring(const OffspringLaw& law, Stream& rng);

/// Built-in laws: "ssrw-coupled", "ssrw-ln2", "binary-lattice2".
std::optional<OffspringLaw> builtin_law(const std::string& name);
std::vector<std::string> builtin_law_names();

OffspringLaw law_from_json(const std::string& text);
std::string law_to_json(const OffspringLaw& law);
/// Builtin name or path to a JSON law file. Throws NotFoundError when neither.
OffspringLaw load_law(const std::string& source);

}  // namespace brw
