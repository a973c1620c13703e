#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "brw/offspring.hpp"
#include "brw/walk.hpp"

namespace brw {

/// Window data for the events E_k, F_k and A(n, lambda).
struct EventWindowSpec {
  int n = 2;
  double lambda = 0.0;
  double K = 10.0;

  EventWindowSpec() = default;
  /// Throws PreconditionError unless n >= 2 and K > 0.
  EventWindowSpec(int n, double lambda, double K = 10.0);

  double s() const noexcept;
  /// a_i = s 1{n/2 < i <= 2n}.
  double a(int i) const noexcept;
  /// b_i^{(k,n)} = i^{1/12} for i <= n/2, (k - i)^{1/12} for n/2 < i <= k.
  double b(int i, int k) const noexcept;
  /// 0 <= lambda <= (1/3) log n; outside it the event is still computable but unsupported.
  bool in_validity_range() const noexcept;
};

/// Tolerance for position comparisons in the window tests (lattice positions
/// reached along different paths may differ in the last bits).
inline constexpr double kWindowEps = 1e-9;

/// sum over v != self of (1 + (V(v) - a)_+) e^{-(V(v) - a)}.
double brother_sum(std::span<const double> siblings, std::size_t self, double a);

/// Incremental form of A(n, lambda). A particle carries kmax: every k in
/// (n, kmax] still has all F conditions satisfied along its ancestry (larger k
/// only tightens them), and it carries -1 once it can no longer witness.
class EventTracker {
 public:
  static constexpr int kDead = -1;
  explicit EventTracker(EventWindowSpec spec) : spec_(spec) {}
  const EventWindowSpec& spec() const noexcept { return spec_; }
  int root() const noexcept { return 2 * spec_.n; }
  int max_depth() const noexcept { return 2 * spec_.n; }
  /// State of a child at generation i + 1 and position x whose parent (generation i)
  /// had state `parent` and whose brothers give `brothers` (see brother_sum with a_i).
  int child(int i, int parent, double brothers, double x) const noexcept;
  /// Whether a particle at generation g with state `state` and position x is a witness.
  bool witness(int g, int state, double x) const noexcept;

 private:
  EventWindowSpec spec_;
};

struct PrunePolicy {
  double upper_level = std::numeric_limits<double>::infinity();
  double weight_floor = 0.0;
  std::uint64_t cap = 10'000'000;
  /// min(upper_level, -log weight_floor).
  double level() const noexcept;
  bool active() const noexcept;
};

/// Throws PreconditionError when the policy would prune the root or cap < 1.
PrunePolicy prune_policy(double upper_level, double weight_floor, std::uint64_t cap = 10'000'000);

/// A generation of the particle engine.
struct Generation {
  int depth = 0;
  std::vector<double> positions;
  std::vector<double> min_prefix;
  double pruned_weight_bound = 0.0;
};

struct DepthRecord {
  int k = 0;
  std::optional<double> M;  // absent after extinction
  double W = 0.0, D = 0.0, W_alpha = 0.0, D_alpha = 0.0;
  double Z = 0.0;
  bool extinct = false;
  double pruned_weight_bound = 0.0;
};

struct EventOutcome {
  bool occurred = false;
  int first_depth = -1;
};

struct TrajectoryStats {
  std::vector<DepthRecord> records;  // depths 0..n (fewer when truncated)
  double alpha = 0.0;
  std::uint64_t seed = 0;
  bool truncated = false;
  bool tree_above_barrier = true;  // min over all simulated particles >= -alpha
  std::vector<EventOutcome> events;
  std::vector<Generation> generations;  // particle mode with keep_generations
};

enum class EngineMode { Auto, Particle, Occupancy };

struct SimulateOptions {
  EngineMode mode = EngineMode::Auto;
  std::vector<EventWindowSpec> events;
  /// Only decide the events: drop particles that can no longer witness and stop
  /// as soon as every event is decided. Depth records are left empty.
  bool events_only = false;
  /// Renewal function for D^(alpha); built on demand for lattice laws when null.
  const Renewal* renewal = nullptr;
  bool keep_generations = false;
};

/// Simulates one replica to depth n. Particle mode derives every node's
/// offspring from a key hashed down from `seed`, so the realized tree does not
/// depend on pruning. Occupancy mode (lattice laws) evolves particle counts per
/// lattice site with exact multinomial draws from a stream seeded by `seed`.
TrajectoryStats simulate(const OffspringLaw& law, int n, double alpha, const PrunePolicy& prune,
                         std::uint64_t seed, const SimulateOptions& options = {});

/// Renewal table large enough for D^(alpha) up to depth n.
Renewal renewal_for_depth(const OffspringLaw& law, int n, double alpha);

/// Full tree in breadth-first layout.
struct Tree {
  struct Node {
    std::int64_t parent = -1;
    int depth = 0;
    double position = 0.0;
    std::int64_t first_child = -1;
    int child_count = 0;
  };
  std::vector<Node> nodes;
  int depth = 0;
  bool complete = true;
};

/// The particle-mode tree with root key `seed`, to `depth`. Stops and marks the
/// tree incomplete when it would exceed `max_nodes`.
Tree grow_tree(const OffspringLaw& law, int depth, std::uint64_t seed,
               std::uint64_t max_nodes = 10'000'000);

struct EventDetection {
  bool occurred = false;
  std::vector<std::pair<int, std::int64_t>> witnesses;  // (k, node index)
};

/// Evaluates A(n, lambda) by checking E_k and F_k membership of every node
/// with n < k <= 2n directly from the definitions. Refuses (PreconditionError)
/// incomplete trees and trees shallower than 2n.
EventDetection detect_events(const Tree& tree, const EventWindowSpec& spec);

}  // namespace brw
