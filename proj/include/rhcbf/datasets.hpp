#pragma once

#include "rhcbf/hybrid.hpp"

#include <unordered_map>

namespace rhcbf {

struct FlowSample {
  Vec z;
  Vec u;
  double t{0.0};
};

struct JumpSample {
  Vec z;   // pre-jump state
  Vec u;   // jump input (size 0 when unactuated)
  double t{0.0};
};

struct Geometry {
  double eps_c{0.1};
  double eps_d{0.1};
  double sigma{0.1};
  /// Standoff between the cover surface and the inner edge of the ring shell.
  /// A zero-width transition would force an unbounded slope on any h that is
  /// nonnegative on the cover and <= -gamma_unsafe on the ring, so the shell
  /// starts `gap` past the cover; the band in between carries no sign claim.
  double gap{0.0};
  double eps_bar{0.0};  // covering radius of the ring samples, set post hoc
};

/// Static uniform-cell index over a fixed point set; nearest-neighbor and
/// radius queries for the ball-union cover.
class GridIndex {
 public:
  GridIndex() = default;
  GridIndex(const std::vector<Vec>& points, double cell_size);

  bool any_within(const Vec& z, double radius, bool strict) const;
  /// min over points of ||z - p||; +inf when the set is empty.
  double min_distance(const Vec& z) const;
  int size() const { return static_cast<int>(points_.size()); }

 private:
  std::vector<Vec> points_;
  double cell_{1.0};
  int dim_{0};
  std::unordered_map<std::uint64_t, std::vector<int>> cells_;
  std::uint64_t key(const Vec& z, std::vector<long>& idx) const;
};

enum class CoverKind { flow, jump };

/// Expert data plus the derived geometric sets. Immutable after build.
struct DatasetBundle {
  std::vector<FlowSample> flow_samples;
  std::vector<JumpSample> jump_samples;
  std::vector<Vec> ring_samples;
  Geometry geom;
  StatePredicate safe_set;    // geometric safe set S
  StatePredicate flow_set;    // copied from the system at collection time
  StatePredicate jump_set;
  int excluded_samples{0};

  // Built lazily by finalize(); used by membership and ring sampling.
  GridIndex flow_index;
  GridIndex jump_index;

  void finalize();
  std::vector<Vec> flow_states() const;
  std::vector<Vec> jump_states() const;
};

struct CollectOptions {
  double sample_dt{0.05};
  Horizon horizon{10.0, 100};
  SimulateOptions sim;
};

/// Simulates each initial condition under the expert laws and records flow
/// samples every sample_dt plus the pre-state of every jump. Samples outside
/// the interior of S are dropped and counted.
DatasetBundle collect_expert(const HybridSystem& sys, const ControlPair& expert,
                             const std::vector<Vec>& initial_conditions,
                             const DisturbancePolicy& noise,
                             const StatePredicate& safe_set,
                             const CollectOptions& opt);

/// Membership in the ball-union cover: open balls (strict) intersected with C
/// for the flow cover, closed balls intersected with D for the jump cover.
bool cover_contains(const DatasetBundle& bundle, const Vec& z, CoverKind which);

bool in_cover(const DatasetBundle& bundle, const Vec& z);

/// Distance from z to the ball-union cover (clipping by C/D ignored).
double distance_to_cover(const DatasetBundle& bundle, const Vec& z);

/// Rejection-samples at least n_target points from the sigma-ring around the
/// cover. Deterministic under the rng seed.
std::vector<Vec> build_ring(const DatasetBundle& bundle, int n_target,
                            std::mt19937_64& rng);

/// Empirical covering radius: max over probes of min distance to points.
double epsilon_net_radius(const std::vector<Vec>& points,
                          const std::vector<Vec>& probes);

/// Safe-set points farther than `standoff` from every ring sample.
std::vector<Vec> thin_safe_sets(const std::vector<Vec>& safe_points,
                                const std::vector<Vec>& ring_samples,
                                double standoff);

void write_dataset_csv(const DatasetBundle& bundle, const std::string& dir);
void write_dataset_manifest(const DatasetBundle& bundle, const std::string& path,
                            std::uint64_t seed, const std::string& config_hash);
DatasetBundle load_dataset_csv(const std::string& dir);

}  // namespace rhcbf
