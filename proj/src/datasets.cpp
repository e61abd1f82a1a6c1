#include "rhcbf/datasets.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace rhcbf {

GridIndex::GridIndex(const std::vector<Vec>& points, double cell_size)
    : points_(points), cell_(cell_size) {
  if (cell_ <= 0.0) throw std::invalid_argument("GridIndex: cell_size <= 0");
  if (!points_.empty()) dim_ = static_cast<int>(points_.front().size());
  std::vector<long> idx(dim_);
  for (int i = 0; i < static_cast<int>(points_.size()); ++i)
    cells_[key(points_[i], idx)].push_back(i);
}

std::uint64_t GridIndex::key(const Vec& z, std::vector<long>& idx) const {
  // FNV-1a over the cell coordinates.
  std::uint64_t h = 1469598103934665603ull;
  for (int d = 0; d < dim_; ++d) {
    idx[d] = static_cast<long>(std::floor(z[d] / cell_));
    const std::uint64_t v = static_cast<std::uint64_t>(idx[d]);
    for (int byte = 0; byte < 8; ++byte) {
      h ^= (v >> (8 * byte)) & 0xffu;
      h *= 1099511628211ull;
    }
  }
  return h;
}

namespace {

// Enumerates neighbor cell offsets in {-r..r}^dim.
void for_each_offset(int dim, int reach, std::vector<long>& offset,
                     const std::function<void()>& fn, int d = 0) {
  if (d == dim) {
    fn();
    return;
  }
  for (int o = -reach; o <= reach; ++o) {
    offset[d] = o;
    for_each_offset(dim, reach, offset, fn, d + 1);
  }
}

}  // namespace

bool GridIndex::any_within(const Vec& z, double radius, bool strict) const {
  if (points_.empty()) return false;
  const int reach = static_cast<int>(std::ceil(radius / cell_)) + 1;
  std::vector<long> base(dim_), offset(dim_);
  for (int d = 0; d < dim_; ++d)
    base[d] = static_cast<long>(std::floor(z[d] / cell_));
  bool found = false;
  std::vector<long> idx(dim_);
  for_each_offset(dim_, reach, offset, [&]() {
    if (found) return;
    Vec probe(dim_);
    for (int d = 0; d < dim_; ++d) probe[d] = (base[d] + offset[d] + 0.5) * cell_;
    const auto it = cells_.find(key(probe, idx));
    if (it == cells_.end()) return;
    for (int i : it->second) {
      const double dist = (points_[i] - z).norm();
      if (strict ? dist < radius : dist <= radius) {
        found = true;
        return;
      }
    }
  });
  return found;
}

double GridIndex::min_distance(const Vec& z) const {
  if (points_.empty()) return std::numeric_limits<double>::infinity();
  double best = std::numeric_limits<double>::infinity();
  // Expand ring by ring until the best distance certifies the search radius.
  for (int reach = 1; reach <= 64; ++reach) {
    std::vector<long> base(dim_), offset(dim_), idx(dim_);
    for (int d = 0; d < dim_; ++d)
      base[d] = static_cast<long>(std::floor(z[d] / cell_));
    for_each_offset(dim_, reach, offset, [&]() {
      Vec probe(dim_);
      for (int d = 0; d < dim_; ++d)
        probe[d] = (base[d] + offset[d] + 0.5) * cell_;
      const auto it = cells_.find(key(probe, idx));
      if (it == cells_.end()) return;
      for (int i : it->second) best = std::min(best, (points_[i] - z).norm());
    });
    if (best <= (reach - 1) * cell_) return best;
  }
  // Fallback: brute force (distant query point).
  for (const auto& p : points_) best = std::min(best, (p - z).norm());
  return best;
}

void DatasetBundle::finalize() {
  flow_index = GridIndex(flow_states(), std::max(geom.eps_c, 1e-6));
  jump_index = GridIndex(jump_states(), std::max(geom.eps_d, 1e-6));
}

std::vector<Vec> DatasetBundle::flow_states() const {
  std::vector<Vec> out;
  out.reserve(flow_samples.size());
  for (const auto& s : flow_samples) out.push_back(s.z);
  return out;
}

std::vector<Vec> DatasetBundle::jump_states() const {
  std::vector<Vec> out;
  out.reserve(jump_samples.size());
  for (const auto& s : jump_samples) out.push_back(s.z);
  return out;
}

DatasetBundle collect_expert(const HybridSystem& sys, const ControlPair& expert,
                             const std::vector<Vec>& initial_conditions,
                             const DisturbancePolicy& noise,
                             const StatePredicate& safe_set,
                             const CollectOptions& opt) {
  DatasetBundle bundle;
  bundle.safe_set = safe_set;
  bundle.flow_set = sys.flow_set;
  bundle.jump_set = sys.jump_set;

  DisturbancePolicy policy = noise;
  for (std::size_t ic = 0; ic < initial_conditions.size(); ++ic) {
    // Decorrelate runs while staying deterministic under the base seed.
    policy.seed = noise.seed + 0x9e3779b97f4a7c15ull * (ic + 1);
    const HybridArc arc =
        simulate(sys, initial_conditions[ic], expert, policy, opt.horizon, opt.sim);
    for (const auto& seg : arc.segments) {
      double next_sample_t = seg.times.empty() ? 0.0 : seg.times.front();
      for (std::size_t k = 0; k < seg.states.size(); ++k) {
        if (seg.times[k] + 1e-12 < next_sample_t) continue;
        // Half-open horizon [0, T): the endpoint sample belongs to the next
        // hypothetical interval.
        if (seg.times[k] >= opt.horizon.T - 1e-12) break;
        next_sample_t = seg.times[k] + opt.sample_dt;
        if (!safe_set(seg.states[k])) {
          ++bundle.excluded_samples;
          continue;
        }
        bundle.flow_samples.push_back({seg.states[k], seg.inputs[k], seg.times[k]});
      }
    }
    for (const auto& jr : arc.jumps) {
      if (!safe_set(jr.z_before)) {
        ++bundle.excluded_samples;
        continue;
      }
      bundle.jump_samples.push_back({jr.z_before, Vec(sys.m_d), jr.t});
    }
  }
  if (bundle.flow_samples.empty() && bundle.jump_samples.empty())
    throw std::runtime_error("collect_expert: no surviving samples");
  bundle.finalize();
  return bundle;
}

bool cover_contains(const DatasetBundle& bundle, const Vec& z, CoverKind which) {
  if (which == CoverKind::flow) {
    if (bundle.flow_set && !bundle.flow_set(z)) return false;
    return bundle.flow_index.any_within(z, bundle.geom.eps_c, /*strict=*/true);
  }
  if (bundle.jump_set && !bundle.jump_set(z)) return false;
  return bundle.jump_index.any_within(z, bundle.geom.eps_d, /*strict=*/false);
}

bool in_cover(const DatasetBundle& bundle, const Vec& z) {
  return cover_contains(bundle, z, CoverKind::flow) ||
         cover_contains(bundle, z, CoverKind::jump);
}

double distance_to_cover(const DatasetBundle& bundle, const Vec& z) {
  const double dc = bundle.flow_index.min_distance(z) - bundle.geom.eps_c;
  const double dd = bundle.jump_index.min_distance(z) - bundle.geom.eps_d;
  return std::max(0.0, std::min(dc, dd));
}

std::vector<Vec> build_ring(const DatasetBundle& bundle, int n_target,
                            std::mt19937_64& rng) {
  if (n_target < 1) throw std::invalid_argument("build_ring: n_target < 1");
  const std::vector<Vec> flow_pts = bundle.flow_states();
  const std::vector<Vec> jump_pts = bundle.jump_states();
  const std::size_t n_flow = flow_pts.size();
  const std::size_t n_total = n_flow + jump_pts.size();
  if (n_total == 0) throw std::runtime_error("build_ring: empty dataset");

  std::vector<Vec> ring;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, n_total - 1);
  long proposals = 0;
  const long proposal_cap = 1000000;
  while (static_cast<int>(ring.size()) < n_target) {
    if (++proposals > proposal_cap &&
        static_cast<double>(ring.size()) / proposals < 1e-4)
      throw std::runtime_error("build_ring: acceptance rate too low (sigma too small?)");
    const std::size_t i = pick(rng);
    const Vec& center = (i < n_flow) ? flow_pts[i] : jump_pts[i - n_flow];
    const double eps = (i < n_flow) ? bundle.geom.eps_c : bundle.geom.eps_d;
    const int dim = static_cast<int>(center.size());
    Vec dir = uniform_ball(dim, rng);
    const double dn = dir.norm();
    if (dn < 1e-12) continue;
    dir /= dn;
    // (eps+gap, eps+gap+sigma]
    const double r =
        eps + bundle.geom.gap + bundle.geom.sigma * (1.0 - unif(rng));
    const Vec candidate = center + r * dir;
    if (in_cover(bundle, candidate)) continue;
    const double dist = distance_to_cover(bundle, candidate);
    if (dist <= bundle.geom.gap || dist > bundle.geom.gap + bundle.geom.sigma)
      continue;
    ring.push_back(candidate);
  }
  return ring;
}

double epsilon_net_radius(const std::vector<Vec>& points,
                          const std::vector<Vec>& probes) {
  if (probes.empty())
    throw std::invalid_argument("epsilon_net_radius: empty probe set");
  if (points.empty()) return std::numeric_limits<double>::infinity();
  const double span = [&]() {
    double m = 1e-6;
    for (const auto& p : points) m = std::max(m, p.cwiseAbs().maxCoeff());
    return m;
  }();
  GridIndex index(points, std::max(1e-6, span / 8.0));
  double radius = 0.0;
  for (const auto& probe : probes)
    radius = std::max(radius, index.min_distance(probe));
  return radius;
}

std::vector<Vec> thin_safe_sets(const std::vector<Vec>& safe_points,
                                const std::vector<Vec>& ring_samples,
                                double standoff) {
  if (standoff < 0.0) throw std::invalid_argument("thin_safe_sets: standoff < 0");
  if (standoff == 0.0 || ring_samples.empty()) return safe_points;
  std::vector<Vec> kept;
  for (const auto& z : safe_points) {
    double dmin = std::numeric_limits<double>::infinity();
    for (const auto& r : ring_samples) dmin = std::min(dmin, (z - r).norm());
    if (dmin > standoff) kept.push_back(z);
  }
  return kept;
}

namespace {

void write_sample_csv(std::ofstream& out, const std::string& kind, double t,
                      const Vec& z, const Vec& u) {
  out << kind << ',' << t;
  for (int i = 0; i < z.size(); ++i) out << ',' << z[i];
  for (int i = 0; i < u.size(); ++i) out << ',' << u[i];
  out << '\n';
}

}  // namespace

void write_dataset_csv(const DatasetBundle& bundle, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  int n_z = 0, m_c = 0, m_d = 0;
  if (!bundle.flow_samples.empty()) {
    n_z = static_cast<int>(bundle.flow_samples.front().z.size());
    m_c = static_cast<int>(bundle.flow_samples.front().u.size());
  }
  if (!bundle.jump_samples.empty()) {
    n_z = static_cast<int>(bundle.jump_samples.front().z.size());
    m_d = static_cast<int>(bundle.jump_samples.front().u.size());
  }
  {
    std::ofstream out(dir + "/flow_samples.csv");
    out.precision(17);
    out << "kind,t";
    for (int i = 1; i <= n_z; ++i) out << ",z_" << i;
    for (int i = 1; i <= m_c; ++i) out << ",u_" << i;
    out << '\n';
    for (const auto& s : bundle.flow_samples)
      write_sample_csv(out, "flow", s.t, s.z, s.u);
  }
  {
    std::ofstream out(dir + "/jump_samples.csv");
    out.precision(17);
    out << "kind,t";
    for (int i = 1; i <= n_z; ++i) out << ",z_" << i;
    for (int i = 1; i <= m_d; ++i) out << ",u_" << i;
    out << '\n';
    for (const auto& s : bundle.jump_samples)
      write_sample_csv(out, "jump", s.t, s.z, s.u);
  }
  {
    std::ofstream out(dir + "/ring_samples.csv");
    out.precision(17);
    out << "kind,t";
    for (int i = 1; i <= n_z; ++i) out << ",z_" << i;
    out << '\n';
    for (const auto& z : bundle.ring_samples)
      write_sample_csv(out, "ring", 0.0, z, Vec(0));
  }
}

void write_dataset_manifest(const DatasetBundle& bundle, const std::string& path,
                            std::uint64_t seed, const std::string& config_hash) {
  nlohmann::json doc;
  doc["counts"] = {{"flow", bundle.flow_samples.size()},
                   {"jump", bundle.jump_samples.size()},
                   {"ring", bundle.ring_samples.size()},
                   {"excluded", bundle.excluded_samples}};
  doc["geometry"] = {{"eps_c", bundle.geom.eps_c},
                     {"eps_d", bundle.geom.eps_d},
                     {"sigma", bundle.geom.sigma},
                     {"gap", bundle.geom.gap},
                     {"eps_bar", bundle.geom.eps_bar}};
  doc["seed"] = seed;
  doc["config_hash"] = config_hash;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_dataset_manifest: cannot open " + path);
  out << doc.dump(2) << '\n';
}

namespace {

std::vector<std::vector<double>> read_csv_rows(const std::string& path,
                                               std::string& header) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_dataset_csv: cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::getline(in, header);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');  // kind column
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(std::move(row));
  }
  return rows;
}

int count_cols(const std::string& header, const std::string& prefix) {
  int n = 0;
  std::stringstream ss(header);
  std::string cell;
  while (std::getline(ss, cell, ','))
    if (cell.rfind(prefix, 0) == 0) ++n;
  return n;
}

}  // namespace

DatasetBundle load_dataset_csv(const std::string& dir) {
  DatasetBundle bundle;
  std::string header;
  {
    const auto rows = read_csv_rows(dir + "/flow_samples.csv", header);
    const int n_z = count_cols(header, "z_");
    const int m = count_cols(header, "u_");
    for (const auto& row : rows) {
      FlowSample s;
      s.t = row[0];
      s.z = Eigen::Map<const Vec>(row.data() + 1, n_z);
      s.u = Eigen::Map<const Vec>(row.data() + 1 + n_z, m);
      bundle.flow_samples.push_back(std::move(s));
    }
  }
  {
    const auto rows = read_csv_rows(dir + "/jump_samples.csv", header);
    const int n_z = count_cols(header, "z_");
    const int m = count_cols(header, "u_");
    for (const auto& row : rows) {
      JumpSample s;
      s.t = row[0];
      s.z = Eigen::Map<const Vec>(row.data() + 1, n_z);
      s.u = Eigen::Map<const Vec>(row.data() + 1 + n_z, m);
      bundle.jump_samples.push_back(std::move(s));
    }
  }
  {
    const auto rows = read_csv_rows(dir + "/ring_samples.csv", header);
    const int n_z = count_cols(header, "z_");
    for (const auto& row : rows)
      bundle.ring_samples.push_back(Eigen::Map<const Vec>(row.data() + 1, n_z));
  }
  return bundle;
}

}  // namespace rhcbf
