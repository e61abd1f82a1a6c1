#include "rhcbf/experiment.hpp"

#include "rhcbf/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace rhcbf {

namespace {

std::string join(const std::string& dir, const std::string& leaf) {
  return (fs::path(dir) / leaf).string();
}

std::string param_tag(double p) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << p;
  std::string s = os.str();
  for (auto& c : s)
    if (c == '.') c = 'p';
  return s;
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  nlohmann::json doc;
  in >> doc;
  return doc;
}

void check_hash(const std::string& artifact, const std::string& found,
                const std::string& expected, bool force) {
  if (found == expected) return;
  const std::string msg = artifact + " was produced by config hash " + found +
                          " but the current config hashes to " + expected;
  if (!force) throw std::runtime_error(msg + " (use --force to override)");
  std::cerr << "warning: " << msg << " (continuing under --force)\n";
}

}  // namespace

ExperimentConfig ExperimentConfig::parse(const KeyValueConfig& kv) {
  ExperimentConfig c;
  c.raw = kv;
  c.plant = kv.get_string("plant", c.plant);
  c.out_dir = kv.get_string("out_dir", c.out_dir);

  auto& wp = c.walker.params;
  wp.m = kv.get_double("walker.m", wp.m);
  wp.m_H = kv.get_double("walker.m_h", wp.m_H);
  wp.a = kv.get_double("walker.a", wp.a);
  wp.b = kv.get_double("walker.b", wp.b);
  wp.slope = kv.get_double("walker.slope", wp.slope);
  wp.gravity = kv.get_double("walker.gravity", wp.gravity);
  c.walker.est_params = wp;
  c.walker.est_params.m_H = kv.get_double("walker.est_m_h", wp.m_H);
  c.walker.use_truth = c.walker.est_params.m_H != wp.m_H;
  c.walker.input_limit = kv.get_double("walker.input_limit", c.walker.input_limit);
  c.walker.flow_noise = kv.get_double("walker.delta_c", 0.25);
  c.walker.scissor_threshold =
      kv.get_double("walker.scissor_threshold", c.walker.scissor_threshold);
  c.walker.expert.k_energy = kv.get_double("walker.k_energy", 2.0);
  c.walker.expert.e_ref = kv.get_double("walker.e_ref", 0.0);
  if (c.plant == "walker" && c.walker.expert.e_ref == 0.0)
    c.walker.expert.e_ref = compass_gait::reference_energy(c.walker.est_params);

  c.toy.delta_c = kv.get_double("toy.delta_c", c.toy.delta_c);
  c.toy.input_limit = kv.get_double("toy.input_limit", c.toy.input_limit);
  c.toy.safe_radius = kv.get_double("toy.safe_radius", c.toy.safe_radius);

  c.n_ics = kv.get_int("data.n_ics", c.n_ics);
  c.ic_angle_halfwidth = kv.get_double("data.angle_halfwidth", c.ic_angle_halfwidth);
  c.ic_rate_halfwidth = kv.get_double("data.rate_halfwidth", c.ic_rate_halfwidth);
  c.collect.sample_dt = kv.get_double("data.sample_dt", c.collect.sample_dt);
  c.collect.horizon.T = kv.get_double("data.horizon_t", 10.0);
  c.collect.horizon.J = kv.get_int("data.horizon_j", 100);
  c.collect_noise = kv.get_string("data.noise", c.collect_noise);
  c.data_seed = kv.get_u64("data.seed", c.data_seed);
  c.geom.eps_c = kv.get_double("geom.eps_c", c.geom.eps_c);
  c.geom.eps_d = kv.get_double("geom.eps_d", c.geom.eps_d);
  c.geom.sigma = kv.get_double("geom.sigma", c.geom.sigma);
  c.geom.gap = kv.get_double("geom.gap", c.geom.gap);
  c.ring_target = kv.get_int("ring.target", c.ring_target);
  c.thin_standoff = kv.get_double("thin.standoff", c.thin_standoff);

  c.hp.gamma_safe = kv.get_double("train.gamma_safe", c.hp.gamma_safe);
  c.hp.gamma_unsafe = kv.get_double("train.gamma_unsafe", c.hp.gamma_unsafe);
  c.hp.gamma_dyn_c = kv.get_double("train.gamma_dyn_c", c.hp.gamma_dyn_c);
  c.hp.gamma_dyn_d = kv.get_double("train.gamma_dyn_d", c.hp.gamma_dyn_d);
  c.hp.lip_bar = kv.get_double("train.lip_bar", c.hp.lip_bar);
  c.hp.margin = kv.get_double("train.margin", c.hp.margin);
  c.hp.alpha_gain = kv.get_double("train.kappa", c.hp.alpha_gain);
  c.hp.weight_decay = kv.get_double("train.weight_decay", c.hp.weight_decay);
  c.hp.epochs = kv.get_int("train.epochs", c.hp.epochs);
  c.hp.eta = kv.get_double("train.eta", c.hp.eta);
  c.hp.beta = kv.get_double("train.beta", c.hp.beta);
  c.hp.seed = kv.get_u64("train.seed", c.hp.seed);
  c.hp.num_threads = kv.get_int("train.threads", c.hp.num_threads);
  c.hidden = kv.get_ints("train.hidden", c.hidden);

  c.verify_opt.seed = kv.get_u64("verify.seed", c.verify_opt.seed);
  c.verify_opt.lipschitz_samples =
      kv.get_int("verify.lipschitz_samples", c.verify_opt.lipschitz_samples);
  c.verify_opt.probe_samples =
      kv.get_int("verify.probe_samples", c.verify_opt.probe_samples);
  c.verify_opt.thin_standoff = c.thin_standoff;

  c.sweep_mode = kv.get_string("sweep.mode", c.sweep_mode);
  c.controllers = kv.get_strings("sweep.controllers", c.controllers);
  c.test_deltas = kv.get_doubles("sweep.test_deltas", c.test_deltas);
  c.hip_masses = kv.get_doubles("sweep.hip_masses", c.hip_masses);
  c.grid_n = kv.get_int("sweep.grid_n", c.grid_n);
  c.sweep_seeds = kv.get_int("sweep.seeds", c.sweep_seeds);
  c.max_steps = kv.get_int("sweep.max_steps", c.max_steps);
  c.sweep_horizon = kv.get_double("sweep.horizon_t", c.sweep_horizon);
  c.sweep_threads = kv.get_int("sweep.threads", c.sweep_threads);
  c.sweep_dt = kv.get_double("sweep.dt", c.sweep_dt);
  c.sweep_noise_hold = kv.get_double("sweep.noise_hold", c.sweep_noise_hold);
  c.sweep_angle_halfwidth =
      kv.get_double("sweep.angle_halfwidth", c.sweep_angle_halfwidth);
  c.sweep_rate_halfwidth =
      kv.get_double("sweep.rate_halfwidth", c.sweep_rate_halfwidth);
  c.robust_delta = kv.get_double("sweep.robust_delta", c.robust_delta);
  c.nonrobust_delta = kv.get_double("sweep.nonrobust_delta", c.nonrobust_delta);
  c.robust_checkpoint = kv.get_string("sweep.robust_checkpoint", "");
  c.nonrobust_checkpoint = kv.get_string("sweep.nonrobust_checkpoint", "");

  c.safe_angle_max = kv.get_double("safe.angle_max", c.safe_angle_max);
  c.safe_rate_max = kv.get_double("safe.rate_max", c.safe_rate_max);

  c.plot_resolution = kv.get_int("plot.resolution", c.plot_resolution);
  c.plot_checkpoint = kv.get_string("plot.checkpoint", "");

  c.validate();
  return c;
}

void ExperimentConfig::validate() const {
  if (plant != "walker" && plant != "toy")
    throw std::runtime_error("config: plant must be 'walker' or 'toy'");
  if (ring_target <= 0)
    throw std::runtime_error("config: ring.target must be positive");
  if (collect_noise != "none" && collect_noise != "uniform")
    throw std::runtime_error("config: data.noise must be 'none' or 'uniform'");
  if (sweep_mode != "noise" && sweep_mode != "hip_mass")
    throw std::runtime_error("config: sweep.mode must be 'noise' or 'hip_mass'");
  if (grid_n < 1 || sweep_seeds < 1 || max_steps < 1)
    throw std::runtime_error("config: sweep grid/seeds/max_steps must be >= 1");
  if (sweep_dt <= 0.0)
    throw std::runtime_error("config: sweep.dt must be positive");
  if (sweep_noise_hold < 0.0)
    throw std::runtime_error("config: sweep.noise_hold must be nonnegative");
  if (geom.gap < 0.0)
    throw std::runtime_error("config: geom.gap must be nonnegative");
  hp.validate();
  walker.params.validate();
  walker.est_params.validate();
}

PlantBundle make_plant(const ExperimentConfig& cfg) {
  PlantBundle pb;
  if (cfg.plant == "walker") {
    pb.sys = compass_gait::make_walker_system(cfg.walker);
    compass_gait::WalkerConfig wc = cfg.walker;
    pb.expert.flow_law = [wc](const Vec& z, double) {
      const InputBox box(Vec::Constant(2, -wc.input_limit),
                         Vec::Constant(2, wc.input_limit));
      return compass_gait::energy_expert(wc.est_params, wc.expert, z, box);
    };
    const double amax = cfg.safe_angle_max, rmax = cfg.safe_rate_max;
    pb.safe_set = [wc, amax, rmax](const Vec& z) {
      return !compass_gait::fell(wc, z) && std::abs(z[0]) < amax &&
             std::abs(z[1]) < amax && std::abs(z[2]) < rmax &&
             std::abs(z[3]) < rmax;
    };
    pb.train_ics = compass_gait::paper_initial_conditions(
        static_cast<int>(std::lround(std::sqrt(double(cfg.n_ics)))),
        cfg.ic_angle_halfwidth, cfg.ic_rate_halfwidth);
    while (static_cast<int>(pb.train_ics.size()) > cfg.n_ics)
      pb.train_ics.pop_back();
  } else {
    pb.sys = toy::make_toy_system(cfg.toy);
    pb.expert = toy::spiral_expert(cfg.toy);
    pb.safe_set = toy::toy_safe_set(cfg.toy);
    pb.train_ics =
        toy::toy_initial_conditions(cfg.n_ics, 0.15, cfg.toy.safe_radius - 0.05);
  }
  return pb;
}

int cmd_collect(const ExperimentConfig& cfg, bool /*force*/) {
  const PlantBundle pb = make_plant(cfg);
  CollectOptions opt = cfg.collect;
  if (cfg.plant == "walker") {
    const compass_gait::WalkerConfig wc = cfg.walker;
    opt.sim.fall_predicate = [wc](const Vec& z) {
      return compass_gait::fell(wc, z);
    };
  }
  DisturbancePolicy noise;
  noise.mode = (cfg.collect_noise == "uniform") ? DisturbanceMode::uniform_ball
                                                : DisturbanceMode::none;
  noise.seed = cfg.data_seed;

  DatasetBundle bundle =
      collect_expert(pb.sys, pb.expert, pb.train_ics, noise, pb.safe_set, opt);
  bundle.geom = cfg.geom;
  bundle.finalize();

  std::mt19937_64 rng(cfg.data_seed ^ 0xabcdef1234567890ull);
  bundle.ring_samples = build_ring(bundle, cfg.ring_target, rng);

  const std::string dir = join(cfg.out_dir, "dataset");
  fs::create_directories(dir);
  write_dataset_csv(bundle, dir);
  write_dataset_manifest(bundle, join(dir, "manifest.json"), cfg.data_seed,
                         cfg.hash());
  cfg.raw.write(join(cfg.out_dir, "config.resolved"));
  std::cout << "dataset: " << bundle.flow_samples.size() << " flow, "
            << bundle.jump_samples.size() << " jump, "
            << bundle.ring_samples.size() << " ring samples ("
            << bundle.excluded_samples << " excluded) -> " << dir << "\n";
  return 0;
}

namespace {

DatasetBundle load_bundle(const ExperimentConfig& cfg, bool force) {
  const std::string dir = join(cfg.out_dir, "dataset");
  if (!fs::exists(join(dir, "manifest.json")))
    throw std::runtime_error("dataset not found under " + dir +
                             "; run 'collect' first");
  const auto manifest = read_json(join(dir, "manifest.json"));
  check_hash("dataset", manifest["config_hash"].get<std::string>(), cfg.hash(),
             force);
  DatasetBundle bundle = load_dataset_csv(dir);
  bundle.geom.eps_c = manifest["geometry"]["eps_c"].get<double>();
  bundle.geom.eps_d = manifest["geometry"]["eps_d"].get<double>();
  bundle.geom.sigma = manifest["geometry"]["sigma"].get<double>();
  bundle.geom.gap = manifest["geometry"].value("gap", 0.0);
  bundle.geom.eps_bar = manifest["geometry"]["eps_bar"].get<double>();
  const PlantBundle pb = make_plant(cfg);
  bundle.safe_set = pb.safe_set;
  bundle.flow_set = pb.sys.flow_set;
  bundle.jump_set = pb.sys.jump_set;
  bundle.finalize();
  return bundle;
}

}  // namespace

int cmd_train(const ExperimentConfig& cfg, bool force) {
  const DatasetBundle bundle = load_bundle(cfg, force);
  const PlantBundle pb = make_plant(cfg);
  const TrainingData data = TrainingData::from_bundle(bundle, cfg.thin_standoff);

  const TrainResult result = train(pb.sys, data, cfg.hp, cfg.hidden);
  fs::create_directories(cfg.out_dir);
  result.best_net.save(join(cfg.out_dir, "checkpoint.json"), cfg.hp.seed,
                       cfg.hash());
  result.trace.write_csv(join(cfg.out_dir, "trace.csv"));
  const auto& last = result.trace.rows.back();
  std::cout << "trained " << cfg.hp.epochs << " epochs; final violations"
            << " safe=" << last.viol_safe << " unsafe=" << last.viol_unsafe
            << " dyn_c=" << last.viol_dyn_c << " dyn_d=" << last.viol_dyn_d
            << "; best total=" << result.best_violation << "\n";
  return 0;
}

int cmd_verify(const ExperimentConfig& cfg, bool force) {
  const std::string ckpt = join(cfg.out_dir, "checkpoint.json");
  if (!fs::exists(ckpt))
    throw std::runtime_error("checkpoint not found: " + ckpt);
  check_hash("checkpoint",
             read_json(ckpt)["metadata"]["config_hash"].get<std::string>(),
             cfg.hash(), force);
  const BarrierNet net = BarrierNet::load(ckpt);
  const DatasetBundle bundle = load_bundle(cfg, force);
  const PlantBundle pb = make_plant(cfg);

  const VerificationReport report =
      verify(net, pb.sys, bundle, cfg.hp, cfg.verify_opt);
  report.write_json(join(cfg.out_dir, "report.json"));
  std::cout << report.summary();
  return report.passed() ? 0 : 2;
}

namespace {

struct ControllerSetup {
  ControlLaw law;
  // Keeps the filter and its design system alive for the law's lifetime.
  std::shared_ptr<void> keepalive;
};

ControllerSetup build_controller(const ExperimentConfig& cfg,
                                 const std::string& name, double param,
                                 const BarrierNet* robust_net,
                                 const BarrierNet* nonrobust_net) {
  ControllerSetup setup;
  const compass_gait::WalkerConfig base = cfg.walker;
  const InputBox box(Vec::Constant(2, -base.input_limit),
                     Vec::Constant(2, base.input_limit));

  if (name == "zero") {
    setup.law = [](const Vec&, double) { return Vec::Zero(2); };
    return setup;
  }

  // Energy expert computed from the estimated model (the controller does not
  // see the true hip mass).
  compass_gait::WalkerParams est = base.est_params;
  compass_gait::ExpertGains gains = base.expert;
  ControlLaw energy = [est, gains, box](const Vec& z, double) {
    return compass_gait::energy_expert(est, gains, z, box);
  };
  if (name == "energy") {
    setup.law = energy;
    return setup;
  }

  const BarrierNet* net = (name == "robust") ? robust_net : nonrobust_net;
  if (net == nullptr)
    throw std::runtime_error("sweep: missing checkpoint for controller '" +
                             name + "'");
  // Design system: estimated dynamics with the robustness level the barrier
  // was trained for.
  compass_gait::WalkerConfig design = base;
  design.params = base.est_params;
  design.est_params = base.est_params;
  design.use_truth = false;
  design.flow_noise = (name == "robust")
                          ? (cfg.robust_delta >= 0.0 ? cfg.robust_delta
                                                     : base.flow_noise)
                          : cfg.nonrobust_delta;
  auto sys_design =
      std::make_shared<HybridSystem>(compass_gait::make_walker_system(design));
  auto filter = std::make_shared<FlowFilter>(BarrierFn::from_net(*net),
                                             *sys_design, cfg.hp.alpha_gain);
  struct Keep {
    std::shared_ptr<HybridSystem> sys;
    std::shared_ptr<FlowFilter> filter;
  };
  setup.keepalive = std::make_shared<Keep>(Keep{sys_design, filter});
  setup.law = [filter, energy](const Vec& z, double t) {
    return (*filter)(z, t, energy(z, t)).u_applied;
  };
  (void)param;
  return setup;
}

}  // namespace

SweepResult run_sweep(const ExperimentConfig& cfg, const BarrierNet* robust_net,
                      const BarrierNet* nonrobust_net) {
  if (cfg.plant != "walker")
    throw std::runtime_error("sweep: only the walker plant is supported");
  const std::vector<double>& params =
      (cfg.sweep_mode == "noise") ? cfg.test_deltas : cfg.hip_masses;
  const std::vector<Vec> ics = compass_gait::paper_initial_conditions(
      cfg.grid_n, cfg.sweep_angle_halfwidth, cfg.sweep_rate_halfwidth);

  SweepResult result;
  for (const auto& name : cfg.controllers) {
    for (double param : params) {
      // Test system: ground truth for this column of the sweep.
      compass_gait::WalkerConfig wc = cfg.walker;
      DisturbancePolicy dist;
      if (cfg.sweep_mode == "noise") {
        wc.flow_noise = param;
        wc.use_truth = false;
        wc.params = cfg.walker.params;
        wc.est_params = cfg.walker.params;
        dist.mode = (param > 0.0) ? DisturbanceMode::uniform_ball
                                  : DisturbanceMode::none;
        dist.hold_time = cfg.sweep_noise_hold;
      } else {
        wc.params.m_H = param;
        wc.use_truth = true;
        wc.flow_noise = cfg.walker.flow_noise;
        dist.mode = DisturbanceMode::none;
      }
      const HybridSystem sys_test = compass_gait::make_walker_system(wc);
      const ControllerSetup ctrl =
          build_controller(cfg, name, param, robust_net, nonrobust_net);

      const int cells = static_cast<int>(ics.size()) * cfg.sweep_seeds;
      std::vector<SweepRow> rows(cells);
      const int n_threads = std::max(1, cfg.sweep_threads);
      auto work = [&](int begin, int end) {
        for (int cell = begin; cell < end; ++cell) {
          const int ic_index = cell / cfg.sweep_seeds;
          const int seed_idx = cell % cfg.sweep_seeds;
          const Vec& z0 = ics[ic_index];
          DisturbancePolicy d = dist;
          d.seed = cfg.hp.seed ^
                   fnv1a64(name + "|" + param_tag(param) + "|" +
                           std::to_string(seed_idx) + "|" +
                           std::to_string(ic_index));
          ControlPair pair;
          pair.flow_law = ctrl.law;
          SimulateOptions sim;
          sim.step = cfg.sweep_dt;
          sim.fall_predicate = [wc](const Vec& z) {
            return compass_gait::fell(wc, z);
          };
          const HybridArc arc = simulate(sys_test, z0, pair, d,
                                         {cfg.sweep_horizon, cfg.max_steps + 5},
                                         sim);
          SweepRow row;
          row.controller = name;
          row.param = param;
          row.seed_idx = seed_idx;
          row.ic_index = ic_index;
          row.theta_swing = z0[1];
          row.dtheta_swing = z0[3];
          row.steps = compass_gait::count_steps(arc, cfg.max_steps);
          rows[cell] = std::move(row);
        }
      };
      if (n_threads == 1) {
        work(0, cells);
      } else {
        std::vector<std::thread> pool;
        const int chunk = (cells + n_threads - 1) / n_threads;
        for (int t = 0; t < n_threads; ++t)
          pool.emplace_back(work, std::min(t * chunk, cells),
                            std::min((t + 1) * chunk, cells));
        for (auto& th : pool) th.join();
      }

      double mean = 0.0;
      for (const auto& r : rows) mean += r.steps;
      mean /= std::max(1, cells);
      result.aggregate.emplace_back(name, param, mean);
      result.rows.insert(result.rows.end(),
                         std::make_move_iterator(rows.begin()),
                         std::make_move_iterator(rows.end()));
      std::cout << "sweep " << name << " param=" << param
                << " mean steps=" << mean << "\n";
    }
  }
  return result;
}

namespace {

void write_sweep_csvs(const ExperimentConfig& cfg, const SweepResult& res) {
  const std::string dir = join(cfg.out_dir, "sweep");
  fs::create_directories(dir);
  // Per (controller, param) grid files.
  for (const auto& [name, param, mean] : res.aggregate) {
    (void)mean;
    std::ofstream out(join(dir, "grid_" + name + "_" + param_tag(param) + ".csv"));
    out.precision(17);
    out << "theta_swing,dtheta_swing,seed,steps\n";
    for (const auto& r : res.rows)
      if (r.controller == name && r.param == param)
        out << r.theta_swing << ',' << r.dtheta_swing << ',' << r.seed_idx
            << ',' << r.steps << '\n';
  }
  std::ofstream agg(join(dir, "aggregate.csv"));
  agg.precision(17);
  agg << "controller,param,mean_steps\n";
  for (const auto& [name, param, mean] : res.aggregate)
    agg << name << ',' << param << ',' << mean << '\n';
}

}  // namespace

int cmd_sweep(const ExperimentConfig& cfg, bool force) {
  std::optional<BarrierNet> robust, nonrobust;
  auto want = [&](const std::string& name) {
    for (const auto& c : cfg.controllers)
      if (c == name) return true;
    return false;
  };
  if (want("robust")) {
    const std::string path = cfg.robust_checkpoint.empty()
                                 ? join(cfg.out_dir, "checkpoint.json")
                                 : cfg.robust_checkpoint;
    if (!fs::exists(path))
      throw std::runtime_error("sweep: robust checkpoint not found: " + path);
    robust = BarrierNet::load(path);
  }
  if (want("nonrobust")) {
    if (cfg.nonrobust_checkpoint.empty() || !fs::exists(cfg.nonrobust_checkpoint))
      throw std::runtime_error(
          "sweep: non-robust checkpoint not found (set sweep.nonrobust_checkpoint)");
    nonrobust = BarrierNet::load(cfg.nonrobust_checkpoint);
  }
  (void)force;
  const SweepResult res = run_sweep(cfg, robust ? &*robust : nullptr,
                                    nonrobust ? &*nonrobust : nullptr);
  write_sweep_csvs(cfg, res);
  std::cout << "sweep grids -> " << join(cfg.out_dir, "sweep") << "\n";
  return 0;
}

int cmd_plot(const ExperimentConfig& cfg, bool /*force*/) {
  const std::string sweep_dir = join(cfg.out_dir, "sweep");
  const std::string plot_dir = join(cfg.out_dir, "plots");
  if (!fs::exists(sweep_dir))
    throw std::runtime_error("plot: no sweep outputs under " + sweep_dir);
  fs::create_directories(plot_dir);

  std::vector<plot::Segment> contour;
  if (!cfg.plot_checkpoint.empty()) {
    const BarrierNet net = BarrierNet::load(cfg.plot_checkpoint);
    auto slice = [&](double x, double y) {
      if (cfg.plant == "walker") {
        Vec z(4);
        z << 0.0, x, 0.4, y;
        return net.forward(z);
      }
      Vec z(2);
      z << x, y;
      return net.forward(z);
    };
    const double ahw = cfg.sweep_angle_halfwidth, rhw = cfg.sweep_rate_halfwidth;
    contour = plot::marching_squares(slice, -ahw, ahw, -2.0 - rhw, -2.0 + rhw,
                                     cfg.plot_resolution);
  }

  std::vector<std::string> grids;
  for (const auto& entry : fs::directory_iterator(sweep_dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("grid_", 0) == 0) grids.push_back(entry.path().string());
  }
  std::sort(grids.begin(), grids.end());
  if (grids.empty()) throw std::runtime_error("plot: no grid CSVs found");

  for (const auto& path : grids) {
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);  // header
    std::vector<plot::ScatterPoint> pts;
    double x_min = 1e30, x_max = -1e30, y_min = 1e30, y_max = -1e30;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::stringstream ss(line);
      std::string cell;
      std::vector<double> vals;
      while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
      pts.push_back({vals[0], vals[1], vals[3]});
      x_min = std::min(x_min, vals[0]);
      x_max = std::max(x_max, vals[0]);
      y_min = std::min(y_min, vals[1]);
      y_max = std::max(y_max, vals[1]);
    }
    if (pts.empty()) throw std::runtime_error("plot: empty grid CSV " + path);
    const std::string stem = fs::path(path).stem().string();
    plot::write_scatter_svg(join(plot_dir, stem + ".svg"), pts, contour,
                            cfg.max_steps, x_min, x_max, y_min, y_max, stem);
  }
  std::cout << "plots -> " << plot_dir << "\n";
  return 0;
}

int cmd_report(const ExperimentConfig& cfg) {
  const std::string report_path = join(cfg.out_dir, "report.json");
  if (fs::exists(report_path)) {
    const auto doc = read_json(report_path);
    std::cout << "verification: " << (doc["passed"].get<bool>() ? "PASSED" : "FAILED")
              << " (eps_bar=" << doc["eps_bar"].get<double>()
              << ", Lip(h)<=" << doc["global_lip_h"].get<double>() << ")\n";
  } else {
    std::cout << "no verification report found\n";
  }
  const std::string agg_path = join(cfg.out_dir, "sweep/aggregate.csv");
  if (fs::exists(agg_path)) {
    std::ifstream in(agg_path);
    std::cout << in.rdbuf();
  } else {
    std::cout << "no sweep aggregate found\n";
  }
  return 0;
}

}  // namespace rhcbf
