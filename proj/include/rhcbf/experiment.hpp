#pragma once

#include "rhcbf/compass_gait.hpp"
#include "rhcbf/config.hpp"
#include "rhcbf/datasets.hpp"
#include "rhcbf/safe_control.hpp"
#include "rhcbf/toy_plant.hpp"
#include "rhcbf/train.hpp"
#include "rhcbf/verify.hpp"

namespace rhcbf {

/// Resolved experiment description: plant, expert, dataset geometry, training
/// hyperparameters, and sweep protocol. Parsed from a KeyValueConfig whose
/// hash stamps every artifact.
struct ExperimentConfig {
  KeyValueConfig raw;

  std::string plant{"walker"};  // "walker" | "toy"
  std::string out_dir{"out"};

  compass_gait::WalkerConfig walker;
  toy::ToyConfig toy;

  // dataset collection
  int n_ics{50};
  double ic_angle_halfwidth{0.08};
  double ic_rate_halfwidth{0.4};
  CollectOptions collect;
  std::string collect_noise{"none"};  // "none" | "uniform"
  std::uint64_t data_seed{1};
  Geometry geom;
  int ring_target{2000};
  double thin_standoff{0.0};

  // training
  Hyperparams hp;
  std::vector<int> hidden{32, 16};

  // verification
  VerifyOptions verify_opt;

  // sweep
  std::string sweep_mode{"noise"};  // "noise" | "hip_mass"
  std::vector<std::string> controllers{"robust", "nonrobust", "energy", "zero"};
  std::vector<double> test_deltas{0.0, 0.1, 0.2, 0.3, 0.4};
  std::vector<double> hip_masses{9.25, 9.5, 10.5, 10.75};
  int grid_n{20};
  int sweep_seeds{3};
  int max_steps{20};
  double sweep_horizon{10.0};
  int sweep_threads{1};
  double sweep_dt{1e-3};
  double sweep_noise_hold{0.5};  // seconds a noise-mode disturbance draw
                                 // persists before being redrawn
  double sweep_angle_halfwidth{0.15};
  double sweep_rate_halfwidth{1.0};
  double robust_delta{-1.0};     // filter Delta_c for the robust row; -1 means
                                 // the training value
  double nonrobust_delta{0.0};   // filter Delta_c for the non-robust row
  std::string robust_checkpoint;
  std::string nonrobust_checkpoint;

  // geometric safe set bounds (walker)
  double safe_angle_max{0.6};
  double safe_rate_max{5.0};

  // plotting
  int plot_resolution{80};
  std::string plot_checkpoint;

  static ExperimentConfig parse(const KeyValueConfig& kv);
  void validate() const;
  std::string hash() const { return raw.hash(); }
};

/// Plant wiring shared by the pipeline stages.
struct PlantBundle {
  HybridSystem sys;
  ControlPair expert;
  StatePredicate safe_set;
  std::vector<Vec> train_ics;
};

PlantBundle make_plant(const ExperimentConfig& cfg);

struct SweepRow {
  std::string controller;
  double param{0.0};  // test delta or hip mass
  int seed_idx{0};
  int ic_index{0};
  double theta_swing{0.0};
  double dtheta_swing{0.0};
  int steps{0};
};

struct SweepResult {
  std::vector<SweepRow> rows;
  // (controller, param) -> mean steps, in config order.
  std::vector<std::tuple<std::string, double, double>> aggregate;
};

/// Core of cmd_sweep, exposed for the acceptance suite: runs the full
/// (controller, param, seed, IC) grid for the walker and aggregates means.
SweepResult run_sweep(const ExperimentConfig& cfg,
                      const BarrierNet* robust_net,
                      const BarrierNet* nonrobust_net);

// Pipeline commands. All artifacts live under cfg.out_dir with fixed names;
// each returns a process exit code (0 ok, 2 verification fail, 3 runtime
// error handled by the caller).
int cmd_collect(const ExperimentConfig& cfg, bool force);
int cmd_train(const ExperimentConfig& cfg, bool force);
int cmd_verify(const ExperimentConfig& cfg, bool force);
int cmd_sweep(const ExperimentConfig& cfg, bool force);
int cmd_plot(const ExperimentConfig& cfg, bool force);
int cmd_report(const ExperimentConfig& cfg);

}  // namespace rhcbf
