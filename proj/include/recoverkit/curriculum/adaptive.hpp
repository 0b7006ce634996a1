#ifndef RECOVERKIT_CURRICULUM_ADAPTIVE_HPP
#define RECOVERKIT_CURRICULUM_ADAPTIVE_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include "recoverkit/curriculum/roa.hpp"
#include "recoverkit/envs/tasks.hpp"
#include "recoverkit/rl/ppo.hpp"

namespace recoverkit::curriculum {

// The controller under training: an LQR baseline plus a bounded learned
// residual on top of it.
struct ResidualPolicySpec {
  Eigen::Matrix<double, 2, 4> lqr_gain = envs::default_balancer_gain();
  Eigen::Vector2d target{0.0, 0.0};
  std::vector<int> residual_hidden{64, 64};
  double residual_bound = 4.0;  // [N] per axis

  void validate() const;
};

enum class SamplingMode {
  adaptive,  // band around the current polygon estimate
  uniform,   // fixed range, the ablation baseline
};

struct AdaptiveConfig {
  CurriculumConfig curriculum;
  rl::PpoConfig ppo;  // iterations/stop_return unused; the loop is ours
  envs::BalanceTaskConfig task;
  int iterations = 48;
  SamplingMode sampling = SamplingMode::adaptive;
  double uniform_omega_max = 40.0;  // [N], the fixed-range ablation's span
  // residual (default), direct for the pure-RL ablation, baseline for
  // fixed-controller runs
  envs::BalanceControlMode mode = envs::BalanceControlMode::residual;
  bool train_policy = true;  // false: roll trials, never update the nets
  int measure_trials = 5;
  double measure_resolution = 0.25;  // [N]
  double measure_omega_max = 60.0;   // [N], bisection bracket top
  std::uint64_t seed = 1;
};

struct RoAHistoryRow {
  int iteration = 0;
  int direction = 0;
  double theta = 0.0;
  double omega = 0.0;         // estimate before any end-of-iteration rescale
  double success_rate = -1.0; // over the current window; -1 when no trials
};

struct AdaptiveResult {
  rl::PpoResult policy;
  RoAPolygon estimate;  // final polygon estimate with counters as left
  RoAPolygon measured;  // bisection measurement of the final controller
  std::vector<RoAHistoryRow> history;
};

// The adaptive-sampling training loop: every iteration draws pushes from
// the sampler, rolls one optimizer batch (or plain trials when training is
// off), credits outcomes to directions, and rescales the polygon every
// update period.
AdaptiveResult train_adaptive(const ResidualPolicySpec& spec,
                              const AdaptiveConfig& cfg);

// Largest magnitude per direction whose success rate stays at or above
// `threshold`, by bisection down to `resolution`. `success` is called as
// (direction, omega, trial).
RoAPolygon measure_roa_with(
    const std::function<bool(int, double, int)>& success, int M, int trials,
    double resolution, double omega_max, double threshold = 0.9);

// Measures a concrete policy on the balancer: deterministic mean actions,
// start states from the task's reset distribution, one fixed push per
// probe. Bit-exact reproducible for a fixed seed.
RoAPolygon measure_roa(const rl::GaussianPolicy& pi,
                       const envs::BalanceTaskConfig& task_cfg, int M,
                       int trials, double resolution, double omega_max,
                       std::uint64_t seed, double threshold = 0.9);

}  // namespace recoverkit::curriculum

#endif
