#ifndef RECOVERKIT_ENVS_TASKS_HPP
#define RECOVERKIT_ENVS_TASKS_HPP

#include <functional>
#include <vector>

#include <Eigen/Core>

#include "recoverkit/approx/net.hpp"
#include "recoverkit/envs/balancer.hpp"
#include "recoverkit/envs/cartpole.hpp"
#include "recoverkit/rl/task.hpp"

namespace recoverkit::envs {

enum class BalanceControlMode {
  direct,    // action scaled to the force clamp
  residual,  // action scaled to residual_bound, added onto the LQR baseline
  baseline,  // LQR only; the action is ignored
};

struct BalanceTaskConfig {
  BalancerParams params;
  Eigen::Vector2d target{0.0, 0.0};
  double start_radius = 0.25;  // reset offset: uniform angle, uniform radius
  double start_speed = 0.3;    // reset velocity drawn the same way
  int control_steps = 200;
  int sim_per_control = 5;  // control period = sim_per_control * params.dt
  BalanceControlMode mode = BalanceControlMode::direct;
  Eigen::Matrix<double, 2, 4> lqr_gain = default_balancer_gain();
  double residual_bound = 4.0;  // [N], per axis
  Perturbation push;            // fixed push; omega 0 means none
};

// Outcome of one finished episode, for curriculum bookkeeping.
struct BalanceEpisode {
  Perturbation push;
  bool success = false;  // position and speed small at episode end
  double ep_return = 0.0;
};

// Balance keeping as an episodic MDP. Observation (C - target, Cdot).
// Episodes only end by timeout; the success predicate is |C - target| <
// 0.05 and |Cdot| < 0.05 at the final step.
class BalanceTask final : public rl::ControlTask {
 public:
  explicit BalanceTask(const BalanceTaskConfig& cfg);

  int obs_dim() const override { return 4; }
  int act_dim() const override { return 2; }
  int horizon() const override { return cfg_.control_steps; }
  Eigen::VectorXd reset(RngStream& rng) override;
  rl::StepResult step(const Eigen::Ref<const Eigen::VectorXd>& u) override;

  // Per-episode push override, drawn at every reset; when unset the
  // configured fixed push is used.
  void set_push_sampler(std::function<Perturbation(RngStream&)> s);

  // Finished episodes since the last drain, oldest first.
  std::vector<BalanceEpisode> drain_episodes();

  // Puts the task at an exact state with a fixed push, for probing.
  Eigen::VectorXd reset_to(const BalancerState& s, const Perturbation& push);

  const BalancerState& state() const { return s_; }
  const BalanceTaskConfig& config() const { return cfg_; }

 private:
  Eigen::VectorXd observe() const;

  BalanceTaskConfig cfg_;
  std::function<Perturbation(RngStream&)> sampler_;
  std::vector<BalanceEpisode> finished_;
  BalancerState s_;
  Perturbation push_;
  double ep_return_ = 0.0;
  int sim_t_ = 0;  // sim steps into the episode, drives the push window
  int k_ = 0;      // control steps into the episode
};

bool balance_success(const BalancerState& s,
                     const Eigen::Ref<const Eigen::Vector2d>& target);

// Hands control to a frozen parent value net: entering the region it
// certifies (v(s) > vbar) ends the episode with a handover bonus folded
// into the final reward, pre-discounted by one gamma so the trajectory's
// discounted sum matches alpha * gamma^T * v(s_T) exactly.
struct RelayGate {
  approx::NetSpec v_spec;
  approx::ParamVector v_params;
  double vbar = 0.0;
  double alpha = 30.0;
  double gamma = 0.99;
};

struct SwingupTaskConfig {
  CartpoleParams params;
  int horizon = 500;
  double x_limit = 2.4;      // |x| beyond ends the episode as a failure
  double rate_limit = 12.0;  // |phidot| cap, same role
  // Gaussian start distribution; phi is unwrapped, pi means hanging.
  // Default spread: sigma (0.05 m, 0.3 m/s, 0.35 rad, 0.5 rad/s).
  Eigen::Vector4d start_mean{0.0, 0.0, M_PI, 0.0};
  Eigen::Matrix4d start_cov =
      Eigen::Vector4d{0.0025, 0.09, 0.1225, 0.25}.asDiagonal();
  double w_x = 0.05;  // cart-offset penalty weight
  double w_u = 0.01;  // control effort penalty weight
  // Pole-rate penalty. Without it the best return is a perpetual spin
  // through upright, and nothing ever balances.
  double w_r = 0.01;
};

struct SwingupEpisode {
  Eigen::Vector4d start;
  Eigen::Vector4d last;
  rl::StopCause stop = rl::StopCause::timeout;
  double ep_return = 0.0;  // raw rewards, bonus excluded
  int steps = 0;
};

// Pole near upright, nearly still. The margin is deliberately loose so a
// policy that keeps drifting off and catching itself still counts.
bool swingup_success(const Eigen::Ref<const Eigen::Vector4d>& s);

// Cartpole swing-up as an episodic MDP on the raw state (x, xdot, phi,
// phidot). Reward cos(phi) - w_x (x/x_limit)^2 - w_u u^2 - w_r phidot^2;
// leaving the cart
// or rate box is a failure termination.
class SwingupTask final : public rl::ControlTask {
 public:
  explicit SwingupTask(const SwingupTaskConfig& cfg);

  int obs_dim() const override { return 4; }
  int act_dim() const override { return 1; }
  int horizon() const override { return cfg_.horizon; }
  Eigen::VectorXd reset(RngStream& rng) override;
  rl::StepResult step(const Eigen::Ref<const Eigen::VectorXd>& u) override;

  Eigen::VectorXd reset_to(const CartpoleState& s);

  void set_relay_gate(const RelayGate& gate);
  void clear_relay_gate();
  bool has_relay_gate() const { return gated_; }

  std::vector<SwingupEpisode> drain_episodes();

  const CartpoleState& state() const { return s_; }
  const SwingupTaskConfig& config() const { return cfg_; }

 private:
  SwingupTaskConfig cfg_;
  Eigen::Matrix4d start_chol_;  // sqrt factor of start_cov
  RelayGate gate_;
  bool gated_ = false;
  std::vector<SwingupEpisode> finished_;
  CartpoleState s_{0.0, 0.0, M_PI, 0.0};
  Eigen::Vector4d start_{0.0, 0.0, M_PI, 0.0};
  double ep_return_ = 0.0;
  int k_ = 0;
};

}  // namespace recoverkit::envs

#endif
