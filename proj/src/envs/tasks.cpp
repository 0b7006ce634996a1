#include "recoverkit/envs/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace recoverkit::envs {

bool balance_success(const BalancerState& s,
                     const Eigen::Ref<const Eigen::Vector2d>& target) {
  return (s.C - target).norm() < 0.05 && s.Cdot.norm() < 0.05;
}

BalanceTask::BalanceTask(const BalanceTaskConfig& cfg) : cfg_(cfg) {
  if (cfg_.control_steps < 1 || cfg_.sim_per_control < 1)
    throw std::invalid_argument("balance task: step counts must be positive");
  if (cfg_.residual_bound < 0.0)
    throw std::invalid_argument("balance task: residual bound negative");
  push_ = cfg_.push;
}

void BalanceTask::set_push_sampler(std::function<Perturbation(RngStream&)> s) {
  sampler_ = std::move(s);
}

std::vector<BalanceEpisode> BalanceTask::drain_episodes() {
  std::vector<BalanceEpisode> out;
  out.swap(finished_);
  return out;
}

Eigen::VectorXd BalanceTask::observe() const {
  Eigen::VectorXd o(4);
  o.head<2>() = s_.C - cfg_.target;
  o.tail<2>() = s_.Cdot;
  return o;
}

Eigen::VectorXd BalanceTask::reset(RngStream& rng) {
  const double ang_p = rng.uniform(0.0, 2.0 * M_PI);
  const double rad_p = rng.uniform(0.0, cfg_.start_radius);
  const double ang_v = rng.uniform(0.0, 2.0 * M_PI);
  const double rad_v = rng.uniform(0.0, cfg_.start_speed);
  s_.C = cfg_.target + rad_p * Eigen::Vector2d{std::cos(ang_p), std::sin(ang_p)};
  s_.Cdot = rad_v * Eigen::Vector2d{std::cos(ang_v), std::sin(ang_v)};
  push_ = sampler_ ? sampler_(rng) : cfg_.push;
  ep_return_ = 0.0;
  sim_t_ = 0;
  k_ = 0;
  return observe();
}

Eigen::VectorXd BalanceTask::reset_to(const BalancerState& s,
                                      const Perturbation& push) {
  s_ = s;
  push_ = push;
  ep_return_ = 0.0;
  sim_t_ = 0;
  k_ = 0;
  return observe();
}

rl::StepResult BalanceTask::step(const Eigen::Ref<const Eigen::VectorXd>& u) {
  if (u.size() != 2) throw std::invalid_argument("balance task: action size");
  const Eigen::Vector2d un = u.cwiseMax(-1.0).cwiseMin(1.0);
  Eigen::Vector2d control;
  switch (cfg_.mode) {
    case BalanceControlMode::direct:
      control = cfg_.params.force_max * un;
      break;
    case BalanceControlMode::residual:
      control = lqr_action(cfg_.lqr_gain, s_, cfg_.target) +
                cfg_.residual_bound * un;
      break;
    case BalanceControlMode::baseline:
      control = lqr_action(cfg_.lqr_gain, s_, cfg_.target);
      break;
  }
  for (int i = 0; i < cfg_.sim_per_control; ++i) {
    const double t = static_cast<double>(sim_t_) * cfg_.params.dt;
    s_ = balancer_step(cfg_.params, s_, control, push_.force_at(t));
    ++sim_t_;
  }
  ++k_;
  rl::StepResult res;
  res.obs = observe();
  res.reward = balance_reward(s_, cfg_.target);
  ep_return_ += res.reward;
  if (k_ >= cfg_.control_steps) {
    res.stop = rl::StopCause::timeout;
    BalanceEpisode ep;
    ep.push = push_;
    ep.success = balance_success(s_, cfg_.target);
    ep.ep_return = ep_return_;
    finished_.push_back(ep);
  }
  return res;
}

bool swingup_success(const Eigen::Ref<const Eigen::Vector4d>& s) {
  return std::cos(s[2]) > 0.95 && std::abs(s[3]) < 1.0;
}

SwingupTask::SwingupTask(const SwingupTaskConfig& cfg) : cfg_(cfg) {
  if (cfg_.horizon < 1)
    throw std::invalid_argument("swingup task: horizon must be positive");
  if (!(cfg_.x_limit > 0.0) || !(cfg_.rate_limit > 0.0))
    throw std::invalid_argument("swingup task: limits must be positive");
  const Eigen::Matrix4d sym =
      0.5 * (cfg_.start_cov + cfg_.start_cov.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(sym);
  if (eig.eigenvalues().minCoeff() < -1e-10)
    throw std::invalid_argument("swingup task: start covariance not PSD");
  start_chol_ = eig.eigenvectors() *
                eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                eig.eigenvectors().transpose();
  s_ = cfg_.start_mean;
  start_ = s_;
}

void SwingupTask::set_relay_gate(const RelayGate& gate) {
  if (gate.v_spec.input_dim != 4 || gate.v_spec.output_dim != 1)
    throw std::invalid_argument("swingup task: gate net shape");
  if (!std::isfinite(gate.vbar))
    throw std::invalid_argument("swingup task: gate threshold not finite");
  gate_ = gate;
  gated_ = true;
}

void SwingupTask::clear_relay_gate() { gated_ = false; }

std::vector<SwingupEpisode> SwingupTask::drain_episodes() {
  std::vector<SwingupEpisode> out;
  out.swap(finished_);
  return out;
}

Eigen::VectorXd SwingupTask::reset(RngStream& rng) {
  s_ = cfg_.start_mean + start_chol_ * Eigen::Vector4d(rng.normal_vec(4));
  start_ = s_;
  ep_return_ = 0.0;
  k_ = 0;
  return s_;
}

Eigen::VectorXd SwingupTask::reset_to(const CartpoleState& s) {
  s_ = s;
  start_ = s;
  ep_return_ = 0.0;
  k_ = 0;
  return s_;
}

rl::StepResult SwingupTask::step(const Eigen::Ref<const Eigen::VectorXd>& u) {
  if (u.size() != 1) throw std::invalid_argument("swingup task: action size");
  const double un = std::clamp(u[0], -1.0, 1.0);
  s_ = cartpole_step(cfg_.params, s_, un * cfg_.params.force_max);
  ++k_;
  rl::StepResult res;
  res.obs = s_;
  res.reward = std::cos(s_[2]) - cfg_.w_x * (s_[0] / cfg_.x_limit) *
                                     (s_[0] / cfg_.x_limit) -
               cfg_.w_u * un * un - cfg_.w_r * s_[3] * s_[3];
  ep_return_ += res.reward;
  if (std::abs(s_[0]) > cfg_.x_limit || std::abs(s_[3]) > cfg_.rate_limit) {
    res.stop = rl::StopCause::failure;
  } else if (gated_) {
    const double v =
        approx::forward(gate_.v_spec, gate_.v_params, s_)[0];
    if (v > gate_.vbar) {
      res.stop = rl::StopCause::relay;
      // One factor of gamma keeps the bonus at gamma^T when the previous
      // steps contribute gamma^0..gamma^(T-1).
      res.reward += gate_.gamma * gate_.alpha * v;
    }
  }
  if (res.stop == rl::StopCause::running && k_ >= cfg_.horizon)
    res.stop = rl::StopCause::timeout;
  if (res.stop != rl::StopCause::running) {
    SwingupEpisode ep;
    ep.start = start_;
    ep.last = s_;
    ep.stop = res.stop;
    ep.ep_return = ep_return_;
    ep.steps = k_;
    finished_.push_back(ep);
  }
  return res;
}

}  // namespace recoverkit::envs
