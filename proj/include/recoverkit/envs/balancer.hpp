#ifndef RECOVERKIT_ENVS_BALANCER_HPP
#define RECOVERKIT_ENVS_BALANCER_HPP

#include <Eigen/Core>

namespace recoverkit::envs {

// Planar balancer: a point mass pushed around on the plane, to be held at a
// target by bounded control forces while external pushes try to eject it.
struct BalancerState {
  Eigen::Vector2d C{0.0, 0.0};     // position [m]
  Eigen::Vector2d Cdot{0.0, 0.0};  // velocity [m/s]
};

struct BalancerParams {
  double mass = 1.0;      // [kg]
  double drag = 0.5;      // viscous [N s/m]
  double force_max = 10.0;  // control clamp, per run [N]
  double dt = 2e-3;
};

struct Perturbation {
  double theta = 0.0;     // push direction [rad]
  double omega = 0.0;     // push magnitude [N]
  double duration = 0.2;  // [s]
  double onset = 0.1;     // [s]

  Eigen::Vector2d force_at(double t) const {
    const bool on = t >= onset && t < onset + duration;
    return on ? Eigen::Vector2d{omega * std::cos(theta), omega * std::sin(theta)}
              : Eigen::Vector2d{0.0, 0.0};
  }
};

// Symplectic Euler; control is clamped componentwise, the push is not.
BalancerState balancer_step(const BalancerParams& p, const BalancerState& s,
                            const Eigen::Ref<const Eigen::Vector2d>& control,
                            const Eigen::Ref<const Eigen::Vector2d>& push);

// u = -K [C - target; Cdot], K is 2x4.
Eigen::Vector2d lqr_action(const Eigen::Ref<const Eigen::Matrix<double, 2, 4>>& K,
                           const BalancerState& s,
                           const Eigen::Ref<const Eigen::Vector2d>& target);

// Stabilizing default gain for the desk-scale balancer (pd on each axis).
Eigen::Matrix<double, 2, 4> default_balancer_gain();

// -w_p |C - target|^2 - w_d |Cdot|^2
double balance_reward(const BalancerState& s,
                      const Eigen::Ref<const Eigen::Vector2d>& target,
                      double w_p = 1.0, double w_d = 0.1);

}  // namespace recoverkit::envs

#endif
