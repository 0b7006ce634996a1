#include "recoverkit/envs/balancer.hpp"

#include <cmath>
#include <stdexcept>

namespace recoverkit::envs {

BalancerState balancer_step(const BalancerParams& p, const BalancerState& s,
                            const Eigen::Ref<const Eigen::Vector2d>& control,
                            const Eigen::Ref<const Eigen::Vector2d>& push) {
  if (p.mass <= 0.0) throw std::invalid_argument("balancer: mass must be positive");
  const Eigen::Vector2d u = control.cwiseMax(-p.force_max).cwiseMin(p.force_max);
  BalancerState n = s;
  const Eigen::Vector2d acc = (u + push - p.drag * s.Cdot) / p.mass;
  n.Cdot += p.dt * acc;
  n.C += p.dt * n.Cdot;
  if (!n.C.allFinite() || !n.Cdot.allFinite())
    throw std::runtime_error("balancer: state diverged");
  return n;
}

Eigen::Vector2d lqr_action(const Eigen::Ref<const Eigen::Matrix<double, 2, 4>>& K,
                           const BalancerState& s,
                           const Eigen::Ref<const Eigen::Vector2d>& target) {
  Eigen::Vector4d e;
  e << s.C - target, s.Cdot;
  return -K * e;
}

Eigen::Matrix<double, 2, 4> default_balancer_gain() {
  // Critically damped per axis for mass 1, drag 0.5: u = -kp e - kd edot,
  // kp = 25, kd + drag = 2*sqrt(kp) -> kd = 9.5.
  Eigen::Matrix<double, 2, 4> K = Eigen::Matrix<double, 2, 4>::Zero();
  K(0, 0) = 25.0; K(1, 1) = 25.0;
  K(0, 2) = 9.5;  K(1, 3) = 9.5;
  return K;
}

double balance_reward(const BalancerState& s,
                      const Eigen::Ref<const Eigen::Vector2d>& target,
                      double w_p, double w_d) {
  return -w_p * (s.C - target).squaredNorm() - w_d * s.Cdot.squaredNorm();
}

}  // namespace recoverkit::envs
