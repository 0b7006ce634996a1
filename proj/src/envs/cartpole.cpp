#include "recoverkit/envs/cartpole.hpp"

#include <cmath>
#include <stdexcept>

namespace recoverkit::envs {

namespace {
double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }
}

Eigen::Vector2d cartpole_accel(const CartpoleParams& p, const CartpoleState& s,
                               double u) {
  if (p.pole_length <= 0.0 || p.pole_mass <= 0.0 || p.cart_mass <= 0.0)
    throw std::invalid_argument("cartpole: masses and length must be positive");
  const double l = p.pole_length, mp = p.pole_mass, mc = p.cart_mass;
  const double phi = s[2], xd = s[1], phid = s[3];
  const double c = std::cos(phi), sn = std::sin(phi);

  // [ mc+mp      mp l c   ] [xdd  ]   [ u - ct sgn(xd) + mp l phid^2 sn ]
  // [ mp l c    (4/3) mp l^2] [phidd] = [ mp g l sn - br phid - cr sgn(phid) ]
  const double a11 = mc + mp, a12 = mp * l * c;
  const double a22 = (4.0 / 3.0) * mp * l * l;
  const double b1 = u - p.trans_friction * sgn(xd) + mp * l * phid * phid * sn;
  const double b2 =
      mp * p.gravity * l * sn - p.rot_damping * phid - p.rot_friction * sgn(phid);
  const double det = a11 * a22 - a12 * a12;  // > 0: mass matrix is SPD
  return {(a22 * b1 - a12 * b2) / det, (a11 * b2 - a12 * b1) / det};
}

CartpoleState cartpole_step(const CartpoleParams& p, const CartpoleState& s,
                            double u) {
  u = std::min(std::max(u, -p.force_max), p.force_max);
  const Eigen::Vector2d acc = cartpole_accel(p, s, u);
  CartpoleState n = s;
  n[1] += p.step_dt * acc[0];
  n[3] += p.step_dt * acc[1];
  n[0] += p.step_dt * n[1];
  n[2] += p.step_dt * n[3];
  if (!n.allFinite()) throw std::runtime_error("cartpole: state diverged");
  return n;
}

}  // namespace recoverkit::envs
