#ifndef RECOVERKIT_ENVS_CARTPOLE_HPP
#define RECOVERKIT_ENVS_CARTPOLE_HPP

#include <Eigen/Core>

namespace recoverkit::envs {

// Cart-pole with parameterized dynamics. State (x, xdot, phi, phidot);
// phi is measured from upright, so the hanging rest state is phi = pi.
// mu collects the observable physical parameters, nu the hidden ones.
struct CartpoleParams {
  // mu
  double pole_length = 0.5;  // half-length of the pole [m]
  double pole_mass = 0.1;    // [kg]
  double cart_mass = 1.0;    // [kg]
  // nu
  double rot_damping = 0.0;    // viscous joint torque coeff [N m s/rad]
  double rot_friction = 0.0;   // Coulomb joint torque [N m]
  double trans_friction = 0.0; // Coulomb cart force [N]

  double gravity = 9.81;
  double step_dt = 0.02;
  double force_max = 10.0;  // [N]

  Eigen::Vector3d mu() const { return {pole_length, pole_mass, cart_mass}; }
  Eigen::Vector3d nu() const { return {rot_damping, rot_friction, trans_friction}; }
  void set_mu(const Eigen::Ref<const Eigen::Vector3d>& m) {
    pole_length = m[0]; pole_mass = m[1]; cart_mass = m[2];
  }
  void set_nu(const Eigen::Ref<const Eigen::Vector3d>& n) {
    rot_damping = n[0]; rot_friction = n[1]; trans_friction = n[2];
  }
};

using CartpoleState = Eigen::Vector4d;  // (x, xdot, phi, phidot)

// (xddot, phiddot) from the pole/cart force balance; sign(0) = 0, so the
// Coulomb terms vanish at rest rather than model stiction.
Eigen::Vector2d cartpole_accel(const CartpoleParams& p, const CartpoleState& s,
                               double u);

// One semi-implicit Euler step with the control clamped to +-force_max.
CartpoleState cartpole_step(const CartpoleParams& p, const CartpoleState& s,
                            double u);

}  // namespace recoverkit::envs

#endif
