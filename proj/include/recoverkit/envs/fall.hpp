#ifndef RECOVERKIT_ENVS_FALL_HPP
#define RECOVERKIT_ENVS_FALL_HPP

#include <string>
#include <vector>

#include <Eigen/Core>

#include "recoverkit/rng.hpp"

namespace recoverkit::envs {

// Planar pendulum-with-stopper abstraction of a falling robot. The body is
// an inverted pendulum about the current contact; the action plans where the
// next body part lands and how the telescoping length moves meanwhile.
//
// Frame: pivot at the origin, ground along +x (fall direction), y up.
// theta1 is measured from the vertical, positive toward +x.
struct FallState {
  int c1 = 0;          // index of the contacting body part
  double r1 = 0.0;     // pivot-to-COM distance [m]
  double theta1 = 0.0; // pendulum angle [rad]
  double rdot1 = 0.0;  // telescoping rate [m/s]
  double thetadot1 = 0.0; // angular rate [rad/s]

  Eigen::Vector4d continuous() const {
    return {r1, theta1, rdot1, thetadot1};
  }
};

// theta2: planned angle of the next pendulum at the contact moment
// (negative = COM behind the new pivot, the usual catch posture).
// delta: ground distance from the current pivot to the next contact [m].
// rdot1_d: telescoping rate setpoint during the current phase [m/s].
struct FallAction {
  double theta2 = -0.5;
  double delta = 0.1;
  double rdot1_d = 0.0;
};

struct BodyPart {
  std::string name;
  double delta_min = 0.0;  // reachable ground-distance band [m]
  double delta_max = 0.0;
};

struct FallModelParams {
  double M = 1.6;                  // body mass [kg]
  double I = 1.6 * 0.173 * 0.173 / 3.0;  // inertia about the COM [kg m^2]
  double gravity = 9.81;
  std::vector<BodyPart> parts = {
      {"toe", 0.02, 0.08},
      {"heel", 0.05, 0.14},
      {"knee", 0.10, 0.22},
      {"hand", 0.18, 0.40},
  };
  double r_min = 0.06, r_max = 0.24;       // telescoping limits [m]
  double theta2_min = -1.1, theta2_max = -0.15;
  double rdot_d_min = -0.25, rdot_d_max = 0.25;
  double servo_gain = 30.0;   // first-order length-servo rate [1/s]
  double dt = 1e-3;
  double max_phase_time = 3.0; // stall cutoff per contact phase [s]
  double thetadot_cap = 50.0;  // divergence guard [rad/s]

  int n_parts() const { return static_cast<int>(parts.size()); }
};

// Gaussian over (r1, theta1, rdot1, thetadot1); the start part is fixed.
struct FallStartDist {
  int c1 = 0;
  Eigen::Vector4d mean{0.17, 0.30, 0.0, 1.0};
  Eigen::Vector4d stddev{0.015, 0.12, 0.05, 0.5};
};

FallState sample_fall_start(const FallModelParams& mp, const FallStartDist& d,
                            RngStream& rng);

// Impulse magnitude of an inelastic vertical stop at the new contact
// (x2, y2), with the COM at (x1, y1). Only the horizontal offset enters the
// formula; the full coordinates are kept for callers that have them.
// ydot2_pre is the tip's vertical speed, downward-negative; positive values
// are a contract violation (tip moving away from the ground).
double impulse(double M, double I, double x1, double y1, double x2, double y2,
               double ydot2_pre);

double fall_reward(double j);  // 1 / (1 + j)

// True when no further falling can happen: rotating backward, resting with
// no torque pulling it over, or already flat on the ground.
bool fall_is_halted(const FallState& s);

struct ContactResult {
  FallState next;      // state re-rooted at the new pivot (if contact happened)
  double j = 0.0;      // impulse magnitude [Ns]
  double reward = 1.0; // fall_reward(j)
  bool halted = false; // fall arrested (or ended on the ground) before/at contact
  bool contact = false;   // a contact event actually happened
  bool ground_slam = false;  // theta1 reached pi/2: unplanned torso impact
  double phase_time = 0.0;   // integrated time within this phase [s]
};

// Integrates the pendulum until the planned stopper touches the ground,
// the fall arrests (thetadot1 < 0), or the body hits the ground flat.
// Contact time is refined by bisection to 1e-8 m of tip height.
ContactResult fall_simulate_to_next_contact(const FallModelParams& mp,
                                            const FallState& s, int next_part,
                                            const FallAction& a);

// Convenience wrappers for normalized policy action io in [-1, 1]^3.
Eigen::Vector3d fall_action_to_normalized(const FallModelParams& mp, int part,
                                          const FallAction& a);
FallAction fall_action_from_normalized(const FallModelParams& mp, int part,
                                       const Eigen::Ref<const Eigen::Vector3d>& u);

}  // namespace recoverkit::envs

#endif
