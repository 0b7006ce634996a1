#include "recoverkit/envs/fall.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace recoverkit::envs {

namespace {

double clamp(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

struct Phase {
  double r, th, rd, thd;
};

// Horizontal gap between the stopper line's ground intercept and the planned
// contact point. Crosses zero from below exactly when the stopper touches
// down at distance delta; units are meters.
double contact_gap(const Phase& p, double theta2, double delta) {
  const double x1 = p.r * std::sin(p.th);
  const double y1 = p.r * std::cos(p.th);
  return x1 - y1 * std::tan(theta2) - delta;
}

Phase integrate(const FallModelParams& mp, const Phase& p, double rdot_d, double dt) {
  Phase n = p;
  const double inertia = mp.I + mp.M * p.r * p.r;
  const double thdd = mp.M * mp.gravity * p.r * std::sin(p.th) / inertia;
  n.rd += dt * mp.servo_gain * (rdot_d - p.rd);
  n.thd += dt * thdd;
  n.r += dt * n.rd;
  if (n.r <= mp.r_min) { n.r = mp.r_min; n.rd = std::max(0.0, n.rd); }
  if (n.r >= mp.r_max) { n.r = mp.r_max; n.rd = std::min(0.0, n.rd); }
  n.th += dt * n.thd;
  return n;
}

}  // namespace

FallState sample_fall_start(const FallModelParams& mp, const FallStartDist& d,
                            RngStream& rng) {
  FallState s;
  s.c1 = d.c1;
  Eigen::Vector4d v;
  for (int i = 0; i < 4; ++i) v[i] = d.mean[i] + d.stddev[i] * rng.normal();
  s.r1 = clamp(v[0], mp.r_min, mp.r_max);
  s.theta1 = clamp(v[1], 0.02, 1.2);     // leaning into the fall
  s.rdot1 = clamp(v[2], mp.rdot_d_min, mp.rdot_d_max);
  s.thetadot1 = clamp(v[3], 0.05, 5.0);  // already falling
  return s;
}

double impulse(double M, double I, double x1, double y1, double x2, double y2,
               double ydot2_pre) {
  (void)y1; (void)y2;  // the vertical stop depends only on the lever arm x2-x1
  if (M <= 0.0 || I <= 0.0)
    throw std::invalid_argument("impulse: M and I must be positive");
  if (ydot2_pre > 0.0)
    throw std::invalid_argument("impulse: tip moving upward (ydot2_pre > 0)");
  const double dx = x2 - x1;
  return -ydot2_pre / (1.0 / M + dx * dx / I);
}

double fall_reward(double j) {
  if (j < 0.0) throw std::invalid_argument("fall_reward: negative impulse");
  return 1.0 / (1.0 + j);
}

bool fall_is_halted(const FallState& s) {
  return s.thetadot1 < 0.0 ||
         (s.thetadot1 == 0.0 && std::sin(s.theta1) <= 0.0) ||
         s.theta1 >= M_PI / 2.0;  // flat on the ground: supported, not falling
}

ContactResult fall_simulate_to_next_contact(const FallModelParams& mp,
                                            const FallState& s, int next_part,
                                            const FallAction& a) {
  if (next_part < 0 || next_part >= mp.n_parts())
    throw std::invalid_argument("fall: bad part index");
  const BodyPart& part = mp.parts[next_part];
  const double theta2 = clamp(a.theta2, mp.theta2_min, mp.theta2_max);
  const double delta = clamp(a.delta, part.delta_min, part.delta_max);
  const double rdot_d = clamp(a.rdot1_d, mp.rdot_d_min, mp.rdot_d_max);

  ContactResult res;
  res.next = s;

  if (fall_is_halted(s)) {
    res.halted = true;
    return res;
  }

  Phase p{s.r1, s.theta1, s.rdot1, s.thetadot1};
  const int max_steps = static_cast<int>(mp.max_phase_time / mp.dt);
  bool hit = false, slam = false;
  Phase prev = p;
  double t = 0.0;
  for (int step = 0; step < max_steps; ++step) {
    prev = p;
    p = integrate(mp, p, rdot_d, mp.dt);
    t += mp.dt;
    if (std::abs(p.thd) > mp.thetadot_cap || !std::isfinite(p.th))
      throw std::runtime_error("fall: dynamics diverged");
    if (p.thd < 0.0) {  // arrested mid-phase
      res.halted = true;
      res.next = FallState{s.c1, p.r, p.th, p.rd, p.thd};
      res.phase_time = t;
      return res;
    }
    if (p.th >= M_PI / 2.0) { slam = true; break; }
    if (contact_gap(p, theta2, delta) >= 0.0) { hit = true; break; }
  }

  if (!hit && !slam) {  // stalled without arrest or contact: treat as arrested
    res.halted = true;
    res.next = FallState{s.c1, p.r, p.th, p.rd, p.thd};
    res.phase_time = t;
    return res;
  }

  // Bisect the last step for the event time.
  double lo = 0.0, hi = mp.dt;
  Phase at = p;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    at = integrate(mp, prev, rdot_d, mid);
    const double err = slam ? (at.th - M_PI / 2.0) : contact_gap(at, theta2, delta);
    if (std::abs(err) <= 1e-8 && err >= -1e-8) break;
    (err < 0.0 ? lo : hi) = mid;
  }
  res.phase_time = t - mp.dt + 0.5 * (lo + hi);

  const double x1 = at.r * std::sin(at.th);
  const double y1 = at.r * std::cos(at.th);
  const double vx = at.rd * std::sin(at.th) + at.r * at.thd * std::cos(at.th);
  const double vy = at.rd * std::cos(at.th) - at.r * at.thd * std::sin(at.th);

  if (slam) {
    // Unplanned torso impact directly under the COM.
    const double ydot_pre = std::min(0.0, vy);
    res.j = impulse(mp.M, mp.I, x1, y1, x1, 0.0, ydot_pre);
    res.reward = fall_reward(res.j);
    res.contact = true;
    res.ground_slam = true;
    res.halted = true;
    res.next = FallState{s.c1, at.r, M_PI / 2.0, 0.0, 0.0};
    return res;
  }

  // Tip speed under rigid rotation about the pivot plus telescoping:
  // ydot = rdot*cos(theta) - delta*thetadot. A rising tip grazes with j = 0.
  const double ydot_tip = at.rd * std::cos(at.th) - delta * at.thd;
  res.j = ydot_tip <= 0.0 ? impulse(mp.M, mp.I, x1, y1, delta, 0.0, ydot_tip) : 0.0;
  res.reward = fall_reward(res.j);
  res.contact = true;

  // Impulse kicks the COM vertically; re-root the pendulum at the new pivot.
  const double vy_post = vy + res.j / mp.M;
  const double dx = x1 - delta, dy = y1;
  const double r_new = std::hypot(dx, dy);
  const double th_new = std::atan2(dx, dy);
  const double sn = std::sin(th_new), cs = std::cos(th_new);
  const double rdot_new = vx * sn + vy_post * cs;
  const double thdot_new = r_new > 1e-12 ? (vx * cs - vy_post * sn) / r_new : 0.0;

  res.next.c1 = next_part;
  res.next.r1 = clamp(r_new, mp.r_min, mp.r_max);
  res.next.theta1 = th_new;
  res.next.rdot1 = rdot_new;
  res.next.thetadot1 = thdot_new;
  res.halted = thdot_new < 0.0;  // the catch already arrested the fall
  return res;
}

Eigen::Vector3d fall_action_to_normalized(const FallModelParams& mp, int part,
                                          const FallAction& a) {
  if (part < 0 || part >= mp.n_parts())
    throw std::invalid_argument("fall: bad part index");
  const BodyPart& bp = mp.parts[part];
  auto to_unit = [](double v, double lo, double hi) {
    return clamp(2.0 * (v - lo) / (hi - lo) - 1.0, -1.0, 1.0);
  };
  return {to_unit(a.theta2, mp.theta2_min, mp.theta2_max),
          to_unit(a.delta, bp.delta_min, bp.delta_max),
          to_unit(a.rdot1_d, mp.rdot_d_min, mp.rdot_d_max)};
}

FallAction fall_action_from_normalized(const FallModelParams& mp, int part,
                                       const Eigen::Ref<const Eigen::Vector3d>& u) {
  if (part < 0 || part >= mp.n_parts())
    throw std::invalid_argument("fall: bad part index");
  const BodyPart& bp = mp.parts[part];
  auto from_unit = [](double v, double lo, double hi) {
    v = clamp(v, -1.0, 1.0);
    return lo + (v + 1.0) * 0.5 * (hi - lo);
  };
  FallAction a;
  a.theta2 = from_unit(u[0], mp.theta2_min, mp.theta2_max);
  a.delta = from_unit(u[1], bp.delta_min, bp.delta_max);
  a.rdot1_d = from_unit(u[2], mp.rdot_d_min, mp.rdot_d_max);
  return a;
}

}  // namespace recoverkit::envs
