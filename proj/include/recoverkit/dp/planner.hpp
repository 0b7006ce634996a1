#ifndef RECOVERKIT_DP_PLANNER_HPP
#define RECOVERKIT_DP_PLANNER_HPP

#include <functional>
#include <vector>

#include "recoverkit/envs/fall.hpp"
#include "recoverkit/mace/replay.hpp"
#include "recoverkit/rng.hpp"

namespace recoverkit::dp {

// Search resolution. A bin is an interval: a dimension with n bins is probed
// at the n+1 inclusive boundary points, so doubling every bin count yields a
// strict superset of probe points (nested grids).
//
// State bins size the validity box the planner accepts start states from;
// the search itself simulates continuous dynamics, so only the box bounds
// and the action bins shape the result.
struct GridSpec {
  int r1_bins = 4;
  int theta1_bins = 6;
  int rdot1_bins = 3;
  int thetadot1_bins = 6;

  int theta2_bins = 3;
  int delta_bins = 3;
  int rdot_d_bins = 2;

  int depth = 2;  // max contacts searched ahead

  // Validity box. Re-rooting at a caught contact leaves the body tilted
  // backward (theta1 near the commanded stopper angle), so the box extends
  // below zero; r1 bounds come from the model rails.
  double theta1_min = -1.2;
  double theta1_max = 1.2;
  double thetadot1_max = 8.0;
  double rdot1_abs_max = 1.5;

  void validate() const;  // throws invalid_argument on bins < 2 or depth < 1
};

struct PlanStep {
  int part = 0;
  envs::FallAction action;
};

// impulses holds one entry per contacting step; a final step that arrests the
// fall without touching down contributes no impulse. value is the min of
// fall_reward over the impulses, 1.0 when there are none.
struct PlanResult {
  std::vector<PlanStep> steps;
  std::vector<double> impulses;
  double value = 1.0;
  long sims = 0;       // environment phases simulated during the search
  double seconds = 0;  // search wall time
};

// The search is written against callbacks so tests can substitute tabular
// models with hand-computable values.
using ContactModel = std::function<envs::ContactResult(
    const envs::FallState&, int part, const envs::FallAction&)>;
using HaltPredicate = std::function<bool(const envs::FallState&)>;
using ActionMenu = std::function<std::vector<envs::FallAction>(int part)>;

// Exhaustive depth-limited search over (part, action) sequences maximizing
// the min-composed reward. Ties break toward the lexicographically smallest
// (part index, action menu position) sequence. A branch still falling when
// depth runs out scores 0 (treated as unrecovered).
PlanResult plan_search(const ContactModel& model, const HaltPredicate& halted,
                       const ActionMenu& menu, int n_parts, int depth,
                       const envs::FallState& s0);

// n+1 inclusive boundary points of n equal bins on [lo, hi].
std::vector<double> grid_points(double lo, double hi, int bins);

// Action candidates for one part: theta2-major, then delta, then rdot1_d.
std::vector<envs::FallAction> action_menu(const envs::FallModelParams& mp,
                                          const GridSpec& g, int part);

bool state_in_bounds(const envs::FallModelParams& mp, const GridSpec& g,
                     const envs::FallState& s);

// Full planner on the fall model. A start state that is already arrested
// yields the empty plan with value 1.0; an unarrested state outside the
// validity box is rejected.
PlanResult dp_plan(const envs::FallModelParams& mp, const GridSpec& g,
                   const envs::FallState& s0);

// Receding-horizon rollouts from n sampled starts: at every contact the plan
// is recomputed from the measured state and only its first step executed.
// Emits one tuple per phase.
std::vector<mace::ReplayTuple> seed_buffer(const envs::FallModelParams& mp,
                                           const GridSpec& g, int n,
                                           const envs::FallStartDist& init_dist,
                                           RngStream& rng,
                                           int max_contacts_per_rollout = 8);

}  // namespace recoverkit::dp

#endif
