#ifndef RECOVERKIT_RL_TASK_HPP
#define RECOVERKIT_RL_TASK_HPP

#include <Eigen/Core>

#include "recoverkit/rng.hpp"

namespace recoverkit::rl {

// Why an episode ended. `running` means it has not.
//
// timeout episodes bootstrap the value of the reached state; failure and
// relay stops are genuine terminations and bootstrap nothing. A relay stop
// marks a handover into the region a parent value function certifies; any
// handover bonus is already folded into the final reward by the task.
enum class StopCause { running, timeout, failure, relay };

struct StepResult {
  Eigen::VectorXd obs;
  double reward = 0.0;
  StopCause stop = StopCause::running;
};

// Episodic control problem. Actions are normalized to [-1,1] per dimension;
// the task owns the mapping to physical units and clamps out-of-box inputs.
// Implementations keep their physical state between reset and step calls.
class ControlTask {
 public:
  virtual ~ControlTask() = default;

  virtual int obs_dim() const = 0;
  virtual int act_dim() const = 0;

  // Step cap per episode; the trainer treats reaching it as a timeout even
  // when the task never signals one itself.
  virtual int horizon() const = 0;

  // Starts a fresh episode and returns its first observation.
  virtual Eigen::VectorXd reset(RngStream& rng) = 0;

  virtual StepResult step(const Eigen::Ref<const Eigen::VectorXd>& u) = 0;
};

}  // namespace recoverkit::rl

#endif
