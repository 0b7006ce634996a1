#ifndef RECOVERKIT_APPROX_OPTIMIZER_HPP
#define RECOVERKIT_APPROX_OPTIMIZER_HPP

#include <Eigen/Core>

#include "recoverkit/approx/net.hpp"

namespace recoverkit::approx {

// SGD carries no state besides the step size; Adam keeps first/second
// moments sized lazily on the first step.
struct OptimizerState {
  enum class Kind { sgd, adam };
  Kind kind = Kind::sgd;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long t = 0;
  Eigen::VectorXd m;
  Eigen::VectorXd v;
};

OptimizerState make_sgd(double lr);
OptimizerState make_adam(double lr, double beta1 = 0.9, double beta2 = 0.999,
                         double eps = 1e-8);

// Applies one update in place. ascend=true flips the sign of the step and
// nothing else. Non-finite gradients are rejected before any state changes.
void optimizer_step(OptimizerState& opt, ParamVector& params,
                    const ParamVector& grad, bool ascend = false);

void target_sync_copy(const ParamVector& live, ParamVector& target);

// target <- tau * live + (1 - tau) * target
void target_sync_polyak(const ParamVector& live, ParamVector& target, double tau);

}  // namespace recoverkit::approx

#endif
