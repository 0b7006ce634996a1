#include "recoverkit/approx/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace recoverkit::approx {

OptimizerState make_sgd(double lr) {
  OptimizerState s;
  s.kind = OptimizerState::Kind::sgd;
  s.lr = lr;
  return s;
}

OptimizerState make_adam(double lr, double beta1, double beta2, double eps) {
  OptimizerState s;
  s.kind = OptimizerState::Kind::adam;
  s.lr = lr;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.eps = eps;
  return s;
}

void optimizer_step(OptimizerState& opt, ParamVector& params,
                    const ParamVector& grad, bool ascend) {
  if (grad.size() != params.size())
    throw std::invalid_argument("optimizer_step: grad/param size mismatch");
  if (!grad.allFinite())
    throw std::runtime_error("optimizer_step: non-finite gradient rejected");
  const double sign = ascend ? 1.0 : -1.0;
  switch (opt.kind) {
    case OptimizerState::Kind::sgd:
      params += sign * opt.lr * grad;
      return;
    case OptimizerState::Kind::adam: {
      if (opt.m.size() != params.size()) {
        opt.m = Eigen::VectorXd::Zero(params.size());
        opt.v = Eigen::VectorXd::Zero(params.size());
        opt.t = 0;
      }
      opt.t += 1;
      opt.m = opt.beta1 * opt.m + (1.0 - opt.beta1) * grad;
      opt.v = opt.beta2 * opt.v + (1.0 - opt.beta2) * grad.array().square().matrix();
      const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.t));
      const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.t));
      params.array() += sign * opt.lr * (opt.m.array() / c1) /
                        ((opt.v.array() / c2).sqrt() + opt.eps);
      return;
    }
  }
}

void target_sync_copy(const ParamVector& live, ParamVector& target) {
  target = live;
}

void target_sync_polyak(const ParamVector& live, ParamVector& target, double tau) {
  if (live.size() != target.size())
    throw std::invalid_argument("target_sync: size mismatch");
  target = tau * live + (1.0 - tau) * target;
}

}  // namespace recoverkit::approx
