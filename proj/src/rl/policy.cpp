#include "recoverkit/rl/policy.hpp"

#include <cmath>
#include <stdexcept>

namespace recoverkit::rl {

GaussianPolicy make_policy(int obs_dim, int act_dim,
                           const std::vector<int>& hidden,
                           double init_log_std, std::uint64_t seed) {
  if (obs_dim < 1 || act_dim < 1)
    throw std::invalid_argument("policy: dimensions must be positive");
  GaussianPolicy p;
  p.mean_spec.input_dim = obs_dim;
  p.mean_spec.hidden = hidden;
  p.mean_spec.output_dim = act_dim;
  p.mean_spec.output = approx::OutputActivation::tanh_out;
  p.mean_spec.seed = seed;
  p.mean_params = approx::init_params(p.mean_spec);
  p.log_std = Eigen::VectorXd::Constant(act_dim, init_log_std);
  return p;
}

Eigen::VectorXd policy_mean(const GaussianPolicy& p,
                            const Eigen::Ref<const Eigen::VectorXd>& obs) {
  return approx::forward(p.mean_spec, p.mean_params, obs);
}

Eigen::VectorXd policy_sample(const GaussianPolicy& p,
                              const Eigen::Ref<const Eigen::VectorXd>& obs,
                              RngStream& rng) {
  const Eigen::VectorXd m = policy_mean(p, obs);
  return m + p.log_std.array().exp().matrix().cwiseProduct(
                 rng.normal_vec(p.act_dim()));
}

double gaussian_log_prob(const Eigen::Ref<const Eigen::VectorXd>& mean,
                         const Eigen::Ref<const Eigen::VectorXd>& log_std,
                         const Eigen::Ref<const Eigen::VectorXd>& a) {
  constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log sqrt(2 pi)
  double lp = 0.0;
  for (int i = 0; i < mean.size(); ++i) {
    const double z = (a[i] - mean[i]) * std::exp(-log_std[i]);
    lp += -0.5 * z * z - log_std[i] - kLogSqrt2Pi;
  }
  return lp;
}

double policy_log_prob(const GaussianPolicy& p,
                       const Eigen::Ref<const Eigen::VectorXd>& obs,
                       const Eigen::Ref<const Eigen::VectorXd>& a) {
  return gaussian_log_prob(policy_mean(p, obs), p.log_std, a);
}

double policy_entropy(const GaussianPolicy& p) {
  constexpr double kHalfLog2PiE = 1.4189385332046727418;  // 0.5 log(2 pi e)
  return p.log_std.sum() + kHalfLog2PiE * p.act_dim();
}

}  // namespace recoverkit::rl
