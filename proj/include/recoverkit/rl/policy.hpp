#ifndef RECOVERKIT_RL_POLICY_HPP
#define RECOVERKIT_RL_POLICY_HPP

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "recoverkit/approx/net.hpp"
#include "recoverkit/rng.hpp"

namespace recoverkit::rl {

// Diagonal Gaussian policy: an MLP mean with tanh output (so the mean stays
// inside the normalized action box) plus a state-independent learned
// log-std vector. Samples are not clamped here; tasks clamp.
struct GaussianPolicy {
  approx::NetSpec mean_spec;
  approx::ParamVector mean_params;
  Eigen::VectorXd log_std;

  int obs_dim() const { return mean_spec.input_dim; }
  int act_dim() const { return mean_spec.output_dim; }
};

GaussianPolicy make_policy(int obs_dim, int act_dim,
                           const std::vector<int>& hidden,
                           double init_log_std, std::uint64_t seed);

// The deterministic-greedy readout of the policy.
Eigen::VectorXd policy_mean(const GaussianPolicy& p,
                            const Eigen::Ref<const Eigen::VectorXd>& obs);

// a = mean + exp(log_std) .* z with z ~ N(0, I); consumes exactly
// 2*act_dim u64 draws.
Eigen::VectorXd policy_sample(const GaussianPolicy& p,
                              const Eigen::Ref<const Eigen::VectorXd>& obs,
                              RngStream& rng);

// log N(a; mean, diag(exp(2*log_std)))
double gaussian_log_prob(const Eigen::Ref<const Eigen::VectorXd>& mean,
                         const Eigen::Ref<const Eigen::VectorXd>& log_std,
                         const Eigen::Ref<const Eigen::VectorXd>& a);

double policy_log_prob(const GaussianPolicy& p,
                       const Eigen::Ref<const Eigen::VectorXd>& obs,
                       const Eigen::Ref<const Eigen::VectorXd>& a);

// Differential entropy; depends on log_std only.
double policy_entropy(const GaussianPolicy& p);

}  // namespace recoverkit::rl

#endif
