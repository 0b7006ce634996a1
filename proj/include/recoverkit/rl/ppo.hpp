#ifndef RECOVERKIT_RL_PPO_HPP
#define RECOVERKIT_RL_PPO_HPP

#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Core>

#include "recoverkit/approx/net.hpp"
#include "recoverkit/approx/optimizer.hpp"
#include "recoverkit/rl/policy.hpp"
#include "recoverkit/rl/task.hpp"
#include "recoverkit/rng.hpp"

namespace recoverkit::rl {

struct PpoConfig {
  std::vector<int> pi_hidden{64, 64};
  std::vector<int> v_hidden{64, 64};
  double gamma = 0.99;
  double lam = 0.95;       // advantage estimation decay
  double clip = 0.2;       // surrogate ratio clip
  int batch_steps = 2048;  // env steps collected per iteration, at least
  int epochs = 10;
  int minibatch = 64;
  double pi_lr = 3e-4;
  double v_lr = 1e-3;
  double ent_coef = 0.0;
  double init_log_std = -0.693147180559945;  // sigma 0.5
  int iterations = 50;
  // Value regression after training: fresh rollouts with the final policy,
  // fit to their observed discounted returns.
  int refit_epochs = 40;
  bool normalize_adv = true;
  // Stop once an iteration's mean return exceeds this (NaN disables).
  double stop_return = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t seed = 1;

  void validate() const;
};

struct PpoIterRow {
  int iter = 0;
  long steps = 0;  // cumulative env steps after this iteration
  double mean_return = 0.0;
  double mean_len = 0.0;
  double pi_loss = 0.0;
  double v_loss = 0.0;
  double entropy = 0.0;
};

struct PpoResult {
  GaussianPolicy pi;
  approx::NetSpec v_spec;
  approx::ParamVector v_params;
  std::vector<PpoIterRow> history;
  long total_steps = 0;
};

double ppo_value(const PpoResult& r,
                 const Eigen::Ref<const Eigen::VectorXd>& obs);

// One policy-optimization loop held open so callers can interleave their
// own bookkeeping (curricula, error-model refreshes) between iterations.
class PpoTrainer {
 public:
  PpoTrainer(ControlTask& task, const PpoConfig& cfg);
  // Warm start from existing nets; the config's init fields are ignored.
  PpoTrainer(ControlTask& task, const PpoConfig& cfg, GaussianPolicy pi,
             approx::NetSpec v_spec, approx::ParamVector v_params);

  // One batch collection plus clipped-surrogate update pass.
  PpoIterRow iterate();

  // Fresh rollouts with the current policy, value net regressed onto
  // their observed discounted returns.
  void refit_value();

  const GaussianPolicy& policy() const { return pi_; }
  const approx::NetSpec& value_spec() const { return v_spec_; }
  const approx::ParamVector& value_params() const { return v_params_; }
  const std::vector<PpoIterRow>& history() const { return history_; }
  long total_steps() const { return total_steps_; }
  PpoResult result() const;

 private:
  ControlTask& task_;
  PpoConfig cfg_;
  GaussianPolicy pi_;
  approx::NetSpec v_spec_;
  approx::ParamVector v_params_;
  approx::OptimizerState opt_mean_, opt_logstd_, opt_v_;
  std::vector<PpoIterRow> history_;
  long total_steps_ = 0;
  int iter_ = 0;
};

// Rolls whole mean-policy episodes (no exploration noise, no learning)
// until at least `steps` env steps have run; returns the step count.
long run_policy_episodes(ControlTask& task, const GaussianPolicy& pi,
                         int steps, RngStream& rng);

// In-place batch standardization to zero mean, unit scale. A positive
// affine map, so greedy argmax rankings survive it.
void normalize_advantages(Eigen::VectorXd& adv);

// adv[t] = sum_k (gamma*lam)^k delta[t+k] with delta[t] = r[t] +
// gamma*V[t+1] - V[t]; V[T] is `bootstrap` (0 for true terminations).
// Also returns the value regression targets adv + values.
std::pair<Eigen::VectorXd, Eigen::VectorXd> gae_advantages(
    const Eigen::Ref<const Eigen::VectorXd>& rewards,
    const Eigen::Ref<const Eigen::VectorXd>& values, double bootstrap,
    double gamma, double lam);

PpoResult ppo_train(ControlTask& task, const PpoConfig& cfg);

}  // namespace recoverkit::rl

#endif
