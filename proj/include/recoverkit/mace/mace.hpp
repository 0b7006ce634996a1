#ifndef RECOVERKIT_MACE_MACE_HPP
#define RECOVERKIT_MACE_MACE_HPP

#include <cstdint>
#include <utility>
#include <vector>

#include "recoverkit/approx/net.hpp"
#include "recoverkit/envs/fall.hpp"
#include "recoverkit/mace/replay.hpp"
#include "recoverkit/rng.hpp"

namespace recoverkit::mace {

// Mixture of actor-critic experts, one pair per contactable body part.
// A shared input layer feeds n critic heads (which value the choice of the
// part as the next contact) and n actor heads (which emit the contact
// placement for that part, in normalized [-1,1]^3 coordinates). Critics keep
// a frozen target copy (shared layer included) for bootstrap targets.
struct MaceNet {
  approx::NetSpec shared_spec;
  std::vector<approx::NetSpec> critic_spec;
  std::vector<approx::NetSpec> actor_spec;

  approx::ParamVector shared;
  std::vector<approx::ParamVector> critics;
  std::vector<approx::ParamVector> actors;

  approx::ParamVector target_shared;
  std::vector<approx::ParamVector> target_critics;

  int n() const { return static_cast<int>(critics.size()); }
};

MaceNet make_mace_net(int n_parts, int shared_width, std::uint64_t seed);

// Fixed affine scaling of the raw 5-dim state to roughly [-1, 1] inputs.
Eigen::VectorXd fall_observation(const envs::FallModelParams& mp,
                                 const envs::FallState& s);

Eigen::VectorXd mace_values(const MaceNet& net, const Eigen::VectorXd& obs);
Eigen::VectorXd mace_target_values(const MaceNet& net,
                                   const Eigen::VectorXd& obs);
Eigen::Vector3d mace_actor(const MaceNet& net, int c,
                           const Eigen::VectorXd& obs);

void sync_targets(MaceNet& net);

// Boltzmann selection over critic values. T = 0 is the greedy limit with a
// lowest-index tie-break; T > 0 samples the softmax (overflow guarded by
// max subtraction).
std::vector<double> boltzmann_probs(const std::vector<double>& values,
                                    double temperature);
int select_actor(const std::vector<double>& values, double temperature,
                 RngStream& rng);

// y = r at the end of the fall, else min(r, gamma * max_j target_j(s')):
// the value of a state can never exceed the worst impact already suffered.
double min_composed_target(double r, double vhat_max, bool terminal,
                           double gamma);
double critic_target(const MaceNet& net, const envs::FallModelParams& mp,
                     double r, const envs::FallState& s_next, bool terminal,
                     double gamma);

struct MaceConfig {
  int shared_width = 64;
  double gamma = 0.9;
  double lr = 1e-4;
  int minibatch = 32;
  int rollouts_per_iter = 10;
  int iterations = 1000;
  double T0 = 5.0;         // Boltzmann temperature, annealed linearly to 0
  int anneal_iters = 250;  // iterations until the temperature reaches 0
  double sigma = 0.1;      // exploration noise per normalized action dim
  std::size_t buffer_capacity = 100000;
  int target_sync_period = 20;  // iterations between target copies
  int updates_per_iter = 320;
  int max_contacts = 8;  // per episode
  std::uint64_t seed = 1;
  envs::FallStartDist init_dist;

  void validate() const;
};

// Per-tuple TD update of the selected critic head and the shared layer;
// unselected heads keep their head-local parameters. Returns the batch mean
// squared TD error.
double update_critic(MaceNet& net, const MaceConfig& cfg,
                     const envs::FallModelParams& mp,
                     const std::vector<ReplayTuple>& batch);

// CACLA-gated actor step: tuples whose target beats the current state value
// pull the selected actor toward the executed action. Returns the number of
// tuples that passed the gate.
int update_actor(MaceNet& net, const MaceConfig& cfg,
                 const envs::FallModelParams& mp,
                 const std::vector<ReplayTuple>& batch);

// Greedy execution: the actor of the highest-valued critic, mapped and
// clamped to the physical action bounds.
std::pair<int, envs::FallAction> act(const MaceNet& net,
                                     const envs::FallModelParams& mp,
                                     const envs::FallState& s);

// Min-composed reward of one greedy episode from s (1.0 if nothing touches
// down before arrest).
double greedy_episode_value(const MaceNet& net,
                            const envs::FallModelParams& mp,
                            const envs::FallState& s, int max_contacts);

struct MaceIterRow {
  int iter = 0;
  double temperature = 0.0;
  std::size_t buffer_size = 0;
  double probe_reward = 0.0;  // mean greedy episode value over the probe set
  double critic_loss = 0.0;   // mean squared TD over the iteration's updates
  int actor_updates = 0;      // tuples that passed the CACLA gate
};

struct MaceTrainResult {
  MaceNet net;
  std::vector<MaceIterRow> history;
  ReplayBuffer buffer{1};
  std::vector<envs::FallState> probe_states;
};

MaceTrainResult train_mace(const envs::FallModelParams& mp,
                           const MaceConfig& cfg,
                           const std::vector<ReplayTuple>& seed_tuples);

}  // namespace recoverkit::mace

#endif
