#ifndef RECOVERKIT_RELAY_RELAY_HPP
#define RECOVERKIT_RELAY_RELAY_HPP

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "recoverkit/approx/net.hpp"
#include "recoverkit/envs/tasks.hpp"
#include "recoverkit/rl/ppo.hpp"
#include "recoverkit/rng.hpp"

namespace recoverkit::relay {

// Gaussian initial-state distribution of one graph node.
struct RelayNode {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;  // symmetric PSD
};

// Policy, its value net, and the value threshold above which the node's
// parent takes over.
struct RelayEdge {
  rl::GaussianPolicy pi;
  approx::NetSpec v_spec;
  approx::ParamVector v_params;
  double vbar = 0.0;
};

// Chain of nodes rooted at an implicit dummy node: nodes[0] solves the easy
// distribution and runs to episode end, nodes[k] relays into nodes[k-1].
// edges[k] is the parent edge of nodes[k].
struct RelayGraph {
  std::vector<RelayNode> nodes;
  std::vector<RelayEdge> edges;
  double alpha = 30.0;  // handover bonus weight
  double w = 0.1;       // proposal pull weight

  int size() const { return static_cast<int>(edges.size()); }
};

double edge_value(const RelayEdge& e, const Eigen::Ref<const Eigen::VectorXd>& s);

// J = sum_t gamma^t r_t + alpha gamma^T g with T = rewards.size() and
// g = v_parent_terminal when the episode did not fail and the parent
// certifies the terminal state, else 0.
double relay_return(const std::vector<double>& rewards,
                    double v_parent_terminal, rl::StopCause cause,
                    double vbar_parent, double gamma, double alpha);

// --- value threshold -------------------------------------------------------

struct ThresholdConfig {
  int probes = 40;         // at least 20
  double inflation = 1.5;  // covariance multiplier for probe draws

  void validate() const;
};

struct LabeledValue {
  double value = 0.0;
  bool good = false;
};

// 1-D split minimizing misclassification of the predictor (value > split ->
// good). Candidates are midpoints between consecutive distinct values; among
// equal-error candidates the lowest split wins. Requires both labels.
double threshold_split(std::vector<LabeledValue> data);

struct ProbeOutcome {
  double ret = 0.0;  // the edge objective of the rollout
  bool failed = false;
};

// Draws probe starts from the inflated node distribution, labels each by its
// rollout return against the mean return of the non-failed rollouts, and
// splits the value net's predictions. Throws when the probe set has no
// failed or no successful rollout, or when every label comes out the same;
// the caller inflates further and retries.
double compute_threshold(
    const std::function<ProbeOutcome(const Eigen::VectorXd&)>& rollout,
    const RelayNode& rho, const approx::NetSpec& v_spec,
    const approx::ParamVector& v_params, const ThresholdConfig& cfg,
    RngStream& rng);

// --- next-node proposal ----------------------------------------------------

// Box constraints C(s) >= 0, componentwise; +-inf leaves a dim free.
struct ProposalBox {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

struct ProposalConfig {
  double w = 0.1;
  Eigen::VectorXd scale;  // per-dim standardization of the pull term
  double step = 0.05;
  int max_iters = 500;
  double tol = 1e-7;  // stop when an accepted move is this small
};

// Projected gradient descent on value(s) + w ||(s - mu_orig) / scale||^2
// subject to value(s) >= vbar and the box; starts from `start`. Every
// accepted iterate is feasible, so the result satisfies both constraints.
Eigen::VectorXd propose_next_init(
    const std::function<double(const Eigen::VectorXd&)>& value,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& value_grad,
    double vbar, const Eigen::Ref<const Eigen::VectorXd>& mu_orig,
    const Eigen::Ref<const Eigen::VectorXd>& start, const ProposalBox& box,
    const ProposalConfig& cfg);

// Net-backed overload used by the build loop.
Eigen::VectorXd propose_next_init(const approx::NetSpec& v_spec,
                                  const approx::ParamVector& v_params,
                                  double vbar,
                                  const Eigen::Ref<const Eigen::VectorXd>& mu_orig,
                                  const Eigen::Ref<const Eigen::VectorXd>& start,
                                  const ProposalBox& box,
                                  const ProposalConfig& cfg);

// --- execution -------------------------------------------------------------

struct RelayTrace {
  std::vector<int> node_at_step;               // acting edge per step
  std::vector<std::pair<int, int>> handovers;  // (step, node switched to)
  std::vector<Eigen::Vector4d> states;         // s_0 .. s_T
  std::vector<double> rewards;                 // raw task rewards
  rl::StopCause stop = rl::StopCause::timeout;
  bool success = false;
  double discounted_return = 0.0;
};

// Deterministic graph execution: start at the node whose value net scores
// the state highest, hand control to the parent at the first step whose
// state the parent certifies (checked every step, before acting). The task
// must not have a relay gate; handovers switch policies instead of ending
// the episode. start_node >= 0 overrides the entry choice (validation use);
// the handover rule is unaffected.
RelayTrace execute(const RelayGraph& g, envs::SwingupTask& task,
                   const envs::CartpoleState& start, double gamma,
                   int start_node = -1);

// --- build loop ------------------------------------------------------------

struct RelayBuildConfig {
  rl::PpoConfig ppo;  // per-edge budget; iterations is the per-edge cap
  ThresholdConfig threshold;
  double alpha = 30.0;
  double w = 0.1;
  double proposal_step = 0.05;
  int proposal_iters = 500;
  // Each proposal is boxed to this many start-sigma around the parent mean;
  // value nets extrapolate unreliably far from the data that trained them.
  double proposal_radius = 4.0;
  int max_nodes = 6;
  int min_edge_iters = 10;    // keep training at least this long per edge
  // An edge stops training once the chain, entered at this edge, succeeds at
  // this rate from the node's own cloud. Measured by real executions; the
  // gate's value test alone passes far outside the net's data.
  double edge_stop_rate = 0.9;
  int val_probes = 20;  // executions per validation check
  int val_every = 5;    // training iterations between checks
  // A proposed mean is accepted once the existing chain succeeds from its
  // cloud at this rate; the step toward it is halved until that holds.
  double march_accept = 0.5;
  int march_halvings = 6;
  int success_probes = 50;
  double success_rate = 0.9;  // "solved from rho" bar for the whole chain
  int threshold_retries = 3;
  std::uint64_t seed = 1;
};

struct RelayBuildLog {
  struct EdgeLog {
    int node = 0;
    int iterations = 0;       // optimizer iterations spent on this edge
    long steps = 0;           // env steps spent on this edge
    double edge_rate = 0.0;   // last validated chain rate from the node cloud
    double march_rate = -1.0;  // parent-chain rate when this mean was accepted
    double vbar = 0.0;
    int threshold_attempts = 0;
    double chain_success = 0.0;  // probe rate of the whole chain after adding
    Eigen::VectorXd node_mean;
  };
  std::vector<EdgeLog> edges;
  long total_steps = 0;
};

struct RelayBuildResult {
  RelayGraph graph;
  RelayBuildLog log;
};

// Build failures carry the partial log so callers can see how far the
// chain got and how each edge behaved.
class RelayBuildError : public std::runtime_error {
 public:
  RelayBuildError(const std::string& what, RelayBuildLog log)
      : std::runtime_error(what), log(std::move(log)) {}
  RelayBuildLog log;
};

// Grows the chain on cartpole swing-up: solve the easy distribution, then
// repeatedly propose a harder start distribution on the last value net's
// certified boundary and train a policy that relays into it, until the
// executed chain succeeds from the task's own start distribution. Throws
// with diagnostics when the node cap is hit first.
RelayBuildResult build_relay(const envs::SwingupTaskConfig& task_cfg,
                             const RelayNode& rho0,
                             const RelayBuildConfig& cfg);

// Chain success rate over deterministic executions from the task's start
// distribution.
double probe_graph_success(const RelayGraph& g,
                           const envs::SwingupTaskConfig& task_cfg,
                           int probes, double gamma, RngStream& rng,
                           int start_node = -1);

// --- artifact --------------------------------------------------------------

// Directory layout: manifest.json plus one net file per edge policy/value.
void save_relay_graph(const RelayGraph& g, const std::string& dir,
                      const RelayBuildLog* log = nullptr);
RelayGraph load_relay_graph(const std::string& dir);

}  // namespace recoverkit::relay

#endif
