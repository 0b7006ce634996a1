#include "recoverkit/relay/relay.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "recoverkit/approx/serialize.hpp"

namespace recoverkit::relay {

double edge_value(const RelayEdge& e,
                  const Eigen::Ref<const Eigen::VectorXd>& s) {
  return approx::forward(e.v_spec, e.v_params, s)[0];
}

double relay_return(const std::vector<double>& rewards,
                    double v_parent_terminal, rl::StopCause cause,
                    double vbar_parent, double gamma, double alpha) {
  double j = 0.0;
  double disc = 1.0;
  for (double r : rewards) {
    j += disc * r;
    disc *= gamma;
  }
  // disc is now gamma^T
  if (cause != rl::StopCause::failure && v_parent_terminal > vbar_parent)
    j += alpha * disc * v_parent_terminal;
  return j;
}

void ThresholdConfig::validate() const {
  if (probes < 20)
    throw std::invalid_argument("threshold: needs at least 20 probes");
  if (!(inflation > 0.0))
    throw std::invalid_argument("threshold: inflation must be positive");
}

double threshold_split(std::vector<LabeledValue> data) {
  if (data.size() < 2)
    throw std::invalid_argument("threshold split: needs at least 2 points");
  long total_good = 0;
  for (const LabeledValue& d : data) total_good += d.good ? 1 : 0;
  const long total_bad = static_cast<long>(data.size()) - total_good;
  if (total_good == 0 || total_bad == 0)
    throw std::runtime_error("threshold split: single-label probe set");
  std::sort(data.begin(), data.end(),
            [](const LabeledValue& a, const LabeledValue& b) {
              return a.value < b.value;
            });
  // Walk candidate splits between consecutive distinct values. With the
  // predictor (value > split -> good), errors = good values at or below
  // the split plus bad values above it.
  double best_split = 0.0;
  long best_errors = -1;
  long good_below = 0, bad_below = 0;
  std::size_t i = 0;
  while (i < data.size()) {
    const double v = data[i].value;
    while (i < data.size() && data[i].value == v) {
      good_below += data[i].good ? 1 : 0;
      bad_below += data[i].good ? 0 : 1;
      ++i;
    }
    if (i == data.size()) break;  // no split above the largest value
    const long errors = good_below + (total_bad - bad_below);
    if (best_errors < 0 || errors < best_errors) {
      best_errors = errors;
      best_split = 0.5 * (v + data[i].value);
    }
  }
  if (best_errors < 0)
    throw std::runtime_error("threshold split: all values identical");
  return best_split;
}

namespace {

// Symmetric PSD square root, tolerant of semidefinite inputs.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& cov) {
  const Eigen::MatrixXd sym = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  if (eig.eigenvalues().minCoeff() < -1e-10)
    throw std::invalid_argument("relay: covariance not PSD");
  return eig.eigenvectors() *
         eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
         eig.eigenvectors().transpose();
}

}  // namespace

double compute_threshold(
    const std::function<ProbeOutcome(const Eigen::VectorXd&)>& rollout,
    const RelayNode& rho, const approx::NetSpec& v_spec,
    const approx::ParamVector& v_params, const ThresholdConfig& cfg,
    RngStream& rng) {
  cfg.validate();
  if (rho.mean.size() != rho.cov.rows() || rho.cov.rows() != rho.cov.cols())
    throw std::invalid_argument("threshold: node shape mismatch");
  const Eigen::MatrixXd chol = psd_sqrt(cfg.inflation * rho.cov);
  std::vector<Eigen::VectorXd> starts;
  std::vector<ProbeOutcome> outcomes;
  starts.reserve(cfg.probes);
  long failed = 0;
  for (int i = 0; i < cfg.probes; ++i) {
    Eigen::VectorXd s =
        rho.mean + chol * rng.normal_vec(static_cast<int>(rho.mean.size()));
    outcomes.push_back(rollout(s));
    failed += outcomes.back().failed ? 1 : 0;
    starts.push_back(std::move(s));
  }
  // Early-terminated probes are excluded from the reference return but still
  // labeled against it; their returns are naturally low.
  double rbar = 0.0;
  if (failed < cfg.probes) {
    for (const ProbeOutcome& o : outcomes)
      if (!o.failed) rbar += o.ret;
    rbar /= static_cast<double>(cfg.probes - failed);
  }
  long good = 0;
  std::vector<LabeledValue> data;
  data.reserve(starts.size());
  for (std::size_t i = 0; i < starts.size(); ++i) {
    const bool g = !outcomes[i].failed && outcomes[i].ret > rbar;
    good += g ? 1 : 0;
    data.push_back({approx::forward(v_spec, v_params, starts[i])[0], g});
  }
  if (good == 0)
    throw std::runtime_error("threshold: all probe rollouts labeled failed");
  if (good == cfg.probes)
    throw std::runtime_error("threshold: all probe rollouts labeled successful");
  return threshold_split(std::move(data));
}

namespace {

Eigen::VectorXd clamp_box(const Eigen::VectorXd& s, const ProposalBox& box) {
  return s.cwiseMax(box.lower).cwiseMin(box.upper);
}

}  // namespace

Eigen::VectorXd propose_next_init(
    const std::function<double(const Eigen::VectorXd&)>& value,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& value_grad,
    double vbar, const Eigen::Ref<const Eigen::VectorXd>& mu_orig,
    const Eigen::Ref<const Eigen::VectorXd>& start, const ProposalBox& box,
    const ProposalConfig& cfg) {
  const Eigen::Index n = start.size();
  if (box.lower.size() != n || box.upper.size() != n ||
      mu_orig.size() != n)
    throw std::invalid_argument("proposal: dimension mismatch");
  Eigen::VectorXd scale =
      cfg.scale.size() ? cfg.scale : Eigen::VectorXd::Ones(n);
  if (scale.size() != n || scale.minCoeff() <= 0.0)
    throw std::invalid_argument("proposal: bad scale vector");

  Eigen::VectorXd s = clamp_box(start, box);
  if (value(s) < vbar) {
    // Infeasible start: climb the value surface into the certified set.
    for (int it = 0; it < cfg.max_iters && value(s) < vbar; ++it) {
      const Eigen::VectorXd g = value_grad(s);
      const double gn = g.norm();
      if (gn < 1e-12) break;
      s = clamp_box(s + cfg.step * g / gn, box);
    }
    if (value(s) < vbar)
      throw std::runtime_error("proposal: no feasible start found");
  }

  const Eigen::VectorXd inv_sq = scale.cwiseProduct(scale).cwiseInverse();
  const auto objective_grad = [&](const Eigen::VectorXd& x) {
    return (value_grad(x) +
            2.0 * cfg.w * (x - mu_orig).cwiseProduct(inv_sq))
        .eval();
  };
  // Largest feasible backtracked move from s along d, if any.
  const auto try_step = [&](const Eigen::VectorXd& from,
                            const Eigen::VectorXd& d)
      -> std::optional<Eigen::VectorXd> {
    double eta = cfg.step;
    for (int h = 0; h < 50; ++h, eta *= 0.5) {
      const Eigen::VectorXd cand = clamp_box(from + eta * d, box);
      if ((cand - from).norm() == 0.0) continue;
      if (value(cand) >= vbar) return cand;
    }
    return std::nullopt;
  };

  for (int it = 0; it < cfg.max_iters; ++it) {
    const Eigen::VectorXd g = objective_grad(s);
    if (g.norm() < 1e-12) break;
    std::optional<Eigen::VectorXd> next = try_step(s, -g);
    if (!next) {
      // Blocked by the value constraint: slide along its level set.
      const Eigen::VectorXd nvec = value_grad(s);
      const double nn = nvec.norm();
      if (nn < 1e-12) break;
      const Eigen::VectorXd nh = nvec / nn;
      const Eigen::VectorXd dt = -g + g.dot(nh) * nh;
      if (dt.norm() < 1e-10) break;
      next = try_step(s, dt);
      if (!next) break;
    }
    const double moved = (*next - s).norm();
    s = *next;
    if (moved < cfg.tol) break;
  }
  if (value(s) < vbar - 1e-6)
    throw std::runtime_error("proposal: result drifted infeasible");
  return s;
}

Eigen::VectorXd propose_next_init(
    const approx::NetSpec& v_spec, const approx::ParamVector& v_params,
    double vbar, const Eigen::Ref<const Eigen::VectorXd>& mu_orig,
    const Eigen::Ref<const Eigen::VectorXd>& start, const ProposalBox& box,
    const ProposalConfig& cfg) {
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(1);
  return propose_next_init(
      [&](const Eigen::VectorXd& s) {
        return approx::forward(v_spec, v_params, s)[0];
      },
      [&](const Eigen::VectorXd& s) {
        return approx::grad_input(v_spec, v_params, s, one);
      },
      vbar, mu_orig, start, box, cfg);
}

RelayTrace execute(const RelayGraph& g, envs::SwingupTask& task,
                   const envs::CartpoleState& start, double gamma,
                   int start_node) {
  if (g.size() == 0) throw std::invalid_argument("execute: empty graph");
  if (start_node >= g.size())
    throw std::invalid_argument("execute: start node out of range");
  if (task.has_relay_gate())
    throw std::invalid_argument("execute: task must not carry a relay gate");
  RelayTrace tr;
  Eigen::VectorXd obs = task.reset_to(start);
  tr.states.push_back(task.state());

  int c = start_node >= 0 ? start_node : 0;
  if (start_node < 0) {
    double best = edge_value(g.edges[0], obs);
    for (int i = 1; i < g.size(); ++i) {
      const double v = edge_value(g.edges[i], obs);
      if (v > best) {
        best = v;
        c = i;
      }
    }
  }

  double disc = 1.0;
  for (int t = 0; t < task.horizon(); ++t) {
    // Handover check before acting, cascading toward the root.
    while (c > 0 &&
           edge_value(g.edges[c - 1], task.state()) > g.edges[c - 1].vbar) {
      --c;
      tr.handovers.push_back({t, c});
    }
    tr.node_at_step.push_back(c);
    const rl::StepResult sr = task.step(rl::policy_mean(g.edges[c].pi, obs));
    obs = sr.obs;
    tr.states.push_back(task.state());
    tr.rewards.push_back(sr.reward);
    tr.discounted_return += disc * sr.reward;
    disc *= gamma;
    if (sr.stop != rl::StopCause::running) {
      tr.stop = sr.stop;
      break;
    }
  }
  tr.success = tr.stop != rl::StopCause::failure &&
               envs::swingup_success(task.state());
  return tr;
}

double probe_graph_success(const RelayGraph& g,
                           const envs::SwingupTaskConfig& task_cfg,
                           int probes, double gamma, RngStream& rng,
                           int start_node) {
  if (probes < 1) throw std::invalid_argument("probe: count must be positive");
  envs::SwingupTask task(task_cfg);
  int ok = 0;
  for (int i = 0; i < probes; ++i) {
    task.reset(rng);
    const envs::CartpoleState s0 = task.state();
    ok += execute(g, task, s0, gamma, start_node).success ? 1 : 0;
  }
  return static_cast<double>(ok) / static_cast<double>(probes);
}

namespace {

// Regress the stored value net onto plain task returns of whole-chain
// executions entered at this edge. The training-time critic carries the
// relay-amplified scale, which compounds with chain depth until the
// certification test and the execution entry rule are extrapolation noise.
void refit_chain_value(const RelayGraph& g, const RelayNode& node,
                       RelayEdge& edge, const envs::SwingupTaskConfig& tc,
                       const RelayBuildConfig& cfg, double gamma, int K) {
  RelayGraph pg = g;
  pg.nodes.push_back(node);
  pg.edges.push_back(edge);

  // Evaluation points: states the stochastic policy visits from the node's
  // inflated cloud, the region where certificates will actually be queried.
  envs::SwingupTaskConfig rc = tc;
  rc.start_cov = (cfg.threshold.inflation * node.cov).eval();
  envs::SwingupTask roam(rc);
  RngStream rng = substream(cfg.seed, "relay-refit", K);
  constexpr int kTargets = 512;
  std::vector<Eigen::Vector4d> pool;
  while (static_cast<int>(pool.size()) < 8 * kTargets) {
    Eigen::VectorXd obs = roam.reset(rng);
    pool.push_back(roam.state());
    for (int t = 0; t < roam.horizon(); ++t) {
      const rl::StepResult sr =
          roam.step(rl::policy_sample(edge.pi, obs, rng));
      pool.push_back(roam.state());
      obs = sr.obs;
      if (sr.stop != rl::StopCause::running) break;
    }
  }
  roam.drain_episodes();

  const std::size_t stride = pool.size() / kTargets;
  envs::SwingupTask plain(tc);
  Eigen::MatrixXd xs(4, kTargets);
  Eigen::VectorXd ys(kTargets);
  for (int i = 0; i < kTargets; ++i) {
    const Eigen::Vector4d& s = pool[i * stride];
    xs.col(i) = s;
    ys[i] = execute(pg, plain, s, gamma, K).discounted_return;
  }
  plain.drain_episodes();

  approx::NetSpec vs = edge.v_spec;
  vs.seed = substream(cfg.seed, "relay-refit-init", K).next_u64();
  approx::ParamVector p = approx::init_params(vs);
  approx::OptimizerState opt = approx::make_adam(cfg.ppo.v_lr);
  std::vector<int> idx(kTargets);
  std::iota(idx.begin(), idx.end(), 0);
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(1);
  for (int e = 0; e < cfg.ppo.refit_epochs; ++e) {
    for (int i = kTargets - 1; i > 0; --i)
      std::swap(idx[i], idx[rng.next_u64() % (i + 1)]);
    for (int mb = 0; mb < kTargets; mb += cfg.ppo.minibatch) {
      const int me = std::min(kTargets, mb + cfg.ppo.minibatch);
      approx::ParamVector grad = approx::ParamVector::Zero(p.size());
      for (int j = mb; j < me; ++j) {
        const int i = idx[j];
        const double pred = approx::forward(vs, p, xs.col(i))[0];
        grad += (2.0 * (pred - ys[i]) / (me - mb)) *
                approx::grad_params(vs, p, xs.col(i), one);
      }
      approx::optimizer_step(opt, p, grad);
    }
  }
  edge.v_spec = vs;
  edge.v_params = std::move(p);
}

}  // namespace

RelayBuildResult build_relay(const envs::SwingupTaskConfig& task_cfg,
                             const RelayNode& rho0,
                             const RelayBuildConfig& cfg) {
  cfg.threshold.validate();
  if (rho0.mean.size() != 4 || rho0.cov.rows() != 4 || rho0.cov.cols() != 4)
    throw std::invalid_argument("relay build: rho0 must be 4-dimensional");
  if (cfg.max_nodes < 1 || cfg.success_probes < 1)
    throw std::invalid_argument("relay build: bad caps");

  RelayBuildResult out;
  RelayGraph& g = out.graph;
  g.alpha = cfg.alpha;
  g.w = cfg.w;
  const double gamma = cfg.ppo.gamma;

  // Pull-term standardization from the original distribution's spread,
  // floored so deterministic dims cannot blow the metric up.
  Eigen::VectorXd scale =
      task_cfg.start_cov.diagonal().cwiseMax(0.0).cwiseSqrt().cwiseMax(0.05);
  // The proposal box keeps new start means inside the failure bounds with
  // room to act.
  const double inf = std::numeric_limits<double>::infinity();
  ProposalBox box;
  box.lower = Eigen::Vector4d(-0.9 * task_cfg.x_limit, -inf, -inf,
                              -0.75 * task_cfg.rate_limit);
  box.upper = -box.lower;

  RelayNode node = rho0;
  double march_rate = -1.0;  // rate behind the current node's acceptance
  for (int K = 0;; ++K) {
    envs::SwingupTaskConfig tc = task_cfg;
    tc.start_mean = node.mean;
    tc.start_cov = node.cov;
    envs::SwingupTask task(tc);
    if (K > 0)
      task.set_relay_gate({g.edges[K - 1].v_spec, g.edges[K - 1].v_params,
                           g.edges[K - 1].vbar, cfg.alpha, gamma});
    rl::PpoConfig pc = cfg.ppo;
    pc.seed = substream(cfg.seed, "relay-edge", K).next_u64();
    rl::PpoTrainer trainer(task, pc);
    task.drain_episodes();

    // An edge stops training when real executions entered at it succeed
    // from its own cloud; batch relay rates can be inflated by the gate
    // firing where the parent's value net has no data.
    double edge_rate = 0.0;
    int iters = 0;
    for (; iters < pc.iterations; ++iters) {
      trainer.iterate();
      task.drain_episodes();
      if (iters + 1 < cfg.min_edge_iters || (iters + 1) % cfg.val_every != 0)
        continue;
      RelayGraph probe_g = g;
      probe_g.nodes.push_back(node);
      probe_g.edges.push_back(RelayEdge{trainer.policy(), trainer.value_spec(),
                                        trainer.value_params(), 0.0});
      RngStream vrng = substream(cfg.seed, "relay-val", K * 1024 + iters);
      edge_rate =
          probe_graph_success(probe_g, tc, cfg.val_probes, gamma, vrng, K);
      if (edge_rate >= cfg.edge_stop_rate) {
        ++iters;
        break;
      }
    }
    trainer.refit_value();
    task.drain_episodes();

    RelayEdge edge{trainer.policy(), trainer.value_spec(),
                   trainer.value_params(), 0.0};
    const auto rollout = [&task, &edge, gamma](const Eigen::VectorXd& s0) {
      ProbeOutcome o;
      Eigen::VectorXd obs = task.reset_to(s0);
      double disc = 1.0;
      for (int t = 0; t < task.horizon(); ++t) {
        const rl::StepResult sr = task.step(rl::policy_mean(edge.pi, obs));
        o.ret += disc * sr.reward;
        disc *= gamma;
        obs = sr.obs;
        if (sr.stop != rl::StopCause::running) {
          o.failed = sr.stop == rl::StopCause::failure;
          break;
        }
      }
      return o;
    };
    bool got = false;
    int attempts = 0;
    std::string last_err;
    for (int a = 0; a < cfg.threshold_retries && !got; ++a) {
      ThresholdConfig thc = cfg.threshold;
      thc.inflation = cfg.threshold.inflation * std::pow(1.5, a);
      RngStream trng = substream(cfg.seed, "relay-thresh", K * 8 + a);
      attempts = a + 1;
      try {
        edge.vbar = compute_threshold(rollout, node, edge.v_spec,
                                      edge.v_params, thc, trng);
        got = true;
      } catch (const std::runtime_error& e) {
        last_err = e.what();
      }
    }
    task.drain_episodes();
    if (!got) {
      RelayBuildLog::EdgeLog el;
      el.node = K;
      el.iterations = iters;
      el.steps = trainer.total_steps();
      el.edge_rate = edge_rate;
      el.march_rate = march_rate;
      el.threshold_attempts = attempts;
      el.node_mean = node.mean;
      out.log.edges.push_back(el);
      out.log.total_steps += trainer.total_steps();
      throw RelayBuildError("relay build: threshold undefined at node " +
                                std::to_string(K) + " after " +
                                std::to_string(attempts) +
                                " inflations: " + last_err,
                            out.log);
    }

    g.nodes.push_back(node);
    g.edges.push_back(edge);

    RngStream prng = substream(cfg.seed, "relay-probe", K);
    const double chain_rate =
        probe_graph_success(g, task_cfg, cfg.success_probes, gamma, prng);

    RelayBuildLog::EdgeLog el;
    el.node = K;
    el.iterations = iters;
    el.steps = trainer.total_steps();
    el.edge_rate = edge_rate;
    el.march_rate = march_rate;
    el.vbar = edge.vbar;
    el.threshold_attempts = attempts;
    el.chain_success = chain_rate;
    el.node_mean = node.mean;
    out.log.edges.push_back(el);
    out.log.total_steps += trainer.total_steps();

    if (chain_rate >= cfg.success_rate) return out;
    if (g.size() >= cfg.max_nodes) {
      std::ostringstream msg;
      msg << "relay build: chain capped at " << g.size()
          << " nodes without solving the task; per-node chain success:";
      std::string sep = " ";
      for (const RelayBuildLog::EdgeLog& e : out.log.edges) {
        msg << sep << e.chain_success;
        sep = ", ";
      }
      throw RelayBuildError(msg.str(), out.log);
    }

    ProposalConfig pcfg;
    pcfg.w = cfg.w;
    pcfg.scale = scale;
    pcfg.step = cfg.proposal_step;
    pcfg.max_iters = cfg.proposal_iters;
    // The value net is only trustworthy near the data that trained it, so
    // the proposal may not leave a radius around the parent mean.
    ProposalBox nbox{
        box.lower.cwiseMax(node.mean - cfg.proposal_radius * scale),
        box.upper.cwiseMin(node.mean + cfg.proposal_radius * scale)};
    // Value scale grows ~alpha-fold per chain level, so the descent runs on
    // V / |vbar|; without this the pull term cannot steer the proposal.
    const double vnorm = std::max(std::abs(edge.vbar), 1e-9);
    const Eigen::VectorXd vgrad_one = Eigen::VectorXd::Ones(1);
    const Eigen::VectorXd mu = propose_next_init(
        [&edge, vnorm](const Eigen::VectorXd& s) {
          return approx::forward(edge.v_spec, edge.v_params, s)[0] / vnorm;
        },
        [&edge, vnorm, &vgrad_one](const Eigen::VectorXd& s) {
          return (approx::grad_input(edge.v_spec, edge.v_params, s,
                                     vgrad_one) /
                  vnorm)
              .eval();
        },
        edge.vbar / vnorm, task_cfg.start_mean, node.mean, nbox, pcfg);

    // Reality check on the proposal: the chain built so far must already
    // succeed from the proposed cloud at a useful rate, otherwise the mean
    // sits in a region the parent's value net certifies on no evidence.
    // Halve the step until real rollouts back it.
    Eigen::VectorXd mu_v = mu;
    bool march_ok = false;
    for (int a = 0; a <= cfg.march_halvings; ++a) {
      envs::SwingupTaskConfig mc = task_cfg;
      mc.start_mean = mu_v;
      mc.start_cov = rho0.cov;
      RngStream mrng = substream(cfg.seed, "relay-march", (K + 1) * 16 + a);
      march_rate = probe_graph_success(g, mc, cfg.val_probes, gamma, mrng, K);
      if (march_rate >= cfg.march_accept) {
        march_ok = true;
        break;
      }
      mu_v = (g.nodes[K].mean + 0.5 * (mu_v - g.nodes[K].mean)).eval();
    }
    if (!march_ok)
      throw RelayBuildError(
          "relay build: march validation failed at node " +
              std::to_string(K + 1) + "; parent chain rate " +
              std::to_string(march_rate) + " after " +
              std::to_string(cfg.march_halvings) + " halvings",
          out.log);
    node = RelayNode{mu_v, rho0.cov};
  }
}

namespace {

constexpr int kGraphFormatVersion = 1;

nlohmann::json vec_json(const Eigen::VectorXd& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd json_vec(const nlohmann::json& a) {
  Eigen::VectorXd v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  return v;
}

}  // namespace

void save_relay_graph(const RelayGraph& g, const std::string& dir,
                      const RelayBuildLog* log) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json j;
  j["format_version"] = kGraphFormatVersion;
  j["alpha"] = g.alpha;
  j["w"] = g.w;
  j["nodes"] = nlohmann::json::array();
  for (const RelayNode& n : g.nodes) {
    nlohmann::json jn;
    jn["mean"] = vec_json(n.mean);
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < n.cov.rows(); ++r)
      rows.push_back(vec_json(n.cov.row(r)));
    jn["cov"] = rows;
    j["nodes"].push_back(jn);
  }
  j["edges"] = nlohmann::json::array();
  for (int k = 0; k < g.size(); ++k) {
    const RelayEdge& e = g.edges[k];
    const std::string pi_file = "edge" + std::to_string(k) + "_pi.json";
    const std::string v_file = "edge" + std::to_string(k) + "_v.json";
    approx::save_net((fs::path(dir) / pi_file).string(), e.pi.mean_spec,
                     e.pi.mean_params);
    approx::save_net((fs::path(dir) / v_file).string(), e.v_spec, e.v_params);
    nlohmann::json je;
    je["pi"] = pi_file;
    je["v"] = v_file;
    je["log_std"] = vec_json(e.pi.log_std);
    je["vbar"] = e.vbar;
    j["edges"].push_back(je);
  }
  if (log) {
    nlohmann::json jl = nlohmann::json::array();
    for (const RelayBuildLog::EdgeLog& e : log->edges) {
      nlohmann::json je;
      je["node"] = e.node;
      je["iterations"] = e.iterations;
      je["steps"] = e.steps;
      je["edge_rate"] = e.edge_rate;
      je["march_rate"] = e.march_rate;
      je["vbar"] = e.vbar;
      je["threshold_attempts"] = e.threshold_attempts;
      je["chain_success"] = e.chain_success;
      je["node_mean"] = vec_json(e.node_mean);
      jl.push_back(je);
    }
    j["build_log"] = jl;
    j["total_steps"] = log->total_steps;
  }
  std::ofstream out(fs::path(dir) / "manifest.json");
  if (!out) throw std::runtime_error("save graph: cannot open manifest");
  out << j.dump(1) << "\n";
  if (!out.good()) throw std::runtime_error("save graph: manifest write failed");
}

RelayGraph load_relay_graph(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream in(fs::path(dir) / "manifest.json");
  if (!in) throw std::runtime_error("load graph: cannot open manifest");
  nlohmann::json j;
  in >> j;
  if (j.at("format_version").get<int>() != kGraphFormatVersion)
    throw std::runtime_error("load graph: unsupported format_version");
  RelayGraph g;
  g.alpha = j.at("alpha").get<double>();
  g.w = j.at("w").get<double>();
  for (const nlohmann::json& jn : j.at("nodes")) {
    RelayNode n;
    n.mean = json_vec(jn.at("mean"));
    const auto& rows = jn.at("cov");
    n.cov.resize(rows.size(), rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r)
      n.cov.row(static_cast<Eigen::Index>(r)) = json_vec(rows[r]).transpose();
    g.nodes.push_back(std::move(n));
  }
  for (const nlohmann::json& je : j.at("edges")) {
    RelayEdge e;
    auto [pis, pip] =
        approx::load_net((fs::path(dir) / je.at("pi").get<std::string>()).string());
    e.pi.mean_spec = pis;
    e.pi.mean_params = pip;
    e.pi.log_std = json_vec(je.at("log_std"));
    auto [vs, vp] =
        approx::load_net((fs::path(dir) / je.at("v").get<std::string>()).string());
    e.v_spec = vs;
    e.v_params = vp;
    e.vbar = je.at("vbar").get<double>();
    g.edges.push_back(std::move(e));
  }
  if (g.nodes.size() != g.edges.size())
    throw std::runtime_error("load graph: node/edge count mismatch");
  return g;
}

}  // namespace recoverkit::relay
