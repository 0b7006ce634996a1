#include "recoverkit/mace/mace.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "recoverkit/approx/optimizer.hpp"

namespace recoverkit::mace {

MaceNet make_mace_net(int n_parts, int shared_width, std::uint64_t seed) {
  if (n_parts < 1 || shared_width < 1)
    throw std::invalid_argument("mace: bad net dimensions");
  MaceNet net;
  net.shared_spec = {5, {}, shared_width, approx::OutputActivation::tanh_out,
                     fnv1a64("mace-shared") ^ seed};
  net.shared = approx::init_params(net.shared_spec);
  for (int i = 0; i < n_parts; ++i) {
    approx::NetSpec cs{shared_width,
                       {32, 32},
                       1,
                       approx::OutputActivation::linear,
                       fnv1a64("mace-critic") ^ (seed + 0x9e3779b97f4a7c15ULL * i)};
    approx::NetSpec as{shared_width,
                       {128, 128, 128},
                       3,
                       approx::OutputActivation::tanh_out,
                       fnv1a64("mace-actor") ^ (seed + 0x9e3779b97f4a7c15ULL * i)};
    net.critic_spec.push_back(cs);
    net.actor_spec.push_back(as);
    net.critics.push_back(approx::init_params(cs));
    net.actors.push_back(approx::init_params(as));
  }
  net.target_shared = net.shared;
  net.target_critics = net.critics;
  return net;
}

Eigen::VectorXd fall_observation(const envs::FallModelParams& mp,
                                 const envs::FallState& s) {
  const double r_mid = 0.5 * (mp.r_min + mp.r_max);
  const double r_half = 0.5 * (mp.r_max - mp.r_min);
  Eigen::VectorXd o(5);
  o << static_cast<double>(s.c1) / std::max(1, mp.n_parts() - 1),
      (s.r1 - r_mid) / r_half, s.theta1, s.rdot1, s.thetadot1 / 3.0;
  return o;
}

Eigen::VectorXd mace_values(const MaceNet& net, const Eigen::VectorXd& obs) {
  const Eigen::VectorXd h = approx::forward(net.shared_spec, net.shared, obs);
  Eigen::VectorXd v(net.n());
  for (int i = 0; i < net.n(); ++i)
    v[i] = approx::forward(net.critic_spec[i], net.critics[i], h)[0];
  return v;
}

Eigen::VectorXd mace_target_values(const MaceNet& net,
                                   const Eigen::VectorXd& obs) {
  const Eigen::VectorXd h =
      approx::forward(net.shared_spec, net.target_shared, obs);
  Eigen::VectorXd v(net.n());
  for (int i = 0; i < net.n(); ++i)
    v[i] = approx::forward(net.critic_spec[i], net.target_critics[i], h)[0];
  return v;
}

Eigen::Vector3d mace_actor(const MaceNet& net, int c,
                           const Eigen::VectorXd& obs) {
  if (c < 0 || c >= net.n()) throw std::invalid_argument("mace: bad head index");
  const Eigen::VectorXd h = approx::forward(net.shared_spec, net.shared, obs);
  return approx::forward(net.actor_spec[c], net.actors[c], h);
}

void sync_targets(MaceNet& net) {
  approx::target_sync_copy(net.shared, net.target_shared);
  for (int i = 0; i < net.n(); ++i)
    approx::target_sync_copy(net.critics[i], net.target_critics[i]);
}

std::vector<double> boltzmann_probs(const std::vector<double>& values,
                                    double temperature) {
  if (values.empty()) throw std::invalid_argument("boltzmann: empty values");
  std::vector<double> p(values.size(), 0.0);
  if (temperature <= 0.0) {
    p[std::max_element(values.begin(), values.end()) - values.begin()] = 1.0;
    return p;
  }
  const double vmax = *std::max_element(values.begin(), values.end());
  double z = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    p[i] = std::exp((values[i] - vmax) / temperature);
    z += p[i];
  }
  for (double& x : p) x /= z;
  return p;
}

int select_actor(const std::vector<double>& values, double temperature,
                 RngStream& rng) {
  if (values.empty()) throw std::invalid_argument("select_actor: empty values");
  if (temperature <= 0.0)
    return static_cast<int>(
        std::max_element(values.begin(), values.end()) - values.begin());
  const std::vector<double> p = boltzmann_probs(values, temperature);
  const double u = rng.uniform01();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(p.size()) - 1;  // u landed on accumulated rounding
}

double min_composed_target(double r, double vhat_max, bool terminal,
                           double gamma) {
  return terminal ? r : std::min(r, gamma * vhat_max);
}

double critic_target(const MaceNet& net, const envs::FallModelParams& mp,
                     double r, const envs::FallState& s_next, bool terminal,
                     double gamma) {
  if (terminal) return r;
  const Eigen::VectorXd v = mace_target_values(net, fall_observation(mp, s_next));
  return min_composed_target(r, v.maxCoeff(), false, gamma);
}

void MaceConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0))
    throw std::invalid_argument("mace: gamma outside (0, 1]");
  if (T0 < 0.0) throw std::invalid_argument("mace: negative temperature");
  if (lr <= 0.0 || minibatch < 1 || rollouts_per_iter < 1 || iterations < 0 ||
      anneal_iters < 1 || sigma < 0.0 || buffer_capacity == 0 ||
      target_sync_period < 1 || updates_per_iter < 1 || max_contacts < 1)
    throw std::invalid_argument("mace: bad config value");
}

namespace {

// Shared-trunk composition used by both updates: forward through the shared
// layer once, then a head; reverse through the head and accumulate the
// chained gradient into the shared layer.
struct HeadPass {
  approx::ForwardTrace shared_trace, head_trace;
  Eigen::VectorXd h, out;

  const Eigen::VectorXd& run(const MaceNet& net, const approx::NetSpec& hs,
                             const approx::ParamVector& hp,
                             const Eigen::VectorXd& obs) {
    h = approx::forward(net.shared_spec, net.shared, obs, shared_trace);
    out = approx::forward(hs, hp, h, head_trace);
    return out;
  }

  void back(const MaceNet& net, const approx::NetSpec& hs,
            const approx::ParamVector& hp, const Eigen::VectorXd& upstream,
            approx::ParamVector& head_acc, approx::ParamVector& shared_acc) {
    Eigen::VectorXd into_h;
    approx::backprop(hs, hp, head_trace, upstream, &head_acc, &into_h);
    approx::backprop(net.shared_spec, net.shared, shared_trace, into_h,
                     &shared_acc, nullptr);
  }
};

}  // namespace

double update_critic(MaceNet& net, const MaceConfig& cfg,
                     const envs::FallModelParams& mp,
                     const std::vector<ReplayTuple>& batch) {
  if (batch.empty()) return 0.0;
  approx::ParamVector shared_acc = approx::ParamVector::Zero(net.shared.size());
  std::vector<approx::ParamVector> head_acc(net.n());
  std::vector<bool> touched(net.n(), false);
  HeadPass pass;
  double sq_td = 0.0;
  for (const ReplayTuple& t : batch) {
    if (t.c < 0 || t.c >= net.n())
      throw std::invalid_argument("mace: tuple part index outside net");
    const Eigen::VectorXd obs = fall_observation(mp, t.s);
    const double v =
        pass.run(net, net.critic_spec[t.c], net.critics[t.c], obs)[0];
    const double y = critic_target(net, mp, t.r, t.s_next, t.terminal, cfg.gamma);
    const double td = y - v;
    sq_td += td * td;
    if (!touched[t.c]) {
      head_acc[t.c] = approx::ParamVector::Zero(net.critics[t.c].size());
      touched[t.c] = true;
    }
    Eigen::VectorXd up(1);
    up << td;
    pass.back(net, net.critic_spec[t.c], net.critics[t.c], up, head_acc[t.c],
              shared_acc);
  }
  // Minibatch mean, not sum: step size stays lr-controlled as m changes.
  const double inv = 1.0 / static_cast<double>(batch.size());
  shared_acc *= inv;
  auto sgd = approx::make_sgd(cfg.lr);
  approx::optimizer_step(sgd, net.shared, shared_acc, /*ascend=*/true);
  for (int i = 0; i < net.n(); ++i)
    if (touched[i]) {
      head_acc[i] *= inv;
      approx::optimizer_step(sgd, net.critics[i], head_acc[i], /*ascend=*/true);
    }
  return sq_td / static_cast<double>(batch.size());
}

int update_actor(MaceNet& net, const MaceConfig& cfg,
                 const envs::FallModelParams& mp,
                 const std::vector<ReplayTuple>& batch) {
  if (batch.empty()) return 0;
  approx::ParamVector shared_acc = approx::ParamVector::Zero(net.shared.size());
  std::vector<approx::ParamVector> head_acc(net.n());
  std::vector<bool> touched(net.n(), false);
  HeadPass pass;
  int passed = 0;
  for (const ReplayTuple& t : batch) {
    if (t.c < 0 || t.c >= net.n())
      throw std::invalid_argument("mace: tuple part index outside net");
    const Eigen::VectorXd obs = fall_observation(mp, t.s);
    const double y = mace_values(net, obs).maxCoeff();
    const double y2 = critic_target(net, mp, t.r, t.s_next, t.terminal, cfg.gamma);
    if (!(y2 > y)) continue;  // the outcome did not beat the current value
    ++passed;
    const Eigen::VectorXd pi =
        pass.run(net, net.actor_spec[t.c], net.actors[t.c], obs);
    const Eigen::Vector3d a = envs::fall_action_to_normalized(mp, t.c, t.a);
    if (!touched[t.c]) {
      head_acc[t.c] = approx::ParamVector::Zero(net.actors[t.c].size());
      touched[t.c] = true;
    }
    const Eigen::VectorXd up = a - pi;  // pull the actor toward the action
    pass.back(net, net.actor_spec[t.c], net.actors[t.c], up, head_acc[t.c],
              shared_acc);
  }
  if (passed == 0) return 0;
  // Averaged over the gate-passing tuples, mirroring the critic convention.
  const double inv = 1.0 / static_cast<double>(passed);
  shared_acc *= inv;
  auto sgd = approx::make_sgd(cfg.lr);
  approx::optimizer_step(sgd, net.shared, shared_acc, /*ascend=*/true);
  for (int i = 0; i < net.n(); ++i)
    if (touched[i]) {
      head_acc[i] *= inv;
      approx::optimizer_step(sgd, net.actors[i], head_acc[i], /*ascend=*/true);
    }
  return passed;
}

std::pair<int, envs::FallAction> act(const MaceNet& net,
                                     const envs::FallModelParams& mp,
                                     const envs::FallState& s) {
  const Eigen::VectorXd obs = fall_observation(mp, s);
  const Eigen::VectorXd v = mace_values(net, obs);
  int c = 0;
  for (int i = 1; i < net.n(); ++i)
    if (v[i] > v[c]) c = i;
  const Eigen::Vector3d u =
      mace_actor(net, c, obs).cwiseMax(-1.0).cwiseMin(1.0);
  return {c, envs::fall_action_from_normalized(mp, c, u)};
}

double greedy_episode_value(const MaceNet& net,
                            const envs::FallModelParams& mp,
                            const envs::FallState& s, int max_contacts) {
  double value = 1.0;
  envs::FallState cur = s;
  for (int k = 0; k < max_contacts; ++k) {
    if (envs::fall_is_halted(cur)) break;
    auto [c, a] = act(net, mp, cur);
    const auto res = envs::fall_simulate_to_next_contact(mp, cur, c, a);
    if (res.contact) value = std::min(value, res.reward);
    cur = res.next;
    if (res.halted) break;
  }
  return value;
}

MaceTrainResult train_mace(const envs::FallModelParams& mp,
                           const MaceConfig& cfg,
                           const std::vector<ReplayTuple>& seed_tuples) {
  cfg.validate();
  MaceTrainResult out;
  out.net = make_mace_net(mp.n_parts(), cfg.shared_width, cfg.seed);
  out.buffer = ReplayBuffer(cfg.buffer_capacity);
  for (const ReplayTuple& t : seed_tuples) out.buffer.push(t);

  RngStream probe_rng = substream(cfg.seed, "mace-probe");
  for (int i = 0; i < 10; ++i)
    out.probe_states.push_back(
        envs::sample_fall_start(mp, cfg.init_dist, probe_rng));

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    const double temp =
        cfg.T0 * std::max(0.0, 1.0 - static_cast<double>(iter) / cfg.anneal_iters);

    for (int k = 0; k < cfg.rollouts_per_iter; ++k) {
      RngStream rng = substream(cfg.seed, "mace-rollout",
                                static_cast<std::uint64_t>(iter) *
                                        cfg.rollouts_per_iter +
                                    k);
      envs::FallState s = envs::sample_fall_start(mp, cfg.init_dist, rng);
      for (int step = 0; step < cfg.max_contacts; ++step) {
        if (envs::fall_is_halted(s)) break;
        const Eigen::VectorXd obs = fall_observation(mp, s);
        const Eigen::VectorXd v = mace_values(out.net, obs);
        const std::vector<double> values(v.data(), v.data() + v.size());
        const int c = select_actor(values, temp, rng);
        Eigen::Vector3d u = mace_actor(out.net, c, obs);
        u += cfg.sigma * rng.normal_vec(3);
        u = u.cwiseMax(-1.0).cwiseMin(1.0);
        const envs::FallAction a = envs::fall_action_from_normalized(mp, c, u);
        const auto res = envs::fall_simulate_to_next_contact(mp, s, c, a);
        out.buffer.push({s, a, res.next, res.reward, c, res.halted});
        s = res.next;
        if (res.halted) break;
      }
    }

    RngStream urng = substream(cfg.seed, "mace-update", iter);
    double loss = 0.0;
    int actor_passed = 0;
    for (int u = 0; u < cfg.updates_per_iter; ++u) {
      std::vector<ReplayTuple> batch;
      batch.reserve(cfg.minibatch);
      for (int b = 0; b < cfg.minibatch; ++b)
        batch.push_back(out.buffer.sample(urng));
      loss += update_critic(out.net, cfg, mp, batch);
      actor_passed += update_actor(out.net, cfg, mp, batch);
    }
    if ((iter + 1) % cfg.target_sync_period == 0) sync_targets(out.net);

    MaceIterRow row;
    row.iter = iter;
    row.temperature = temp;
    row.buffer_size = out.buffer.size();
    double probe = 0.0;
    for (const envs::FallState& ps : out.probe_states)
      probe += greedy_episode_value(out.net, mp, ps, cfg.max_contacts);
    row.probe_reward = probe / static_cast<double>(out.probe_states.size());
    row.critic_loss = loss / cfg.updates_per_iter;
    row.actor_updates = actor_passed;
    out.history.push_back(row);
  }
  return out;
}

}  // namespace recoverkit::mace
