#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>

#include "recoverkit/dp/planner.hpp"
#include "recoverkit/mace/mace.hpp"

using namespace recoverkit;
using namespace recoverkit::mace;
using envs::FallModelParams;
using envs::FallState;

namespace {

FallModelParams two_part_model() {
  FallModelParams mp;
  mp.parts = {mp.parts[0], mp.parts[3]};  // toe and hand
  return mp;
}

bool params_equal(const MaceNet& a, const MaceNet& b) {
  if (a.shared != b.shared || a.target_shared != b.target_shared) return false;
  for (int i = 0; i < a.n(); ++i)
    if (a.critics[i] != b.critics[i] || a.actors[i] != b.actors[i] ||
        a.target_critics[i] != b.target_critics[i])
      return false;
  return true;
}

}  // namespace

TEST_CASE("boltzmann probabilities") {
  std::vector<double> equal{0.4, 0.4, 0.4, 0.4};
  auto p = boltzmann_probs(equal, 2.0);
  for (double x : p) CHECK(x == doctest::Approx(0.25).epsilon(1e-14));

  auto greedy = boltzmann_probs({0.2, 0.9, 0.1}, 0.0);
  CHECK(greedy[1] == 1.0);
  CHECK(greedy[0] == 0.0);

  auto two = boltzmann_probs({1.0, 0.0}, 1.0);
  CHECK(two[0] == doctest::Approx(0.73106).epsilon(1e-4));
  CHECK(two[1] == doctest::Approx(0.26894).epsilon(1e-4));

  RngStream rng = substream(3, "boltz");
  for (int i = 0; i < 50; ++i) {
    std::vector<double> v;
    for (int k = 0; k < 5; ++k) v.push_back(rng.uniform(-3.0, 3.0));
    auto probs = boltzmann_probs(v, 0.7);
    double sum = 0.0;
    for (double x : probs) sum += x;
    CHECK(std::abs(sum - 1.0) < 1e-12);
    std::vector<double> shifted = v;
    for (double& x : shifted) x += 17.5;
    auto probs2 = boltzmann_probs(shifted, 0.7);
    for (std::size_t k = 0; k < probs.size(); ++k)
      CHECK(std::abs(probs[k] - probs2[k]) < 1e-12);
  }
}

TEST_CASE("greedy selection and sampling frequencies") {
  RngStream rng = substream(4, "select");
  CHECK(select_actor({0.2, 0.9, 0.1}, 0.0, rng) == 1);
  CHECK(select_actor({0.5, 0.5}, 0.0, rng) == 0);  // lowest-index tie-break

  int first = 0;
  const int trials = 20000;
  for (int i = 0; i < trials; ++i)
    if (select_actor({1.0, 0.0}, 1.0, rng) == 0) ++first;
  CHECK(std::abs(first / static_cast<double>(trials) - 0.73106) < 0.01);
}

TEST_CASE("min-composed target arithmetic") {
  CHECK(min_composed_target(0.5, 1.0, false, 0.9) == 0.5);
  CHECK(min_composed_target(1.0, 0.4, false, 0.9) == doctest::Approx(0.36).epsilon(1e-14));
  CHECK(min_composed_target(0.7, 123.0, true, 0.9) == 0.7);
}

TEST_CASE("critic target uses the frozen copies") {
  FallModelParams mp;
  MaceNet net = make_mace_net(mp.n_parts(), 16, 11);
  FallState s{1, 0.17, 0.3, 0.0, 1.0};
  CHECK(critic_target(net, mp, 0.7, s, true, 0.9) == 0.7);
  const double vmax = mace_target_values(net, fall_observation(mp, s)).maxCoeff();
  CHECK(critic_target(net, mp, 0.9, s, false, 0.9) ==
        min_composed_target(0.9, vmax, false, 0.9));
}

TEST_CASE("fresh net has targets equal to live critics") {
  MaceNet net = make_mace_net(4, 16, 5);
  CHECK(net.shared == net.target_shared);
  for (int i = 0; i < 4; ++i) CHECK(net.critics[i] == net.target_critics[i]);
  MaceNet other = make_mace_net(4, 16, 6);
  CHECK(net.shared != other.shared);  // seed-sensitive init
}

TEST_CASE("zero temperature-difference batch leaves the critic unchanged") {
  FallModelParams mp;
  MaceConfig cfg;
  MaceNet net = make_mace_net(mp.n_parts(), 16, 21);
  const MaceNet before = net;
  FallState s{0, 0.2, 0.4, 0.1, 1.5};
  std::vector<ReplayTuple> batch;
  for (int c = 0; c < 2; ++c) {
    const Eigen::VectorXd obs = fall_observation(mp, s);
    const double v = mace_values(net, obs)[c];
    ReplayTuple t;
    t.s = s;
    t.c = c;
    t.r = v;  // terminal target y = r = current value: zero TD
    t.terminal = true;
    batch.push_back(t);
  }
  CHECK(update_critic(net, cfg, mp, batch) == 0.0);
  CHECK(params_equal(net, before));
}

TEST_CASE("critic moves toward the target, unselected heads untouched") {
  FallModelParams mp;
  MaceConfig cfg;
  cfg.lr = 1e-3;
  MaceNet net = make_mace_net(mp.n_parts(), 16, 22);
  const MaceNet before = net;
  FallState s{2, 0.15, 0.5, -0.1, 2.0};
  const Eigen::VectorXd obs = fall_observation(mp, s);
  const double v0 = mace_values(net, obs)[1];

  ReplayTuple t;
  t.s = s;
  t.c = 1;
  t.r = v0 + 0.4;
  t.terminal = true;
  update_critic(net, cfg, mp, {t});
  const double v1 = mace_values(net, obs)[1];
  CHECK(v1 > v0);
  CHECK(v1 < v0 + 0.4);

  for (int i : {0, 2, 3}) CHECK(net.critics[i] == before.critics[i]);
  for (int i = 0; i < net.n(); ++i) {
    CHECK(net.actors[i] == before.actors[i]);
    CHECK(net.target_critics[i] == before.target_critics[i]);
  }
  CHECK(net.shared != before.shared);  // shared layer learns with the head

  ReplayTuple down = t;
  down.r = mace_values(net, obs)[1] - 0.4;
  const double v2 = mace_values(net, obs)[1];
  update_critic(net, cfg, mp, {down});
  CHECK(mace_values(net, obs)[1] < v2);
}

TEST_CASE("actor gate blocks tuples that do not beat the current value") {
  FallModelParams mp;
  MaceConfig cfg;
  MaceNet net = make_mace_net(mp.n_parts(), 16, 23);
  const MaceNet before = net;
  FallState s{0, 0.18, 0.45, 0.0, 1.2};
  const double y = mace_values(net, fall_observation(mp, s)).maxCoeff();

  ReplayTuple t;
  t.s = s;
  t.c = 2;
  t.a = envs::FallAction{-0.6, 0.15, 0.1};
  t.r = y - 0.1;  // terminal target below the live value: gate shut
  t.terminal = true;
  CHECK(update_actor(net, cfg, mp, {t}) == 0);
  CHECK(params_equal(net, before));
}

TEST_CASE("passing tuple pulls the actor toward the executed action") {
  FallModelParams mp;
  MaceConfig cfg;
  cfg.lr = 1e-2;
  FallState s{0, 0.18, 0.45, 0.0, 1.2};
  // one axis at a time: the output change along the probed axis must have
  // the sign of (a - pi) there
  for (int axis = 0; axis < 3; ++axis) {
    MaceNet net = make_mace_net(mp.n_parts(), 16, 24);
    const Eigen::VectorXd obs = fall_observation(mp, s);
    const double y = mace_values(net, obs).maxCoeff();
    const Eigen::Vector3d pi0 = mace_actor(net, 1, obs);
    Eigen::Vector3d u = pi0;
    u[axis] = std::min(1.0, pi0[axis] + 0.4);

    ReplayTuple t;
    t.s = s;
    t.c = 1;
    t.a = envs::fall_action_from_normalized(mp, 1, u);
    t.r = y + 0.4;
    t.terminal = true;
    CHECK(update_actor(net, cfg, mp, {t}) == 1);
    const Eigen::Vector3d pi1 = mace_actor(net, 1, obs);
    CHECK(pi1[axis] > pi0[axis]);
    CHECK(net.critics[1] == make_mace_net(mp.n_parts(), 16, 24).critics[1]);
  }
}

TEST_CASE("action already matching the policy gives a zero update") {
  FallModelParams mp;
  MaceConfig cfg;
  MaceNet net = make_mace_net(mp.n_parts(), 16, 25);
  FallState s{1, 0.2, 0.5, 0.0, 1.8};
  const Eigen::VectorXd obs = fall_observation(mp, s);
  const double y = mace_values(net, obs).maxCoeff();

  // settle the normalized action on a round-trip fixed point of the affine
  // bound mapping so a == pi holds bitwise inside the update
  Eigen::Vector3d u = mace_actor(net, 3, obs);
  envs::FallAction raw;
  for (int i = 0; i < 5; ++i) {
    raw = envs::fall_action_from_normalized(mp, 3, u);
    Eigen::Vector3d u2 = envs::fall_action_to_normalized(mp, 3, raw);
    if (u2 == u) break;
    u = u2;
  }
  REQUIRE(envs::fall_action_to_normalized(mp, 3, raw) == u);
  const Eigen::Vector3d pi = mace_actor(net, 3, obs);
  if (pi != u) {
    // the mapping nudged the action off the policy output; the zero-update
    // claim only applies when they coincide, which the fixed point gives us
    // whenever the bounds allow it
    WARN_MESSAGE(true, "round-trip moved off the policy output; skipping");
    return;
  }

  const MaceNet before = net;
  ReplayTuple t;
  t.s = s;
  t.c = 3;
  t.a = raw;
  t.r = y + 0.4;
  t.terminal = true;
  CHECK(update_actor(net, cfg, mp, {t}) == 1);  // gate passes
  CHECK(params_equal(net, before));             // but nothing to pull toward
}

TEST_CASE("greedy act picks the highest critic with index tie-break") {
  FallModelParams mp;
  MaceNet net = make_mace_net(mp.n_parts(), 16, 26);
  for (int i = 1; i < net.n(); ++i) {
    net.critics[i] = net.critics[0];  // identical heads: all values equal
    net.target_critics[i] = net.target_critics[0];
  }
  FallState s{0, 0.17, 0.4, 0.0, 1.0};
  auto [c, a] = act(net, mp, s);
  CHECK(c == 0);
  auto [c2, a2] = act(net, mp, s);
  CHECK(c2 == 0);
  CHECK(a.theta2 == a2.theta2);  // no exploration inside act
  CHECK(a.theta2 >= mp.theta2_min);
  CHECK(a.theta2 <= mp.theta2_max);
  CHECK(a.delta >= mp.parts[0].delta_min);
  CHECK(a.delta <= mp.parts[0].delta_max);
}

TEST_CASE("zero training iterations return the initialized net") {
  FallModelParams mp = two_part_model();
  MaceConfig cfg;
  cfg.iterations = 0;
  cfg.shared_width = 16;
  cfg.seed = 31;
  std::vector<ReplayTuple> seeds;
  ReplayTuple t;
  t.s = FallState{0, 0.17, 0.3, 0.0, 1.0};
  t.r = 0.8;
  seeds.push_back(t);
  auto result = train_mace(mp, cfg, seeds);
  CHECK(params_equal(result.net, make_mace_net(2, 16, 31)));
  CHECK(result.buffer.size() == 1);  // the seed tuple alone
  CHECK(result.history.empty());
  CHECK(result.probe_states.size() == 10);
}

TEST_CASE("buffer keeps seeds and grows during the first iteration") {
  FallModelParams mp = two_part_model();
  MaceConfig cfg;
  cfg.iterations = 1;
  cfg.shared_width = 16;
  cfg.seed = 32;
  std::vector<ReplayTuple> seeds;
  for (int i = 0; i < 5; ++i) {
    ReplayTuple t;
    t.s = FallState{0, 0.17, 0.3, 0.0, 1.0};
    t.r = 0.5 + 0.01 * i;
    seeds.push_back(t);
  }
  auto result = train_mace(mp, cfg, seeds);
  CHECK(result.buffer.size() > 5);
  for (std::size_t i = 0; i < 5; ++i)  // FIFO: seeds stay at the front
    CHECK(result.buffer[i].r == seeds[i].r);
  CHECK(result.history.size() == 1);
  CHECK(result.history[0].buffer_size == result.buffer.size());
}

TEST_CASE("noise-free greedy collection is identical across reruns") {
  FallModelParams mp = two_part_model();
  MaceConfig cfg;
  cfg.iterations = 2;
  cfg.shared_width = 16;
  cfg.sigma = 0.0;
  cfg.T0 = 0.0;
  cfg.seed = 33;
  auto r1 = train_mace(mp, cfg, {});
  auto r2 = train_mace(mp, cfg, {});
  REQUIRE(r1.buffer.size() == r2.buffer.size());
  for (std::size_t i = 0; i < r1.buffer.size(); ++i) {
    CHECK(r1.buffer[i].s.continuous() == r2.buffer[i].s.continuous());
    CHECK(r1.buffer[i].a.theta2 == r2.buffer[i].a.theta2);
    CHECK(r1.buffer[i].a.delta == r2.buffer[i].a.delta);
    CHECK(r1.buffer[i].r == r2.buffer[i].r);
    CHECK(r1.buffer[i].c == r2.buffer[i].c);
  }
  CHECK(params_equal(r1.net, r2.net));
}

TEST_CASE("replay buffer respects capacity with FIFO eviction") {
  ReplayBuffer buf(3);
  for (int i = 0; i < 5; ++i) {
    ReplayTuple t;
    t.r = 0.1 * (i + 1);
    buf.push(t);
    CHECK(buf.size() <= 3);
  }
  CHECK(buf.size() == 3);
  CHECK(buf[0].r == doctest::Approx(0.3));  // oldest survivor
  CHECK(buf[2].r == doctest::Approx(0.5));
  ReplayTuple bad;
  bad.r = 0.0;
  CHECK_THROWS_AS(buf.push(bad), std::invalid_argument);
  bad.r = 1.5;
  CHECK_THROWS_AS(buf.push(bad), std::invalid_argument);
}

TEST_CASE("shrunk task training does not end worse than it started") {
  FallModelParams mp = two_part_model();
  MaceConfig cfg;
  cfg.iterations = 200;
  cfg.shared_width = 32;
  cfg.anneal_iters = 100;
  cfg.seed = 34;
  dp::GridSpec g;
  g.depth = 2;
  g.theta2_bins = 2;
  g.delta_bins = 2;
  g.rdot_d_bins = 2;
  RngStream seed_rng = substream(cfg.seed, "seed-plans");
  auto seeds = dp::seed_buffer(mp, g, 40, cfg.init_dist, seed_rng);
  REQUIRE(!seeds.empty());

  auto result = train_mace(mp, cfg, seeds);
  MaceNet fresh = make_mace_net(2, cfg.shared_width, cfg.seed);
  double untrained = 0.0;
  for (const FallState& ps : result.probe_states)
    untrained += greedy_episode_value(fresh, mp, ps, cfg.max_contacts);
  untrained /= static_cast<double>(result.probe_states.size());

  const double trained = result.history.back().probe_reward;
  MESSAGE("probe reward untrained ", untrained, " -> trained ", trained);
  CHECK(trained >= untrained);

  // value consistency: the best critic never promises more than the worst
  // impact already realized, within approximation error
  double eps = 0.0;
  for (const FallState& ps : result.probe_states) {
    FallState cur = ps;
    double realized = 1.0;
    for (int k = 0; k < cfg.max_contacts; ++k) {
      if (envs::fall_is_halted(cur)) break;
      auto [c, a] = act(result.net, mp, cur);
      auto res = envs::fall_simulate_to_next_contact(mp, cur, c, a);
      if (res.contact) realized = std::min(realized, res.reward);
      cur = res.next;
      if (res.halted) break;
      const double v =
          mace_values(result.net, fall_observation(mp, cur)).maxCoeff();
      eps = std::max(eps, v - realized);
    }
  }
  MESSAGE("min-composition violation eps = ", eps);
  CHECK(eps < 0.5);
}

TEST_CASE("greedy action is much cheaper than planning") {
  FallModelParams mp;
  MaceNet net = make_mace_net(mp.n_parts(), 32, 35);
  dp::GridSpec g;
  FallState s{0, 0.17, 0.35, 0.0, 1.2};

  auto plan = dp::dp_plan(mp, g, s);
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < 10; ++i) act(net, mp, s);
  const double act_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count() /
      10.0;
  MESSAGE("act ", act_s * 1e6, " us vs plan ", plan.seconds * 1e3, " ms");
  CHECK(act_s < plan.seconds / 10.0);
}
