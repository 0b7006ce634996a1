#include "recoverkit/curriculum/adaptive.hpp"

#include <cmath>
#include <stdexcept>

namespace recoverkit::curriculum {

void ResidualPolicySpec::validate() const {
  if (!std::isfinite(residual_bound) || residual_bound < 0.0)
    throw std::invalid_argument("residual spec: bound must be finite");
  if (residual_hidden.empty())
    throw std::invalid_argument("residual spec: empty net");
}

RoAPolygon measure_roa_with(
    const std::function<bool(int, double, int)>& success, int M, int trials,
    double resolution, double omega_max, double threshold) {
  if (M < 3 || trials < 1)
    throw std::invalid_argument("measure: M or trial count too small");
  if (!(resolution > 0.0) || !(omega_max > 0.0))
    throw std::invalid_argument("measure: resolution and bracket positive");
  RoAPolygon out = make_roa(M, 0.0);
  for (int i = 0; i < M; ++i) {
    const auto rate = [&](double omega) {
      int good = 0;
      for (int t = 0; t < trials; ++t)
        if (success(i, omega, t)) ++good;
      return static_cast<double>(good) / static_cast<double>(trials);
    };
    if (rate(0.0) < threshold) {
      out.omega[i] = 0.0;
      continue;
    }
    if (rate(omega_max) >= threshold) {
      out.omega[i] = omega_max;  // bracket top; the caller chose the cap
      continue;
    }
    double lo = 0.0, hi = omega_max;
    while (hi - lo > resolution) {
      const double mid = 0.5 * (lo + hi);
      if (rate(mid) >= threshold)
        lo = mid;
      else
        hi = mid;
    }
    out.omega[i] = lo;
  }
  return out;
}

RoAPolygon measure_roa(const rl::GaussianPolicy& pi,
                       const envs::BalanceTaskConfig& task_cfg, int M,
                       int trials, double resolution, double omega_max,
                       std::uint64_t seed, double threshold) {
  envs::BalanceTask task(task_cfg);
  const auto success = [&](int dir, double omega, int trial) {
    envs::Perturbation push;
    push.theta = 2.0 * M_PI * dir / M;
    push.omega = omega;
    // One stream per probe keeps the start state independent of the
    // bisection path, so reruns are bit-exact.
    RngStream rng = substream(
        seed, "roa-probe",
        (static_cast<std::uint64_t>(dir) << 32) ^
            (static_cast<std::uint64_t>(std::llround(omega / resolution))
             << 8) ^
            static_cast<std::uint64_t>(trial));
    task.reset(rng);  // draws the start state
    Eigen::VectorXd obs = task.reset_to(task.state(), push);
    for (int t = 0; t < task.horizon(); ++t) {
      const rl::StepResult sr = task.step(rl::policy_mean(pi, obs));
      obs = sr.obs;
      if (sr.stop != rl::StopCause::running) break;
    }
    return envs::balance_success(task.state(), task_cfg.target);
  };
  return measure_roa_with(success, M, trials, resolution, omega_max, threshold);
}

AdaptiveResult train_adaptive(const ResidualPolicySpec& spec,
                              const AdaptiveConfig& cfg) {
  spec.validate();
  cfg.curriculum.validate();
  if (cfg.iterations < 0)
    throw std::invalid_argument("adaptive: negative iteration count");

  envs::BalanceTaskConfig tcfg = cfg.task;
  tcfg.mode = cfg.mode;
  tcfg.lqr_gain = spec.lqr_gain;
  tcfg.target = spec.target;
  tcfg.residual_bound = spec.residual_bound;
  envs::BalanceTask task(tcfg);

  rl::PpoConfig pcfg = cfg.ppo;
  pcfg.pi_hidden = spec.residual_hidden;
  pcfg.seed = cfg.seed;

  AdaptiveResult out;
  out.estimate = make_roa(cfg.curriculum.M, cfg.curriculum.omega0);
  RoAPolygon& roa = out.estimate;

  if (cfg.sampling == SamplingMode::adaptive) {
    task.set_push_sampler([&roa, &cfg](RngStream& rng) {
      return sample_perturbation(roa, cfg.curriculum, rng);
    });
  } else {
    // Fixed-range ablation; same two draws per episode as the adaptive path.
    task.set_push_sampler([&cfg](RngStream& rng) {
      envs::Perturbation p;
      p.theta = rng.uniform(0.0, 2.0 * M_PI);
      p.omega = rng.uniform(0.0, cfg.uniform_omega_max);
      return p;
    });
  }

  rl::PpoTrainer trainer(task, pcfg);
  for (int it = 0; it < cfg.iterations; ++it) {
    if (cfg.train_policy) {
      trainer.iterate();
    } else {
      RngStream rng = substream(cfg.seed, "fixed-roll", it);
      rl::run_policy_episodes(task, trainer.policy(), pcfg.batch_steps, rng);
    }
    for (const envs::BalanceEpisode& ep : task.drain_episodes())
      record_trial(roa, ep.push.theta, ep.success);
    for (int i = 0; i < roa.M(); ++i) {
      RoAHistoryRow row;
      row.iteration = it;
      row.direction = i;
      row.theta = roa.angle(i);
      row.omega = roa.omega[i];
      const long n = roa.n_good[i] + roa.n_bad[i];
      row.success_rate = n > 0 ? static_cast<double>(roa.n_good[i]) /
                                     static_cast<double>(n)
                               : -1.0;
      out.history.push_back(row);
    }
    if ((it + 1) % cfg.curriculum.update_period == 0)
      update_roa(roa, cfg.curriculum);
  }
  if (cfg.train_policy && pcfg.refit_epochs > 0) trainer.refit_value();
  out.policy = trainer.result();

  out.measured = measure_roa(out.policy.pi, tcfg, cfg.curriculum.M,
                             cfg.measure_trials, cfg.measure_resolution,
                             cfg.measure_omega_max,
                             substream(cfg.seed, "roa-measure").next_u64());
  return out;
}

}  // namespace recoverkit::curriculum
