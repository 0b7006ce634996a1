#include "recoverkit/rl/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "recoverkit/approx/optimizer.hpp"

namespace recoverkit::rl {

void PpoConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0))
    throw std::invalid_argument("ppo: gamma outside (0,1]");
  if (!(lam >= 0.0 && lam <= 1.0))
    throw std::invalid_argument("ppo: lambda outside [0,1]");
  if (!(clip > 0.0)) throw std::invalid_argument("ppo: clip must be positive");
  if (batch_steps < 1 || epochs < 1 || minibatch < 1)
    throw std::invalid_argument("ppo: batch sizes must be positive");
  if (!(pi_lr > 0.0) || !(v_lr > 0.0))
    throw std::invalid_argument("ppo: learning rates must be positive");
  if (iterations < 0 || refit_epochs < 0)
    throw std::invalid_argument("ppo: counts cannot be negative");
  if (ent_coef < 0.0)
    throw std::invalid_argument("ppo: entropy coefficient cannot be negative");
}

double ppo_value(const PpoResult& r,
                 const Eigen::Ref<const Eigen::VectorXd>& obs) {
  return approx::forward(r.v_spec, r.v_params, obs)[0];
}

void normalize_advantages(Eigen::VectorXd& adv) {
  if (adv.size() == 0) return;
  const double mean = adv.mean();
  const double var =
      (adv.array() - mean).square().sum() / static_cast<double>(adv.size());
  adv = (adv.array() - mean) / (std::sqrt(var) + 1e-8);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> gae_advantages(
    const Eigen::Ref<const Eigen::VectorXd>& rewards,
    const Eigen::Ref<const Eigen::VectorXd>& values, double bootstrap,
    double gamma, double lam) {
  const Eigen::Index T = rewards.size();
  if (values.size() != T)
    throw std::invalid_argument("gae: rewards and values length mismatch");
  Eigen::VectorXd adv(T), ret(T);
  double a_next = 0.0;
  for (Eigen::Index t = T - 1; t >= 0; --t) {
    const double v_next = t == T - 1 ? bootstrap : values[t + 1];
    const double delta = rewards[t] + gamma * v_next - values[t];
    a_next = delta + gamma * lam * a_next;
    adv[t] = a_next;
    ret[t] = a_next + values[t];
  }
  return {adv, ret};
}

namespace {

struct Batch {
  std::vector<Eigen::VectorXd> obs;
  std::vector<Eigen::VectorXd> act;
  std::vector<double> logp;
  Eigen::VectorXd adv;
  Eigen::VectorXd ret;      // advantage + value, the epoch regression target
  Eigen::VectorXd emp_ret;  // observed discounted return to go, no bootstrap
  std::vector<double> ep_returns;
  std::vector<int> ep_lens;

  int size() const { return static_cast<int>(obs.size()); }
};

// Whole episodes until at least cfg.batch_steps steps are on hand.
Batch collect(ControlTask& task, const GaussianPolicy& pi,
              const approx::NetSpec& v_spec, const approx::ParamVector& v_params,
              const PpoConfig& cfg, RngStream& rng) {
  Batch b;
  std::vector<double> adv_flat, ret_flat, emp_flat;
  while (static_cast<int>(b.obs.size()) < cfg.batch_steps) {
    std::vector<Eigen::VectorXd> eobs, eact;
    std::vector<double> elogp, erew;
    Eigen::VectorXd obs = task.reset(rng);
    Eigen::VectorXd last_obs;
    StopCause cause = StopCause::timeout;
    for (int t = 0; t < task.horizon(); ++t) {
      const Eigen::VectorXd mean = policy_mean(pi, obs);
      const Eigen::VectorXd a =
          mean + pi.log_std.array().exp().matrix().cwiseProduct(
                     rng.normal_vec(pi.act_dim()));
      const double lp = gaussian_log_prob(mean, pi.log_std, a);
      const StepResult sr = task.step(a);
      eobs.push_back(obs);
      eact.push_back(a);
      elogp.push_back(lp);
      erew.push_back(sr.reward);
      last_obs = sr.obs;
      if (sr.stop != StopCause::running) {
        cause = sr.stop;
        break;
      }
      obs = sr.obs;
    }
    const int T = static_cast<int>(eobs.size());
    Eigen::VectorXd vals(T);
    for (int t = 0; t < T; ++t)
      vals[t] = approx::forward(v_spec, v_params, eobs[t])[0];
    const double boot = cause == StopCause::timeout
                            ? approx::forward(v_spec, v_params, last_obs)[0]
                            : 0.0;
    const Eigen::VectorXd erew_v =
        Eigen::Map<const Eigen::VectorXd>(erew.data(), T);
    auto [eadv, eret] = gae_advantages(erew_v, vals, boot, cfg.gamma, cfg.lam);
    Eigen::VectorXd eemp(T);
    double g = 0.0, ep_ret = 0.0;
    for (int t = T - 1; t >= 0; --t) {
      g = erew[t] + cfg.gamma * g;
      eemp[t] = g;
      ep_ret += erew[t];
    }
    for (int t = 0; t < T; ++t) {
      b.obs.push_back(std::move(eobs[t]));
      b.act.push_back(std::move(eact[t]));
      b.logp.push_back(elogp[t]);
      adv_flat.push_back(eadv[t]);
      ret_flat.push_back(eret[t]);
      emp_flat.push_back(eemp[t]);
    }
    b.ep_returns.push_back(ep_ret);
    b.ep_lens.push_back(T);
  }
  const auto n = static_cast<Eigen::Index>(adv_flat.size());
  b.adv = Eigen::Map<Eigen::VectorXd>(adv_flat.data(), n);
  b.ret = Eigen::Map<Eigen::VectorXd>(ret_flat.data(), n);
  b.emp_ret = Eigen::Map<Eigen::VectorXd>(emp_flat.data(), n);
  return b;
}

void shuffle_indices(std::vector<int>& idx, RngStream& rng) {
  for (int i = static_cast<int>(idx.size()) - 1; i > 0; --i)
    std::swap(idx[i], idx[rng.uniform_int(i + 1)]);
}

}  // namespace

PpoTrainer::PpoTrainer(ControlTask& task, const PpoConfig& cfg)
    : PpoTrainer(task, cfg,
                 make_policy(task.obs_dim(), task.act_dim(), cfg.pi_hidden,
                             cfg.init_log_std,
                             substream(cfg.seed, "ppo-pi-init").next_u64()),
                 approx::NetSpec{}, approx::ParamVector{}) {
  v_spec_.input_dim = task.obs_dim();
  v_spec_.hidden = cfg.v_hidden;
  v_spec_.output_dim = 1;
  v_spec_.output = approx::OutputActivation::linear;
  v_spec_.seed = substream(cfg.seed, "ppo-v-init").next_u64();
  v_params_ = approx::init_params(v_spec_);
}

PpoTrainer::PpoTrainer(ControlTask& task, const PpoConfig& cfg,
                       GaussianPolicy pi, approx::NetSpec v_spec,
                       approx::ParamVector v_params)
    : task_(task),
      cfg_(cfg),
      pi_(std::move(pi)),
      v_spec_(std::move(v_spec)),
      v_params_(std::move(v_params)),
      opt_mean_(approx::make_adam(cfg.pi_lr)),
      opt_logstd_(approx::make_adam(cfg.pi_lr)),
      opt_v_(approx::make_adam(cfg.v_lr)) {
  cfg_.validate();
}

PpoIterRow PpoTrainer::iterate() {
  RngStream roll = substream(cfg_.seed, "ppo-roll", iter_);
  Batch b = collect(task_, pi_, v_spec_, v_params_, cfg_, roll);
  total_steps_ += b.size();
  if (cfg_.normalize_adv) normalize_advantages(b.adv);

  RngStream perm = substream(cfg_.seed, "ppo-perm", iter_);
  std::vector<int> idx(b.size());
  for (int i = 0; i < b.size(); ++i) idx[i] = i;

  approx::ForwardTrace trace;
  double pi_loss_sum = 0.0, v_loss_sum = 0.0;
  long loss_n = 0;
  for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
    shuffle_indices(idx, perm);
    for (int start = 0; start < b.size(); start += cfg_.minibatch) {
      const int m = std::min(cfg_.minibatch, b.size() - start);
      approx::ParamVector g_mean = approx::ParamVector::Zero(pi_.mean_params.size());
      Eigen::VectorXd g_logstd = Eigen::VectorXd::Zero(pi_.act_dim());
      approx::ParamVector g_v = approx::ParamVector::Zero(v_params_.size());
      for (int k = 0; k < m; ++k) {
        const int i = idx[start + k];
        const Eigen::VectorXd mean =
            approx::forward(pi_.mean_spec, pi_.mean_params, b.obs[i], trace);
        const double lp = gaussian_log_prob(mean, pi_.log_std, b.act[i]);
        const double ratio = std::exp(lp - b.logp[i]);
        const double rc = std::clamp(ratio, 1.0 - cfg_.clip, 1.0 + cfg_.clip);
        const double surr1 = ratio * b.adv[i];
        const double surr2 = rc * b.adv[i];
        pi_loss_sum += std::min(surr1, surr2);
        ++loss_n;
        if (surr1 <= surr2) {
          const double coef = b.adv[i] * ratio / static_cast<double>(m);
          Eigen::VectorXd up(pi_.act_dim());
          for (int j = 0; j < pi_.act_dim(); ++j) {
            const double inv_var = std::exp(-2.0 * pi_.log_std[j]);
            const double dm = b.act[i][j] - mean[j];
            up[j] = coef * dm * inv_var;
            g_logstd[j] += coef * (dm * dm * inv_var - 1.0);
          }
          approx::backprop(pi_.mean_spec, pi_.mean_params, trace, up, &g_mean,
                           nullptr);
        }
        // d entropy / d log_std_j = 1
        g_logstd.array() += cfg_.ent_coef / static_cast<double>(m);

        const double v = approx::forward(v_spec_, v_params_, b.obs[i], trace)[0];
        const double e = v - b.ret[i];
        v_loss_sum += e * e;
        Eigen::VectorXd upv(1);
        upv << 2.0 * e / static_cast<double>(m);
        approx::backprop(v_spec_, v_params_, trace, upv, &g_v, nullptr);
      }
      approx::optimizer_step(opt_mean_, pi_.mean_params, g_mean, /*ascend=*/true);
      approx::optimizer_step(opt_logstd_, pi_.log_std, g_logstd, /*ascend=*/true);
      approx::optimizer_step(opt_v_, v_params_, g_v);
    }
  }

  PpoIterRow row;
  row.iter = iter_;
  row.steps = total_steps_;
  double ret_sum = 0.0;
  long len_sum = 0;
  for (double r : b.ep_returns) ret_sum += r;
  for (int l : b.ep_lens) len_sum += l;
  row.mean_return = ret_sum / static_cast<double>(b.ep_returns.size());
  row.mean_len =
      static_cast<double>(len_sum) / static_cast<double>(b.ep_lens.size());
  row.pi_loss = pi_loss_sum / static_cast<double>(loss_n);
  row.v_loss = v_loss_sum / static_cast<double>(loss_n);
  row.entropy = policy_entropy(pi_);
  history_.push_back(row);
  ++iter_;
  return row;
}

void PpoTrainer::refit_value() {
  // The value net downstream consumers read must describe the final
  // policy, so fit it to fresh rollouts' observed returns.
  RngStream roll = substream(cfg_.seed, "ppo-refit-roll", iter_);
  Batch b = collect(task_, pi_, v_spec_, v_params_, cfg_, roll);
  total_steps_ += b.size();
  RngStream perm = substream(cfg_.seed, "ppo-refit-perm", iter_);
  std::vector<int> idx(b.size());
  for (int i = 0; i < b.size(); ++i) idx[i] = i;
  auto opt = approx::make_adam(cfg_.v_lr);
  approx::ForwardTrace trace;
  for (int epoch = 0; epoch < cfg_.refit_epochs; ++epoch) {
    shuffle_indices(idx, perm);
    for (int start = 0; start < b.size(); start += cfg_.minibatch) {
      const int m = std::min(cfg_.minibatch, b.size() - start);
      approx::ParamVector g_v = approx::ParamVector::Zero(v_params_.size());
      for (int k = 0; k < m; ++k) {
        const int i = idx[start + k];
        const double v = approx::forward(v_spec_, v_params_, b.obs[i], trace)[0];
        Eigen::VectorXd upv(1);
        upv << 2.0 * (v - b.emp_ret[i]) / static_cast<double>(m);
        approx::backprop(v_spec_, v_params_, trace, upv, &g_v, nullptr);
      }
      approx::optimizer_step(opt, v_params_, g_v);
    }
  }
}

PpoResult PpoTrainer::result() const {
  PpoResult out;
  out.pi = pi_;
  out.v_spec = v_spec_;
  out.v_params = v_params_;
  out.history = history_;
  out.total_steps = total_steps_;
  return out;
}

long run_policy_episodes(ControlTask& task, const GaussianPolicy& pi,
                         int steps, RngStream& rng) {
  long done = 0;
  while (done < steps) {
    Eigen::VectorXd obs = task.reset(rng);
    for (int t = 0; t < task.horizon(); ++t) {
      const StepResult sr = task.step(policy_mean(pi, obs));
      ++done;
      if (sr.stop != StopCause::running) break;
      obs = sr.obs;
    }
  }
  return done;
}

PpoResult ppo_train(ControlTask& task, const PpoConfig& cfg) {
  cfg.validate();
  PpoTrainer trainer(task, cfg);
  if (cfg.iterations == 0) return trainer.result();
  for (int iter = 0; iter < cfg.iterations; ++iter) {
    const PpoIterRow row = trainer.iterate();
    if (!std::isnan(cfg.stop_return) && row.mean_return > cfg.stop_return)
      break;
  }
  if (cfg.refit_epochs > 0) trainer.refit_value();
  return trainer.result();
}

}  // namespace recoverkit::rl
