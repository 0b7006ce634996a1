#include "recoverkit/curriculum/roa.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace recoverkit::curriculum {

RoAPolygon make_roa(int M, double omega0) {
  if (M < 3) throw std::invalid_argument("roa: needs at least 3 directions");
  if (omega0 < 0.0) throw std::invalid_argument("roa: negative magnitude");
  RoAPolygon r;
  r.omega = Eigen::VectorXd::Constant(M, omega0);
  r.n_good.assign(M, 0);
  r.n_bad.assign(M, 0);
  return r;
}

void CurriculumConfig::validate() const {
  if (M < 3) throw std::invalid_argument("curriculum: M < 3");
  if (omega0 < 0.0) throw std::invalid_argument("curriculum: omega0 < 0");
  if (update_period < 1)
    throw std::invalid_argument("curriculum: update period < 1");
  if (!(k_l <= 1.0 && 1.0 <= k_u))
    throw std::invalid_argument("curriculum: band must straddle 1");
  if (!(success_threshold > 0.0 && success_threshold < 1.0))
    throw std::invalid_argument("curriculum: threshold outside (0,1)");
  if (!(alpha_min <= 1.0 && 1.0 <= alpha_max) || alpha_min < 0.0)
    throw std::invalid_argument("curriculum: rates must straddle 1");
}

double f_alpha(const CurriculumConfig& cfg, double success_rate) {
  const double s = std::clamp(success_rate, 0.0, 1.0);
  const double th = cfg.success_threshold;
  if (s <= th) return cfg.alpha_min + (1.0 - cfg.alpha_min) * (s / th);
  return 1.0 + (cfg.alpha_max - 1.0) * (s - th) / (1.0 - th);
}

double roa_magnitude(const RoAPolygon& roa, double theta) {
  const int M = roa.M();
  const double step = 2.0 * M_PI / M;
  double t = std::fmod(theta, 2.0 * M_PI);
  if (t < 0.0) t += 2.0 * M_PI;
  const int i = std::min(static_cast<int>(t / step), M - 1);
  const double frac = (t - i * step) / step;
  return (1.0 - frac) * roa.omega[i] + frac * roa.omega[(i + 1) % M];
}

envs::Perturbation sample_perturbation(const RoAPolygon& roa,
                                       const CurriculumConfig& cfg,
                                       RngStream& rng) {
  envs::Perturbation p;
  p.theta = rng.uniform(0.0, 2.0 * M_PI);
  const double f = roa_magnitude(roa, p.theta);
  p.omega = rng.uniform(cfg.k_l * f, cfg.k_u * f);
  return p;
}

void record_trial(RoAPolygon& roa, double theta, bool success) {
  const int M = roa.M();
  const double step = 2.0 * M_PI / M;
  double t = std::fmod(theta, 2.0 * M_PI);
  if (t < 0.0) t += 2.0 * M_PI;
  const int i = static_cast<int>(std::lround(t / step)) % M;
  if (success)
    ++roa.n_good[i];
  else
    ++roa.n_bad[i];
}

void update_roa(RoAPolygon& roa, const CurriculumConfig& cfg) {
  for (int i = 0; i < roa.M(); ++i) {
    const long n = roa.n_good[i] + roa.n_bad[i];
    if (n > 0) {
      const double rate =
          static_cast<double>(roa.n_good[i]) / static_cast<double>(n);
      roa.omega[i] *= f_alpha(cfg, rate);
    }
    roa.n_good[i] = 0;
    roa.n_bad[i] = 0;
  }
}

double roa_area(const RoAPolygon& roa) {
  const int M = roa.M();
  double twice = 0.0;
  for (int i = 0; i < M; ++i) {
    const int j = (i + 1) % M;
    const double xi = roa.omega[i] * std::cos(roa.angle(i));
    const double yi = roa.omega[i] * std::sin(roa.angle(i));
    const double xj = roa.omega[j] * std::cos(roa.angle(j));
    const double yj = roa.omega[j] * std::sin(roa.angle(j));
    twice += xi * yj - xj * yi;
  }
  return 0.5 * std::abs(twice);
}

}  // namespace recoverkit::curriculum
