#ifndef RECOVERKIT_CURRICULUM_ROA_HPP
#define RECOVERKIT_CURRICULUM_ROA_HPP

#include <vector>

#include <Eigen/Core>

#include "recoverkit/envs/balancer.hpp"
#include "recoverkit/rng.hpp"

namespace recoverkit::curriculum {

// Polar polygon of recoverable push magnitudes. Vertex i sits at angle
// 2*pi*i/M; the per-direction counters accumulate trial outcomes between
// polygon updates.
struct RoAPolygon {
  Eigen::VectorXd omega;  // [N], one per direction, nonnegative
  std::vector<long> n_good;
  std::vector<long> n_bad;

  int M() const { return static_cast<int>(omega.size()); }
  double angle(int i) const { return 2.0 * M_PI * i / M(); }
};

RoAPolygon make_roa(int M, double omega0);

struct CurriculumConfig {
  int M = 8;
  double omega0 = 5.0;      // initial magnitude, every direction
  int update_period = 4;    // iterations between polygon updates
  double k_l = 0.8;         // sampling band below the polygon boundary
  double k_u = 1.1;         // and above it
  double success_threshold = 0.9;
  double alpha_min = 0.8;   // update rate at success rate 0
  double alpha_max = 1.1;   // update rate at success rate 1

  void validate() const;
};

// Success rate -> multiplicative magnitude update rate. Piecewise linear
// through (0, alpha_min), (threshold, 1), (1, alpha_max); the threshold is
// the exact no-change fixed point.
double f_alpha(const CurriculumConfig& cfg, double success_rate);

// Magnitude at an arbitrary angle: linear interpolation between the two
// adjacent vertices in polar form (linear in magnitude along the angle).
double roa_magnitude(const RoAPolygon& roa, double theta);

// theta uniform over [0, 2*pi), omega uniform in the band around the
// polygon boundary. Exactly two u64 draws, theta first.
envs::Perturbation sample_perturbation(const RoAPolygon& roa,
                                       const CurriculumConfig& cfg,
                                       RngStream& rng);

// Credits one finished trial to the direction nearest theta.
void record_trial(RoAPolygon& roa, double theta, bool success);

// Scales each direction with at least one recorded trial by
// f_alpha(success rate) and resets all counters.
void update_roa(RoAPolygon& roa, const CurriculumConfig& cfg);

// Shoelace area of the polygon [N^2].
double roa_area(const RoAPolygon& roa);

}  // namespace recoverkit::curriculum

#endif
