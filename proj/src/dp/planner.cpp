#include "recoverkit/dp/planner.hpp"

#include <chrono>
#include <stdexcept>

namespace recoverkit::dp {

void GridSpec::validate() const {
  const int bins[] = {r1_bins,     theta1_bins, rdot1_bins, thetadot1_bins,
                      theta2_bins, delta_bins,  rdot_d_bins};
  for (int b : bins)
    if (b < 2) throw std::invalid_argument("grid: every bin count must be >= 2");
  if (depth < 1) throw std::invalid_argument("grid: depth must be >= 1");
}

std::vector<double> grid_points(double lo, double hi, int bins) {
  if (bins < 1 || !(hi > lo)) throw std::invalid_argument("grid_points: bad range");
  std::vector<double> pts(bins + 1);
  for (int i = 0; i <= bins; ++i)
    pts[i] = lo + (hi - lo) * static_cast<double>(i) / bins;
  return pts;
}

std::vector<envs::FallAction> action_menu(const envs::FallModelParams& mp,
                                          const GridSpec& g, int part) {
  if (part < 0 || part >= mp.n_parts())
    throw std::invalid_argument("action_menu: bad part index");
  const auto th2 = grid_points(mp.theta2_min, mp.theta2_max, g.theta2_bins);
  const auto del = grid_points(mp.parts[part].delta_min,
                               mp.parts[part].delta_max, g.delta_bins);
  const auto rd = grid_points(mp.rdot_d_min, mp.rdot_d_max, g.rdot_d_bins);
  std::vector<envs::FallAction> menu;
  menu.reserve(th2.size() * del.size() * rd.size());
  for (double a : th2)
    for (double b : del)
      for (double c : rd) menu.push_back({a, b, c});
  return menu;
}

bool state_in_bounds(const envs::FallModelParams& mp, const GridSpec& g,
                     const envs::FallState& s) {
  return s.r1 >= mp.r_min && s.r1 <= mp.r_max && s.theta1 >= g.theta1_min &&
         s.theta1 <= g.theta1_max && std::abs(s.rdot1) <= g.rdot1_abs_max &&
         s.thetadot1 >= 0.0 && s.thetadot1 <= g.thetadot1_max;
}

namespace {

struct Search {
  const ContactModel& model;
  const HaltPredicate& halted;
  const std::vector<std::vector<envs::FallAction>>& menus;
  long sims = 0;

  // Best min-composed value achievable from s with depth_left contacts.
  // First-found wins on ties, so visiting parts and menu entries in order
  // gives the lexicographic tie-break.
  PlanResult best_from(const envs::FallState& s, int depth_left) {
    PlanResult best;
    if (halted(s)) return best;  // arrested: empty plan, value 1.0
    best.value = 0.0;            // still falling with no search left
    if (depth_left == 0) return best;
    best.value = -1.0;  // below any achievable value: ties keep the first
                        // candidate, so even an all-zero level picks a step
    for (int part = 0; part < static_cast<int>(menus.size()); ++part) {
      for (const envs::FallAction& a : menus[part]) {
        envs::ContactResult res = model(s, part, a);
        ++sims;
        double v;
        PlanResult tail;
        if (res.halted) {
          // no further impacts possible: in-flight arrest carries reward 1,
          // an arresting catch or a slam carries its own contact reward
          v = res.reward;
        } else {
          tail = best_from(res.next, depth_left - 1);
          v = std::min(res.reward, tail.value);
        }
        if (v > best.value) {
          best.value = v;
          best.steps.clear();
          best.steps.push_back({part, a});
          best.impulses.clear();
          if (res.contact) best.impulses.push_back(res.j);
          best.steps.insert(best.steps.end(), tail.steps.begin(),
                            tail.steps.end());
          best.impulses.insert(best.impulses.end(), tail.impulses.begin(),
                               tail.impulses.end());
        }
      }
    }
    return best;
  }
};

}  // namespace

PlanResult plan_search(const ContactModel& model, const HaltPredicate& halted,
                       const ActionMenu& menu, int n_parts, int depth,
                       const envs::FallState& s0) {
  if (n_parts < 1 || depth < 1)
    throw std::invalid_argument("plan_search: need n_parts >= 1, depth >= 1");
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::vector<envs::FallAction>> menus(n_parts);
  std::size_t candidates = 0;
  for (int p = 0; p < n_parts; ++p) {
    menus[p] = menu(p);
    candidates += menus[p].size();
  }
  if (candidates == 0)
    throw std::invalid_argument("plan_search: empty action menu");
  Search search{model, halted, menus};
  PlanResult r = search.best_from(s0, depth);
  r.sims = search.sims;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                  .count();
  return r;
}

PlanResult dp_plan(const envs::FallModelParams& mp, const GridSpec& g,
                   const envs::FallState& s0) {
  g.validate();
  if (!envs::fall_is_halted(s0) && !state_in_bounds(mp, g, s0))
    throw std::invalid_argument("dp_plan: start state outside grid bounds");
  ContactModel model = [&mp](const envs::FallState& s, int part,
                             const envs::FallAction& a) {
    return envs::fall_simulate_to_next_contact(mp, s, part, a);
  };
  HaltPredicate halted = [](const envs::FallState& s) {
    return envs::fall_is_halted(s);
  };
  ActionMenu menu = [&mp, &g](int part) { return action_menu(mp, g, part); };
  return plan_search(model, halted, menu, mp.n_parts(), g.depth, s0);
}

std::vector<mace::ReplayTuple> seed_buffer(const envs::FallModelParams& mp,
                                           const GridSpec& g, int n,
                                           const envs::FallStartDist& init_dist,
                                           RngStream& rng,
                                           int max_contacts_per_rollout) {
  if (n < 0) throw std::invalid_argument("seed_buffer: negative count");
  std::vector<mace::ReplayTuple> out;
  for (int i = 0; i < n; ++i) {
    envs::FallState s = envs::sample_fall_start(mp, init_dist, rng);
    for (int k = 0; k < max_contacts_per_rollout; ++k) {
      if (envs::fall_is_halted(s)) break;
      if (!state_in_bounds(mp, g, s)) break;  // fell out of the planner's box
      PlanResult plan = dp_plan(mp, g, s);
      if (plan.steps.empty()) break;  // no action improves on doing nothing
      const PlanStep& step = plan.steps.front();
      envs::ContactResult res =
          envs::fall_simulate_to_next_contact(mp, s, step.part, step.action);
      out.push_back({s, step.action, res.next, res.reward, step.part,
                     res.halted});
      s = res.next;
      if (res.halted) break;
    }
  }
  return out;
}

}  // namespace recoverkit::dp
