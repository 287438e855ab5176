#include "eil/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>

#include "eil/error.hpp"
#include "eil/rng.hpp"

namespace eil {

void NoiseSpec::validate() const {
  if (n_spans_min < 0 || n_spans_max < n_spans_min) throw UsageError("invalid n_spans range");
  if (span_len_min < 1 || span_len_max < span_len_min) throw UsageError("invalid span_len range");
  if (target_extraneous_fraction >= 0.5) {
    throw UsageError("target extraneous fraction must be below 0.5");
  }
  if (!(detour_min_distance > 0.0) || !(return_radius > 0.0)) {
    throw UsageError("detour distances must be positive");
  }
  if (candidates < 1 || max_attempts < candidates) throw UsageError("invalid candidate counts");
}

std::uint64_t trajectory_seed(std::uint64_t seed, std::size_t index) { return mix_seed(seed, index); }

std::string trajectory_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "traj_%03zu", index);
  return buf;
}

namespace {

struct Recorder {
  const EnvSpec& spec;
  Trajectory traj;
  EnvState state;

  void record(Vec2 action, bool extraneous) {
    Frame f;
    f.observation = observe(spec, state);
    f.action = {action.x, action.y};
    traj.frames.push_back(std::move(f));
    traj.truth.extraneous.push_back(extraneous);
  }
  // Returns false once the step budget is spent.
  bool act(Vec2 action, bool extraneous) {
    if (state.t >= spec.max_steps) return false;
    record(action, extraneous);
    state = step(spec, state, action);
    return true;
  }
  void finish() {
    record(expert_action(spec, state), false);
    traj.truth.spans = spans_from_flags(traj.truth.extraneous);
  }
};

struct Plan {
  std::vector<int> insert_at;  // expert-step counts at which detours begin
  std::vector<int> lengths;
};

Dataset empty_dataset(const EnvSpec& spec) {
  Dataset d;
  d.env_name = std::string(env_name(spec.name));
  d.d_obs = observation_dim(spec);
  d.d_act = kActionDim;
  d.action_kind = ActionKind::continuous;
  return d;
}

std::optional<Vec2> sample_detour(const EnvSpec& spec, const NoiseSpec& noise, const EnvState& s,
                                  Rng& rng) {
  const Vec2 task_dir = expert_action(spec, s);
  for (int tries = 0; tries < 1000; ++tries) {
    const Vec2 p{rng.uniform(spec.workspace.lo.x, spec.workspace.hi.x),
                 rng.uniform(spec.workspace.lo.y, spec.workspace.hi.y)};
    if ((p - s.gripper).norm() < noise.detour_min_distance) continue;
    // Deviate away from the task: no component along the expert's heading.
    if ((p - s.gripper).dot(task_dir) > 0.0) continue;
    return p;
  }
  return std::nullopt;
}

// Rolls out the expert with detours spliced in per `plan`. Returns nullopt if
// the step budget runs out before success.
std::optional<Trajectory> rollout_with_detours(const EnvSpec& spec, const NoiseSpec& noise,
                                               std::uint64_t reset_seed, const Plan& plan,
                                               Rng& rng, const std::string& id) {
  Recorder rec{spec, {}, reset(spec, reset_seed)};
  rec.traj.id = id;
  rec.traj.truth.goal = {rec.state.goal.x, rec.state.goal.y};
  std::size_t next = 0;
  int expert_steps = 0;
  while (!is_success(spec, rec.state).success) {
    if (next < plan.insert_at.size() && expert_steps == plan.insert_at[next]) {
      const Vec2 pre_pos = rec.state.gripper;
      const double pre_dist = is_success(spec, rec.state).distance;
      const auto target = sample_detour(spec, noise, rec.state, rng);
      if (target) {
        for (int k = 0; k < plan.lengths[next]; ++k) {
          if (!rec.act(extraneous_action(spec, rec.state, *target), true)) return std::nullopt;
        }
        while ((rec.state.gripper - pre_pos).norm() >= noise.return_radius &&
               is_success(spec, rec.state).distance >= pre_dist) {
          if (!rec.act(expert_action(spec, rec.state), true)) return std::nullopt;
        }
      }
      ++next;
      continue;
    }
    if (!rec.act(expert_action(spec, rec.state), false)) return std::nullopt;
    ++expert_steps;
  }
  rec.finish();
  return std::move(rec.traj);
}

double fraction_of(const Trajectory& t) {
  std::size_t n = 0;
  for (bool b : t.truth.extraneous) n += b ? 1 : 0;
  return t.frames.empty() ? 0.0 : static_cast<double>(n) / static_cast<double>(t.frames.size());
}

}  // namespace

Trajectory expert_rollout(const EnvSpec& spec, std::uint64_t seed, std::string id) {
  Recorder rec{spec, {}, reset(spec, seed)};
  rec.traj.id = std::move(id);
  rec.traj.truth.goal = {rec.state.goal.x, rec.state.goal.y};
  while (!is_success(spec, rec.state).success) {
    if (!rec.act(expert_action(spec, rec.state), false)) {
      throw NumericalError("expert failed to reach the goal within " + std::to_string(spec.max_steps) +
                           " steps (reset seed " + std::to_string(seed) + ")");
    }
  }
  rec.finish();
  return std::move(rec.traj);
}

Dataset generate_perfect(const EnvSpec& spec, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw UsageError("k must be at least 2");
  spec.validate();
  Dataset d = empty_dataset(spec);
  for (std::size_t i = 0; i < k; ++i) {
    d.trajectories.push_back(expert_rollout(spec, trajectory_seed(seed, i), trajectory_id(i)));
  }
  return d;
}

Dataset generate_extraneous(const EnvSpec& spec, const NoiseSpec& noise, std::size_t k,
                            std::uint64_t seed) {
  if (k < 2) throw UsageError("k must be at least 2");
  spec.validate();
  noise.validate();
  if (noise.n_spans_max == 0) return generate_perfect(spec, k, seed);

  Dataset d = empty_dataset(spec);
  for (std::size_t i = 0; i < k; ++i) {
    const std::uint64_t reset_seed = trajectory_seed(seed, i);
    const Trajectory clean = expert_rollout(spec, reset_seed, trajectory_id(i));
    const int clean_steps = static_cast<int>(clean.frames.size()) - 1;

    std::optional<Trajectory> best;
    double best_gap = std::numeric_limits<double>::infinity();
    int accepted = 0;
    for (int attempt = 0; attempt < noise.max_attempts && accepted < noise.candidates; ++attempt) {
      Rng rng(mix_seed(reset_seed, 0xde7001ULL + static_cast<std::uint64_t>(attempt)));
      Plan plan;
      const int n = static_cast<int>(rng.integer(noise.n_spans_min, noise.n_spans_max));
      // Detours start strictly inside the clean rollout: after the first
      // expert step and before the last.
      std::vector<int> slots;
      for (int s = 1; s <= clean_steps - 2; ++s) slots.push_back(s);
      for (int j = 0; j < n && !slots.empty(); ++j) {
        const auto pick = static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(slots.size()) - 1));
        plan.insert_at.push_back(slots[pick]);
        slots.erase(slots.begin() + static_cast<std::ptrdiff_t>(pick));
      }
      std::sort(plan.insert_at.begin(), plan.insert_at.end());
      for (std::size_t j = 0; j < plan.insert_at.size(); ++j) {
        plan.lengths.push_back(static_cast<int>(rng.integer(noise.span_len_min, noise.span_len_max)));
      }

      auto traj = rollout_with_detours(spec, noise, reset_seed, plan, rng, trajectory_id(i));
      if (!traj) continue;
      const double frac = fraction_of(*traj);
      if (frac >= 0.5) continue;
      if (noise.n_spans_min > 0 && traj->truth.spans.empty()) continue;
      ++accepted;
      const double gap = noise.target_extraneous_fraction > 0.0
                             ? std::abs(frac - noise.target_extraneous_fraction)
                             : 0.0;
      if (gap < best_gap) {
        best_gap = gap;
        best = std::move(traj);
      }
    }
    if (!best) {
      throw NumericalError("could not generate trajectory " + std::to_string(i) +
                           " under the < 50% extraneous and success constraints (reset seed " +
                           std::to_string(reset_seed) + ")");
    }
    d.trajectories.push_back(std::move(*best));
  }
  return d;
}

double extraneous_fraction(const Dataset& dataset) {
  std::size_t ext = 0, total = 0;
  for (const auto& t : dataset.trajectories) {
    for (bool b : t.truth.extraneous) ext += b ? 1 : 0;
    total += t.frames.size();
  }
  return total == 0 ? 0.0 : static_cast<double>(ext) / static_cast<double>(total);
}

}  // namespace eil
