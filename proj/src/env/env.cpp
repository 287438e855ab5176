#include "eil/env.hpp"

#include <algorithm>

#include "eil/error.hpp"
#include "eil/rng.hpp"

namespace eil {

Vec2 Box::clamp(Vec2 p) const {
  return {std::clamp(p.x, lo.x, hi.x), std::clamp(p.y, lo.y, hi.y)};
}

EnvSpec EnvSpec::reach2d() { return EnvSpec{}; }

EnvSpec EnvSpec::push2d() {
  EnvSpec s;
  s.name = EnvName::push2d;
  s.max_steps = 150;
  s.action_scale = 0.025;
  s.gain = 0.2;
  return s;
}

void EnvSpec::validate() const {
  if (!(success_threshold > 0.0)) throw UsageError("success_threshold must be > 0");
  if (max_steps <= 0) throw UsageError("max_steps must be > 0");
  if (!(action_scale > 0.0)) throw UsageError("action_scale must be > 0");
  if (!(gain > 0.0 && gain <= 1.0)) throw UsageError("gain must be in (0, 1]");
  if (!(workspace.hi.x > workspace.lo.x && workspace.hi.y > workspace.lo.y)) {
    throw UsageError("workspace is degenerate");
  }
}

EnvName parse_env_name(std::string_view name) {
  if (name == "reach2d") return EnvName::reach2d;
  if (name == "push2d") return EnvName::push2d;
  throw UsageError("unknown environment '" + std::string(name) + "' (expected reach2d or push2d)");
}

std::string_view env_name(EnvName name) { return name == EnvName::reach2d ? "reach2d" : "push2d"; }

EnvSpec env_spec_for(std::string_view name) {
  return parse_env_name(name) == EnvName::reach2d ? EnvSpec::reach2d() : EnvSpec::push2d();
}

namespace {

Vec2 sample_point(const Box& box, Rng& rng) {
  return {rng.uniform(box.lo.x, box.hi.x), rng.uniform(box.lo.y, box.hi.y)};
}

Vec2 sample_away_from(const Box& box, Rng& rng, Vec2 from, double min_dist) {
  for (;;) {
    const Vec2 p = sample_point(box, rng);
    if ((p - from).norm() >= min_dist) return p;
  }
}

Vec2 steer(const EnvSpec& spec, Vec2 from, Vec2 to) {
  return clamp_norm((to - from) * spec.gain, spec.action_scale);
}

}  // namespace

Vec2 clamp_norm(Vec2 v, double max_norm) {
  const double n = v.norm();
  if (n <= max_norm || n == 0.0) return v;
  return v * (max_norm / n);
}

EnvState reset(const EnvSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(mix_seed(seed, 0x7e5e7));
  EnvState s;
  s.gripper = spec.workspace.center();
  if (spec.name == EnvName::reach2d) {
    s.goal = sample_away_from(spec.workspace, rng, s.gripper, spec.min_goal_separation);
    s.object = s.gripper;
  } else {
    s.object = sample_away_from(spec.workspace, rng, s.gripper, 2.0 * spec.contact_radius);
    s.goal = sample_away_from(spec.workspace, rng, s.object,
                              std::max(spec.min_goal_separation, spec.success_threshold));
  }
  s.t = 0;
  return s;
}

EnvState step(const EnvSpec& spec, const EnvState& state, Vec2 action) {
  if (state.t >= spec.max_steps) {
    throw UsageError("step called after the step budget of " + std::to_string(spec.max_steps));
  }
  const Vec2 a = clamp_norm(action, spec.action_scale);
  EnvState next = state;
  next.gripper = spec.workspace.clamp(state.gripper + a);
  if (spec.name == EnvName::push2d && (state.gripper - state.object).norm() < spec.contact_radius) {
    next.object = spec.workspace.clamp(state.object + (next.gripper - state.gripper));
  }
  next.t = state.t + 1;
  return next;
}

SuccessCheck is_success(const EnvSpec& spec, const EnvState& state) {
  const Vec2 mover = spec.name == EnvName::reach2d ? state.gripper : state.object;
  const double d = (state.goal - mover).norm();
  return {d < spec.success_threshold, d};
}

Vec2 expert_action(const EnvSpec& spec, const EnvState& state) {
  if (spec.name == EnvName::reach2d) return steer(spec, state.gripper, state.goal);
  if ((state.gripper - state.object).norm() >= spec.contact_radius) {
    return steer(spec, state.gripper, state.object);
  }
  // In contact: move so the object, which follows rigidly, lands on the goal.
  return clamp_norm((state.goal - state.object) * spec.gain, spec.action_scale);
}

Vec2 extraneous_action(const EnvSpec& spec, const EnvState& state, Vec2 detour_target) {
  return steer(spec, state.gripper, detour_target);
}

std::size_t observation_dim(const EnvSpec& spec) { return spec.name == EnvName::reach2d ? 4 : 6; }

std::vector<double> observe(const EnvSpec& spec, const EnvState& state) {
  if (spec.name == EnvName::reach2d) {
    return {state.gripper.x, state.gripper.y, state.goal.x - state.gripper.x, state.goal.y - state.gripper.y};
  }
  return {state.gripper.x,
          state.gripper.y,
          state.object.x - state.gripper.x,
          state.object.y - state.gripper.y,
          state.goal.x - state.object.x,
          state.goal.y - state.object.y};
}

}  // namespace eil
