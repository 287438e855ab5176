#pragma once

// Toy 2-D goal-reaching tasks. reach2d moves a point gripper onto a goal;
// push2d drags an object onto the goal. Both are deterministic given the
// reset seed and the action sequence.

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace eil {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double norm() const { return std::sqrt(x * x + y * y); }
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

enum class EnvName { reach2d, push2d };

struct Box {
  Vec2 lo{0.0, 0.0};
  Vec2 hi{1.0, 1.0};

  Vec2 center() const { return (lo + hi) * 0.5; }
  Vec2 clamp(Vec2 p) const;
  bool contains(Vec2 p) const { return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y; }
};

struct EnvSpec {
  EnvName name = EnvName::reach2d;
  Box workspace{};
  double success_threshold = 0.05;
  int max_steps = 100;
  double action_scale = 0.012;  // max displacement per step
  double gain = 0.12;           // proportional controller gain
  double contact_radius = 0.03;  // push2d rigid drag radius
  double min_goal_separation = 0.2;

  static EnvSpec reach2d();
  static EnvSpec push2d();
  /// Throws UsageError on a non-positive threshold, step budget or scale, or
  /// a degenerate workspace.
  void validate() const;
};

EnvName parse_env_name(std::string_view name);
std::string_view env_name(EnvName name);
EnvSpec env_spec_for(std::string_view name);

struct EnvState {
  Vec2 gripper;
  Vec2 object;  // unused by reach2d
  Vec2 goal;
  int t = 0;

  friend bool operator==(const EnvState&, const EnvState&) = default;
};

struct SuccessCheck {
  bool success = false;
  double distance = 0.0;
};

/// Gripper at the workspace center; goal (and object) sampled uniformly in
/// the workspace, rejecting samples closer than min_goal_separation to the
/// thing that has to travel.
EnvState reset(const EnvSpec& spec, std::uint64_t seed);

/// Applies the action clamped to action_scale. Throws UsageError once
/// t == max_steps.
EnvState step(const EnvSpec& spec, const EnvState& state, Vec2 action);

/// Task distance is gripper-to-goal (reach2d) or object-to-goal (push2d);
/// success is strictly below the threshold.
SuccessCheck is_success(const EnvSpec& spec, const EnvState& state);

/// Clamped proportional controller toward the goal. In push2d it first
/// closes on the object, then carries it to the goal.
Vec2 expert_action(const EnvSpec& spec, const EnvState& state);

/// The same controller, steering the gripper toward `detour_target`.
Vec2 extraneous_action(const EnvSpec& spec, const EnvState& state, Vec2 detour_target);

Vec2 clamp_norm(Vec2 v, double max_norm);

std::vector<double> observe(const EnvSpec& spec, const EnvState& state);
std::size_t observation_dim(const EnvSpec& spec);
constexpr std::size_t kActionDim = 2;

}  // namespace eil
