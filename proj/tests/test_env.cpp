#include <doctest.h>

#include <cmath>

#include "eil/env.hpp"
#include "eil/error.hpp"
#include "eil/rng.hpp"

using namespace eil;

namespace {

EnvState run_expert(const EnvSpec& spec, std::uint64_t seed, bool& success) {
  EnvState s = reset(spec, seed);
  success = is_success(spec, s).success;
  while (!success && s.t < spec.max_steps) {
    s = step(spec, s, expert_action(spec, s));
    success = is_success(spec, s).success;
  }
  return s;
}

}  // namespace

TEST_CASE("reset is deterministic and seed dependent") {
  for (const EnvSpec& spec : {EnvSpec::reach2d(), EnvSpec::push2d()}) {
    CHECK(reset(spec, 5) == reset(spec, 5));
    CHECK_FALSE(reset(spec, 5).goal == reset(spec, 6).goal);
    const EnvState s = reset(spec, 11);
    CHECK(s.gripper == spec.workspace.center());
    CHECK(spec.workspace.contains(s.goal));
    CHECK(s.t == 0);
  }
}

TEST_CASE("push2d resets keep object and goal apart") {
  const EnvSpec spec = EnvSpec::push2d();
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    const EnvState s = reset(spec, seed);
    CHECK((s.goal - s.object).norm() >= spec.success_threshold);
    CHECK(spec.workspace.contains(s.object));
  }
}

TEST_CASE("step clamps, clips and counts") {
  const EnvSpec spec = EnvSpec::reach2d();
  EnvState s = reset(spec, 1);
  const EnvState z = step(spec, s, {0, 0});
  CHECK(z.gripper == s.gripper);
  CHECK(z.goal == s.goal);
  CHECK(z.t == 1);

  const EnvState far = step(spec, s, {3.0, 4.0});
  CHECK((far.gripper - s.gripper).norm() == doctest::Approx(spec.action_scale).epsilon(1e-12));

  EnvState edge = s;
  edge.gripper = {0.995, 0.5};
  CHECK(step(spec, edge, {0.01, 0}).gripper.x == 1.0);

  EnvState last = s;
  last.t = spec.max_steps;
  CHECK_THROWS_AS(step(spec, last, {0, 0}), UsageError);
}

TEST_CASE("an action of the exact goal offset succeeds next check") {
  const EnvSpec spec = EnvSpec::reach2d();
  EnvState s = reset(spec, 2);
  s.goal = s.gripper + Vec2{0.006, -0.008};
  const EnvState n = step(spec, s, s.goal - s.gripper);
  CHECK(is_success(spec, n).success);
}

TEST_CASE("success uses a strict threshold") {
  const EnvSpec spec = EnvSpec::reach2d();
  EnvState s = reset(spec, 3);
  s.gripper = s.goal;
  const SuccessCheck at = is_success(spec, s);
  CHECK(at.success);
  CHECK(at.distance == 0.0);
  s.gripper = s.goal + Vec2{0.05, 0.0};
  s.goal = {0.25, 0.5};
  s.gripper = {0.3, 0.5};
  CHECK(is_success(spec, s).distance == doctest::Approx(0.05));
  EnvState exact = s;
  exact.goal = {0.0, 0.0};
  exact.gripper = {0.03, 0.04};  // distance 0.05 exactly in binary: 0.03^2 + 0.04^2
  const double d = is_success(spec, exact).distance;
  CHECK(is_success(spec, exact).success == (d < 0.05));
  exact.gripper = {0.049, 0.0};
  CHECK(is_success(spec, exact).success);
  exact.gripper = {0.05, 0.0};
  CHECK_FALSE(is_success(spec, exact).success);
}

TEST_CASE("the expert solves every reset on a 10x10 grid of seeds") {
  for (const EnvSpec& spec : {EnvSpec::reach2d(), EnvSpec::push2d()}) {
    int worst = 0;
    for (std::uint64_t i = 0; i < 10; ++i) {
      for (std::uint64_t j = 0; j < 10; ++j) {
        bool ok = false;
        const EnvState end = run_expert(spec, i * 1000 + j, ok);
        CHECK(ok);
        worst = std::max(worst, end.t);
      }
    }
    if (spec.name == EnvName::reach2d) CHECK(worst <= 60);
  }
}

TEST_CASE("expert action properties in reach2d") {
  const EnvSpec spec = EnvSpec::reach2d();
  Rng rng(4);
  for (int n = 0; n < 200; ++n) {
    EnvState s = reset(spec, static_cast<std::uint64_t>(n));
    s.gripper = {rng.uniform(), rng.uniform()};
    const Vec2 a = expert_action(spec, s);
    CHECK(a.norm() <= spec.action_scale * (1 + 1e-12));
    CHECK(a.dot(s.goal - s.gripper) > 0.0);
  }
  EnvState at = reset(spec, 9);
  at.gripper = at.goal;
  CHECK(expert_action(spec, at) == Vec2{0, 0});
}

TEST_CASE("extraneous actions steer toward the detour target") {
  const EnvSpec spec = EnvSpec::reach2d();
  EnvState s = reset(spec, 8);
  CHECK(extraneous_action(spec, s, s.goal) == expert_action(spec, s));

  const Vec2 opposite = s.gripper - (s.goal - s.gripper) * 0.5;
  CHECK(extraneous_action(spec, s, opposite).dot(s.goal - s.gripper) < 0.0);

  const Vec2 target{0.1, 0.85};
  for (int i = 0; i < 250; ++i) {
    s.t = 0;
    s = step(spec, s, extraneous_action(spec, s, target));
  }
  CHECK((s.gripper - target).norm() < 1e-6);
}

TEST_CASE("environment validation and names") {
  EnvSpec bad = EnvSpec::reach2d();
  bad.success_threshold = 0.0;
  CHECK_THROWS_AS(bad.validate(), UsageError);
  bad = EnvSpec::reach2d();
  bad.workspace.hi = bad.workspace.lo;
  CHECK_THROWS_AS(bad.validate(), UsageError);
  CHECK(env_spec_for("push2d").name == EnvName::push2d);
  CHECK_THROWS_AS(env_spec_for("stir"), UsageError);
  CHECK(observation_dim(EnvSpec::reach2d()) == observe(EnvSpec::reach2d(), reset(EnvSpec::reach2d(), 1)).size());
  CHECK(observation_dim(EnvSpec::push2d()) == observe(EnvSpec::push2d(), reset(EnvSpec::push2d(), 1)).size());
}
