#pragma once

#include <cstddef>
#include <cstdint>

#include "eil/domain.hpp"
#include "eil/env.hpp"

namespace eil {

/// How detours are spliced into expert rollouts.
struct NoiseSpec {
  int n_spans_min = 1;
  int n_spans_max = 2;
  int span_len_min = 3;  // outbound detour steps
  int span_len_max = 10;
  /// Per-trajectory target; several plans are drawn and the one whose
  /// extraneous fraction is closest wins. <= 0 disables the preference.
  double target_extraneous_fraction = 0.28;
  double detour_min_distance = 0.2;
  /// Return frames stay extraneous until the gripper is back within this
  /// radius of its pre-detour position or the task distance drops below its
  /// pre-detour value.
  double return_radius = 0.02;
  int candidates = 8;
  int max_attempts = 256;

  void validate() const;
};

/// Expert rollout from reset(spec, seed) until the success state, which is
/// recorded as the final frame.
Trajectory expert_rollout(const EnvSpec& spec, std::uint64_t seed, std::string id);

Dataset generate_perfect(const EnvSpec& spec, std::size_t k, std::uint64_t seed);
Dataset generate_extraneous(const EnvSpec& spec, const NoiseSpec& noise, std::size_t k,
                            std::uint64_t seed);

/// Extraneous frames over all frames, from the ground-truth labels.
double extraneous_fraction(const Dataset& dataset);

/// Reset seed used for trajectory `index` of a dataset generated with `seed`.
std::uint64_t trajectory_seed(std::uint64_t seed, std::size_t index);
std::string trajectory_id(std::size_t index);

}  // namespace eil
