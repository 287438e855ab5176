#pragma once

// Behavior cloning from (possibly filtered) demonstrations and closed-loop
// evaluation in the toy environments.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "eil/domain.hpp"
#include "eil/env.hpp"
#include "eil/nn.hpp"

namespace eil {

struct Policy {
  ActionKind action_kind = ActionKind::continuous;
  std::size_t d_obs = 0;
  std::size_t d_out = 0;  // action dimension or number of categories
  nn::Normalizer obs_norm;
  /// Network output o maps to the action o * act_scale + act_shift.
  std::vector<double> act_shift;
  std::vector<double> act_scale;
  nn::Mlp net;  // d_obs -> 64 -> 64 -> d_out

  std::vector<double> act(const std::vector<double>& observation) const;
  /// Arg-max category of the logits (discrete policies).
  int category(const std::vector<double>& observation) const;
};

struct BcConfig {
  std::size_t hidden = 64;
  double learning_rate = 0.05;
  double momentum = 0.9;
  int n_steps = 2000;
  /// Minibatch size; 0 trains full-batch.
  std::size_t batch_size = 256;
  std::uint64_t seed = 1;

  void validate() const;
};

struct BcResult {
  Policy policy;
  std::vector<double> loss_curve;  // one entry per step
};

/// Mean squared error on standardized actions (continuous) or softmax
/// cross-entropy (discrete), minimized by minibatch momentum descent.
BcResult train_bc(const Dataset& data, const BcConfig& cfg);

/// Training loss of `policy` over every frame of `data`.
double bc_loss(const Policy& policy, const Dataset& data);

struct TrialOutcome {
  std::uint64_t reset_seed = 0;
  bool success = false;
  double min_distance = 0.0;
  int steps = 0;
};

struct EvalReport {
  double success_rate = 0.0;
  double mean_min_distance = 0.0;
  std::vector<TrialOutcome> trials;
};

using Controller = std::function<Vec2(const EnvSpec&, const EnvState&)>;

/// Closed-loop actions of a continuous policy, clamped to action_scale.
Controller as_controller(const Policy& policy);
Controller expert_controller();

/// Seed of evaluation episode `trial`; disjoint from dataset trajectory seeds.
std::uint64_t evaluation_seed(std::uint64_t seed, std::size_t trial);

/// Rolls out `n_trials` episodes of at most max_steps. An episode succeeds
/// if any visited state is a success; min_distance is over visited states.
EvalReport evaluate(const Controller& controller, const EnvSpec& spec, std::size_t n_trials,
                    std::uint64_t seed, unsigned threads = 1);

void save_policy(const Policy& policy, const std::filesystem::path& path);
Policy load_policy(const std::filesystem::path& path);

/// Columnar per-trial file: reset_seed success min_distance steps.
void save_eval_table(const EvalReport& report, const std::filesystem::path& path);

}  // namespace eil
