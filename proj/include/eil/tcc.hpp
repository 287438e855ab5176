#pragma once

// Temporal cycle-consistency between two embedding sequences U (length N)
// and V (length M): soft nearest neighbor of u_i in V, cycle back into U,
// and regress the expected return index toward i.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "eil/autodiff.hpp"
#include "eil/domain.hpp"
#include "eil/encoder.hpp"

namespace eil {

struct SoftNeighbor {
  std::vector<double> v_tilde;
  std::vector<double> alphas;
};

/// alpha_j = softmax_j(-||u - v_j||^2), v_tilde = sum_j alpha_j v_j.
SoftNeighbor soft_nearest_neighbor(std::span<const double> u, const Matrix& V);

struct CycleBack {
  std::vector<double> betas;
  double i_hat = 0.0;  // expected 0-based index
  double sigma = 0.0;  // variance of the index under betas
};

CycleBack cycle_back(std::span<const double> v_tilde, const Matrix& U);

struct CycleBackResult {
  std::vector<double> alphas;
  std::vector<double> v_tilde;
  std::vector<double> betas;
  double i_hat = 0.0;
  double sigma = 0.0;
};

/// Full forward cycle from anchor i of U through V and back.
CycleBackResult cycle_from(const Matrix& U, const Matrix& V, std::size_t i);

struct TccLossConfig {
  double lambda = 0.1;
  /// Power of the floored variance in the denominator of the regression term.
  int variance_exponent = 2;
  double sigma_floor = 1e-6;

  void validate() const;
};

/// Mean over anchors of |i - i_hat|^2 / max(sigma, floor)^p + lambda log max(sigma, floor).
double tcc_pair_loss(const Matrix& U, const Matrix& V, std::span<const std::size_t> anchors,
                     const TccLossConfig& cfg);
ad::Var tcc_pair_loss(ad::Tape& tape, ad::Var U, ad::Var V, const std::vector<std::size_t>& anchors,
                      const TccLossConfig& cfg);

/// Fraction of frames of U whose hard nearest neighbor in V maps back to
/// themselves; every argmin breaks ties toward the smaller index.
double cycle_consistency_rate(const Matrix& U, const Matrix& V);

enum class PairSampling { all_ordered_pairs, random_pairs };

struct TrainConfig {
  TccLossConfig loss{};
  double learning_rate = 3e-3;
  double momentum = 0.9;
  int n_steps = 5000;
  /// Cosine schedule from learning_rate down to learning_rate * final_lr_ratio;
  /// 1 keeps the rate constant.
  double final_lr_ratio = 1.0;
  PairSampling pair_sampling = PairSampling::random_pairs;
  /// Ordered pairs whose losses are averaged into one update.
  std::size_t pairs_per_step = 4;
  /// Anchors sampled per pair; 0 uses every frame of the first sequence.
  std::size_t frames_per_step = 0;
  /// Gradients are rescaled to at most this norm; 0 disables clipping.
  double max_grad_norm = 1.0;
  std::uint64_t seed = 1;

  void validate() const;
};

struct TrainLogEntry {
  int step = 0;
  double loss = 0.0;
  double heldout_cycle_rate = 0.0;
};

struct TrainResult {
  EncoderParams params;
  std::vector<TrainLogEntry> log;
  double initial_heldout_rate = 0.0;
  double final_heldout_rate = 0.0;
};

/// Trajectories used for training and the held-out pair scored in the log.
/// With four or more trajectories the last two are held out; otherwise the
/// first two are scored and everything trains.
struct TrainSplit {
  std::vector<std::size_t> train;
  std::size_t heldout_a = 0;
  std::size_t heldout_b = 1;
};
TrainSplit split_for_training(std::size_t k);

TrainResult train(const Dataset& data, const EncoderParams& init, const TrainConfig& cfg);

/// Tab-separated with a header row: step, loss, heldout_cycle_rate.
void save_train_log(const std::vector<TrainLogEntry>& log, const std::filesystem::path& path);

}  // namespace eil
