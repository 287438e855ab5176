#include "eil/tcc.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <cstdio>
#include <fstream>

#include "eil/error.hpp"
#include "eil/kernels.hpp"
#include "eil/rng.hpp"

namespace eil {

namespace {

// Stable softmax of -d.
std::vector<double> softmax_neg(const std::vector<double>& d) {
  const double lo = *std::min_element(d.begin(), d.end());
  std::vector<double> w(d.size());
  double s = 0.0;
  for (std::size_t j = 0; j < d.size(); ++j) {
    w[j] = std::exp(lo - d[j]);
    s += w[j];
  }
  for (double& x : w) x /= s;
  return w;
}

std::vector<double> distances_to_rows(std::span<const double> q, const Matrix& rows) {
  if (q.size() != rows.cols()) throw UsageError("embedding dimension mismatch");
  std::vector<double> d(rows.rows());
  for (std::size_t j = 0; j < rows.rows(); ++j) d[j] = kernels::squared_distance(q, rows.row(j));
  return d;
}

}  // namespace

SoftNeighbor soft_nearest_neighbor(std::span<const double> u, const Matrix& V) {
  if (V.rows() == 0) throw UsageError("soft nearest neighbor over an empty sequence");
  SoftNeighbor out;
  out.alphas = softmax_neg(distances_to_rows(u, V));
  out.v_tilde.assign(V.cols(), 0.0);
  for (std::size_t j = 0; j < V.rows(); ++j) kernels::axpy(out.alphas[j], V.row(j), out.v_tilde);
  return out;
}

CycleBack cycle_back(std::span<const double> v_tilde, const Matrix& U) {
  if (U.rows() == 0) throw UsageError("cycle back into an empty sequence");
  CycleBack out;
  out.betas = softmax_neg(distances_to_rows(v_tilde, U));
  for (std::size_t k = 0; k < out.betas.size(); ++k) out.i_hat += out.betas[k] * static_cast<double>(k);
  for (std::size_t k = 0; k < out.betas.size(); ++k) {
    const double dk = static_cast<double>(k) - out.i_hat;
    out.sigma += out.betas[k] * dk * dk;
  }
  return out;
}

CycleBackResult cycle_from(const Matrix& U, const Matrix& V, std::size_t i) {
  if (i >= U.rows()) throw UsageError("anchor index out of range");
  SoftNeighbor sn = soft_nearest_neighbor(U.row(i), V);
  CycleBack cb = cycle_back(sn.v_tilde, U);
  return {std::move(sn.alphas), std::move(sn.v_tilde), std::move(cb.betas), cb.i_hat, cb.sigma};
}

void TccLossConfig::validate() const {
  if (!(lambda > 0.0)) throw UsageError("lambda must be > 0");
  if (variance_exponent != 1 && variance_exponent != 2) throw UsageError("variance_exponent must be 1 or 2");
  if (!(sigma_floor > 0.0)) throw UsageError("sigma floor must be > 0");
}

double tcc_pair_loss(const Matrix& U, const Matrix& V, std::span<const std::size_t> anchors,
                     const TccLossConfig& cfg) {
  cfg.validate();
  if (anchors.empty()) throw UsageError("no anchors");
  double total = 0.0;
  for (std::size_t i : anchors) {
    const CycleBackResult r = cycle_from(U, V, i);
    const double s = std::max(r.sigma, cfg.sigma_floor);
    const double err = (static_cast<double>(i) - r.i_hat) * (static_cast<double>(i) - r.i_hat);
    const double denom = cfg.variance_exponent == 2 ? s * s : s;
    total += err / denom + cfg.lambda * std::log(s);
  }
  return total / static_cast<double>(anchors.size());
}

ad::Var tcc_pair_loss(ad::Tape& tape, ad::Var U, ad::Var V, const std::vector<std::size_t>& anchors,
                      const TccLossConfig& cfg) {
  cfg.validate();
  if (anchors.empty()) throw UsageError("no anchors");
  const std::size_t n = tape.value(U).rows();
  const std::size_t na = anchors.size();

  Matrix index_col(n, 1);
  Matrix index_rows(na, n);
  Matrix anchor_col(na, 1);
  for (std::size_t k = 0; k < n; ++k) index_col(k, 0) = static_cast<double>(k);
  for (std::size_t a = 0; a < na; ++a) {
    anchor_col(a, 0) = static_cast<double>(anchors[a]);
    for (std::size_t k = 0; k < n; ++k) index_rows(a, k) = static_cast<double>(k);
  }

  const ad::Var ua = tape.select_rows(U, anchors);
  const ad::Var alphas = tape.softmax_rows(tape.scale(tape.pairwise_sqdist(ua, V), -1.0));
  const ad::Var v_tilde = tape.matmul(alphas, V);
  const ad::Var betas = tape.softmax_rows(tape.scale(tape.pairwise_sqdist(v_tilde, U), -1.0));
  const ad::Var i_hat = tape.matmul(betas, tape.constant(std::move(index_col)));
  const ad::Var centered = tape.sub_col(tape.constant(std::move(index_rows)), i_hat);
  const ad::Var sigma = tape.row_sum(tape.mul(betas, tape.square(centered)));
  const ad::Var s = tape.floor_at(sigma, cfg.sigma_floor);
  const ad::Var err = tape.square(tape.sub(tape.constant(std::move(anchor_col)), i_hat));
  const ad::Var denom = cfg.variance_exponent == 2 ? tape.square(s) : s;
  const ad::Var per_anchor = tape.add(tape.div(err, denom), tape.scale(tape.log(s), cfg.lambda));
  return tape.mean(per_anchor);
}

double cycle_consistency_rate(const Matrix& U, const Matrix& V) {
  if (U.rows() == 0 || V.rows() == 0) return 0.0;
  if (U.cols() != V.cols()) throw UsageError("embedding dimension mismatch");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < U.rows(); ++i) {
    const std::size_t j = kernels::nearest_row(U.data() + i * U.cols(), V.data(), V.rows(), V.cols());
    const std::size_t k = kernels::nearest_row(V.data() + j * V.cols(), U.data(), U.rows(), U.cols());
    hits += k == i ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(U.rows());
}

void TrainConfig::validate() const {
  loss.validate();
  if (!(learning_rate > 0.0)) throw UsageError("learning_rate must be > 0");
  if (momentum < 0.0 || momentum >= 1.0) throw UsageError("momentum must be in [0, 1)");
  if (n_steps < 0) throw UsageError("n_steps must be >= 0");
  if (max_grad_norm < 0.0) throw UsageError("max_grad_norm must be >= 0");
  if (pairs_per_step == 0) throw UsageError("pairs_per_step must be >= 1");
  if (final_lr_ratio < 0.0 || final_lr_ratio > 1.0) throw UsageError("final_lr_ratio must be in [0, 1]");
}

TrainSplit split_for_training(std::size_t k) {
  TrainSplit s;
  if (k >= 4) {
    for (std::size_t i = 0; i + 2 < k; ++i) s.train.push_back(i);
    s.heldout_a = k - 2;
    s.heldout_b = k - 1;
  } else {
    for (std::size_t i = 0; i < k; ++i) s.train.push_back(i);
  }
  return s;
}

namespace {

double heldout_rate(const EncoderParams& p, const Dataset& d, const TrainSplit& split) {
  const auto u = encode_sequence(p, d.trajectories[split.heldout_a]);
  const auto v = encode_sequence(p, d.trajectories[split.heldout_b]);
  return cycle_consistency_rate(u.vectors, v.vectors);
}

}  // namespace

TrainResult train(const Dataset& data, const EncoderParams& init, const TrainConfig& cfg) {
  cfg.validate();
  if (data.size() < 2) throw UsageError("training needs at least two trajectories");
  const TrainSplit split = split_for_training(data.size());

  TrainResult result;
  result.params = init;
  result.initial_heldout_rate = heldout_rate(init, data, split);
  result.final_heldout_rate = result.initial_heldout_rate;
  if (cfg.n_steps == 0) return result;

  std::vector<std::pair<std::size_t, std::size_t>> ordered_pairs;
  for (std::size_t a : split.train)
    for (std::size_t b : split.train)
      if (a != b) ordered_pairs.emplace_back(a, b);

  Rng rng(mix_seed(cfg.seed, 0x7cc));
  nn::Momentum opt(cfg.learning_rate, cfg.momentum);
  EncoderParams& params = result.params;

  for (int step = 0; step < cfg.n_steps; ++step) {
    const double progress = static_cast<double>(step) / static_cast<double>(cfg.n_steps);
    opt.set_learning_rate(cfg.learning_rate *
                          (cfg.final_lr_ratio + (1.0 - cfg.final_lr_ratio) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress))));
    struct Term {
      const Trajectory* a;
      const Trajectory* b;
      std::vector<std::size_t> anchors;
    };
    std::vector<Term> terms;
    for (std::size_t q = 0; q < cfg.pairs_per_step; ++q) {
      std::pair<std::size_t, std::size_t> pair;
      if (cfg.pair_sampling == PairSampling::all_ordered_pairs) {
        pair = ordered_pairs[(static_cast<std::size_t>(step) * cfg.pairs_per_step + q) % ordered_pairs.size()];
      } else {
        pair = ordered_pairs[static_cast<std::size_t>(
            rng.integer(0, static_cast<std::int64_t>(ordered_pairs.size()) - 1))];
      }
      Term t{&data.trajectories[pair.first], &data.trajectories[pair.second], {}};
      const std::size_t n = t.a->size();
      if (cfg.frames_per_step == 0 || cfg.frames_per_step >= n) {
        for (std::size_t i = 0; i < n; ++i) t.anchors.push_back(i);
      } else {
        for (std::size_t k = 0; k < cfg.frames_per_step; ++k) {
          t.anchors.push_back(static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(n) - 1)));
        }
      }
      terms.push_back(std::move(t));
    }

    EncoderGradient g;
    try {
      g = grad(params, [&](ad::Tape& tape, const EncoderVars& vars) {
        ad::Var total{};
        for (std::size_t q = 0; q < terms.size(); ++q) {
          const ad::Var u = encode_on_tape(tape, vars, params, terms[q].a->frames);
          const ad::Var v = encode_on_tape(tape, vars, params, terms[q].b->frames);
          const ad::Var l = tcc_pair_loss(tape, u, v, terms[q].anchors, cfg.loss);
          total = q == 0 ? l : tape.add(total, l);
        }
        return tape.scale(total, 1.0 / static_cast<double>(terms.size()));
      });
    } catch (const NumericalError&) {
      throw NumericalError("encoder training diverged at step " + std::to_string(step));
    }

    const EncoderParams& gc = g.grad;
    if (cfg.max_grad_norm > 0.0) {
      double sq = 0.0;
      for (const Matrix* m : gc.tensors())
        for (double v : m->values()) sq += v * v;
      const double norm = std::sqrt(sq);
      if (norm > cfg.max_grad_norm) {
        const double s = cfg.max_grad_norm / norm;
        for (Matrix* m : g.grad.tensors())
          for (double& v : m->values()) v *= s;
      }
    }
    opt.step(params.tensors(), gc.tensors());
    for (const Matrix* m : params.tensors()) {
      for (double v : m->values()) {
        if (!std::isfinite(v)) throw NumericalError("encoder training diverged at step " + std::to_string(step));
      }
    }
    result.log.push_back({step, g.loss, heldout_rate(params, data, split)});
  }
  result.final_heldout_rate = result.log.back().heldout_cycle_rate;
  return result;
}

void save_train_log(const std::vector<TrainLogEntry>& log, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << "step\tloss\theldout_cycle_rate\n";
  char buf[96];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof buf, "%d\t%.17g\t%.17g\n", e.step, e.loss, e.heldout_cycle_rate);
    out << buf;
  }
}

}  // namespace eil
