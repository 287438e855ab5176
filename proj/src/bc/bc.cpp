#include "eil/bc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <thread>

#include "eil/autodiff.hpp"
#include "eil/error.hpp"
#include "eil/rng.hpp"

namespace eil {

std::vector<double> Policy::act(const std::vector<double>& observation) const {
  const Matrix x(1, d_obs, obs_norm.apply(observation));
  const Matrix y = nn::forward(net, x);
  std::vector<double> a(d_out);
  for (std::size_t c = 0; c < d_out; ++c) a[c] = y(0, c) * act_scale[c] + act_shift[c];
  return a;
}

int Policy::category(const std::vector<double>& observation) const {
  const auto logits = act(observation);
  return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

void BcConfig::validate() const {
  if (hidden == 0) throw UsageError("hidden size must be positive");
  if (!(learning_rate > 0.0)) throw UsageError("learning_rate must be > 0");
  if (momentum < 0.0 || momentum >= 1.0) throw UsageError("momentum must be in [0, 1)");
  if (n_steps < 0) throw UsageError("n_steps must be >= 0");
}

namespace {

struct Samples {
  Matrix obs;
  Matrix targets;  // standardized actions, or one-hot rows
  std::vector<int> categories;
};

Samples stack(const Dataset& data, const Policy& p) {
  std::size_t n = 0;
  for (const auto& t : data.trajectories) n += t.size();
  if (n == 0) throw UsageError("behavior cloning needs at least one frame");
  Samples s{Matrix(n, p.d_obs), Matrix(n, p.d_out, 0.0), {}};
  std::size_t r = 0;
  for (const auto& t : data.trajectories) {
    for (const auto& f : t.frames) {
      for (std::size_t c = 0; c < p.d_obs; ++c) s.obs(r, c) = f.observation[c];
      if (p.action_kind == ActionKind::continuous) {
        for (std::size_t c = 0; c < p.d_out; ++c) s.targets(r, c) = f.action[c];
      } else {
        s.targets(r, static_cast<std::size_t>(f.category)) = 1.0;
        s.categories.push_back(f.category);
      }
      ++r;
    }
  }
  return s;
}

Policy blank_policy(const Dataset& data, const BcConfig& cfg, Rng& rng) {
  Policy p;
  p.action_kind = data.action_kind;
  p.d_obs = data.d_obs;
  p.d_out = data.d_act;
  p.net = nn::make_mlp({p.d_obs, cfg.hidden, cfg.hidden, p.d_out}, nn::Output::linear, rng);
  return p;
}

ad::Var batch_loss(ad::Tape& tape, const nn::MlpVars& vars, const Policy& p, const Matrix& x,
                   const Matrix& y) {
  const ad::Var out = nn::forward(tape, vars, p.net, tape.constant(x));
  const ad::Var target = tape.constant(y);
  if (p.action_kind == ActionKind::continuous) {
    // Mean over samples of the squared l2 error.
    const ad::Var se = tape.row_sum(tape.square(tape.sub(out, target)));
    return tape.mean(se);
  }
  const ad::Var nll = tape.row_sum(tape.mul(tape.log_softmax_rows(out), target));
  return tape.scale(tape.mean(nll), -1.0);
}

Matrix gather(const Matrix& m, const std::vector<std::size_t>& rows) {
  Matrix out(rows.size(), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) std::copy(m.row(rows[r]).begin(), m.row(rows[r]).end(), out.row(r).begin());
  return out;
}

}  // namespace

BcResult train_bc(const Dataset& data, const BcConfig& cfg) {
  cfg.validate();
  Rng rng(mix_seed(cfg.seed, 0xbc));
  BcResult result;
  Policy& p = result.policy;
  p = blank_policy(data, cfg, rng);

  Samples s = stack(data, p);
  p.obs_norm = nn::Normalizer::fit(s.obs);
  if (p.action_kind == ActionKind::continuous) {
    const nn::Normalizer an = nn::Normalizer::fit(s.targets);
    p.act_shift = an.shift;
    p.act_scale.resize(p.d_out);
    for (std::size_t c = 0; c < p.d_out; ++c) p.act_scale[c] = 1.0 / an.scale[c];
    s.targets = an.apply(s.targets);
  } else {
    p.act_shift.assign(p.d_out, 0.0);
    p.act_scale.assign(p.d_out, 1.0);
  }
  const Matrix x_all = p.obs_norm.apply(s.obs);
  const std::size_t n = x_all.rows();
  const std::size_t batch = cfg.batch_size == 0 || cfg.batch_size >= n ? n : cfg.batch_size;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = n;
  nn::Momentum opt(cfg.learning_rate, cfg.momentum);

  for (int step = 0; step < cfg.n_steps; ++step) {
    Matrix xb, yb;
    if (batch == n) {
      xb = x_all;
      yb = s.targets;
    } else {
      if (cursor + batch > n) {
        for (std::size_t i = n; i > 1; --i) {
          std::swap(order[i - 1], order[static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(i) - 1))]);
        }
        cursor = 0;
      }
      const std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(cursor),
                                          order.begin() + static_cast<std::ptrdiff_t>(cursor + batch));
      cursor += batch;
      xb = gather(x_all, rows);
      yb = gather(s.targets, rows);
    }
    ad::Tape tape;
    const nn::MlpVars vars = nn::bind(tape, p.net);
    const ad::Var loss = batch_loss(tape, vars, p, xb, yb);
    const double value = tape.scalar(loss);
    if (!std::isfinite(value)) throw NumericalError("behavior cloning diverged at step " + std::to_string(step));
    tape.backward(loss);
    const nn::Mlp g = nn::gradients(tape, vars, p.net);
    std::vector<Matrix*> params;
    nn::append_tensors(p.net, params);
    std::vector<const Matrix*> grads;
    nn::append_tensors(g, grads);
    opt.step(params, grads);
    result.loss_curve.push_back(value);
  }
  return result;
}

double bc_loss(const Policy& policy, const Dataset& data) {
  Samples s = stack(data, policy);
  if (policy.action_kind == ActionKind::continuous) {
    nn::Normalizer an{policy.act_shift, std::vector<double>(policy.d_out)};
    for (std::size_t c = 0; c < policy.d_out; ++c) an.scale[c] = 1.0 / policy.act_scale[c];
    s.targets = an.apply(s.targets);
  }
  ad::Tape tape;
  const nn::MlpVars vars = nn::bind(tape, policy.net);
  return tape.scalar(batch_loss(tape, vars, policy, policy.obs_norm.apply(s.obs), s.targets));
}

Controller as_controller(const Policy& policy) {
  if (policy.action_kind != ActionKind::continuous || policy.d_out != kActionDim) {
    throw UsageError("only continuous 2-D policies can drive the toy environments");
  }
  return [policy](const EnvSpec& spec, const EnvState& s) {
    const auto a = policy.act(observe(spec, s));
    return clamp_norm({a[0], a[1]}, spec.action_scale);
  };
}

Controller expert_controller() {
  return [](const EnvSpec& spec, const EnvState& s) { return expert_action(spec, s); };
}

std::uint64_t evaluation_seed(std::uint64_t seed, std::size_t trial) {
  return mix_seed(mix_seed(seed, 0xe7a1ULL), trial);
}

EvalReport evaluate(const Controller& controller, const EnvSpec& spec, std::size_t n_trials,
                    std::uint64_t seed, unsigned threads) {
  spec.validate();
  EvalReport report;
  report.trials.resize(n_trials);
  auto run = [&](std::size_t trial) {
    TrialOutcome o;
    o.reset_seed = evaluation_seed(seed, trial);
    EnvState s = reset(spec, o.reset_seed);
    auto check = is_success(spec, s);
    o.min_distance = check.distance;
    o.success = check.success;
    while (!o.success && s.t < spec.max_steps) {
      s = step(spec, s, controller(spec, s));
      check = is_success(spec, s);
      o.min_distance = std::min(o.min_distance, check.distance);
      o.success = check.success;
    }
    o.steps = s.t;
    report.trials[trial] = o;
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n_trials)));
  if (workers <= 1) {
    for (std::size_t t = 0; t < n_trials; ++t) run(t);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t t = w; t < n_trials; t += workers) run(t);
      });
    }
  }
  std::size_t wins = 0;
  double dist = 0.0;
  for (const auto& o : report.trials) {
    wins += o.success ? 1 : 0;
    dist += o.min_distance;
  }
  if (n_trials > 0) {
    report.success_rate = static_cast<double>(wins) / static_cast<double>(n_trials);
    report.mean_min_distance = dist / static_cast<double>(n_trials);
  }
  return report;
}

void save_policy(const Policy& policy, const std::filesystem::path& path) {
  nn::WeightFile f;
  f.kind = "policy";
  f.meta["action_kind"] = policy.action_kind == ActionKind::continuous ? "continuous" : "discrete";
  f.meta["d_obs"] = policy.d_obs;
  f.meta["d_out"] = policy.d_out;
  f.meta["layers"] = policy.net.layers.size();
  f.meta["obs_norm"] = nn::to_json(policy.obs_norm);
  f.meta["act_shift"] = policy.act_shift;
  f.meta["act_scale"] = policy.act_scale;
  nn::add_mlp(f, "net", policy.net);
  nn::save_weights(f, path);
}

Policy load_policy(const std::filesystem::path& path) {
  const nn::WeightFile f = nn::load_weights(path);
  if (f.kind != "policy") throw DataError(path.string() + ": expected a policy checkpoint, got '" + f.kind + "'");
  try {
    Policy p;
    p.action_kind = f.meta.at("action_kind").get<std::string>() == "discrete" ? ActionKind::discrete
                                                                               : ActionKind::continuous;
    p.d_obs = f.meta.at("d_obs").get<std::size_t>();
    p.d_out = f.meta.at("d_out").get<std::size_t>();
    p.obs_norm = nn::normalizer_from_json(f.meta.at("obs_norm"));
    p.act_shift = f.meta.at("act_shift").get<std::vector<double>>();
    p.act_scale = f.meta.at("act_scale").get<std::vector<double>>();
    p.net = nn::read_mlp(f, "net", f.meta.at("layers").get<std::size_t>(), nn::Output::linear);
    if (p.net.in() != p.d_obs || p.net.out() != p.d_out || p.obs_norm.dim() != p.d_obs ||
        p.act_shift.size() != p.d_out || p.act_scale.size() != p.d_out) {
      throw DataError(path.string() + ": policy shapes are inconsistent");
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": bad policy metadata: " + e.what());
  }
}

void save_eval_table(const EvalReport& report, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << "reset_seed\tsuccess\tmin_distance\tsteps\n";
  char buf[128];
  for (const auto& t : report.trials) {
    std::snprintf(buf, sizeof buf, "%llu\t%d\t%.17g\t%d\n", static_cast<unsigned long long>(t.reset_seed),
                  t.success ? 1 : 0, t.min_distance, t.steps);
    out << buf;
  }
}

}  // namespace eil
