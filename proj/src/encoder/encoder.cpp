#include "eil/encoder.hpp"

#include <cmath>

#include "eil/error.hpp"
#include "eil/rng.hpp"

namespace eil {

void EncoderArch::validate() const {
  if (d_obs == 0 || d_act == 0 || hidden == 0 || e_obs == 0 || e_act == 0 || d_emb == 0) {
    throw UsageError("encoder dimensions must be positive");
  }
}

EncoderArch EncoderArch::for_dataset(const Dataset& d) {
  EncoderArch a;
  a.d_obs = d.d_obs;
  a.d_act = d.d_act;
  a.action_kind = d.action_kind;
  return a;
}

std::vector<Matrix*> EncoderParams::tensors() {
  std::vector<Matrix*> out;
  nn::append_tensors(psi_obs, out);
  nn::append_tensors(psi_act, out);
  nn::append_tensors(psi_joint, out);
  return out;
}

std::vector<const Matrix*> EncoderParams::tensors() const {
  std::vector<const Matrix*> out;
  nn::append_tensors(psi_obs, out);
  nn::append_tensors(psi_act, out);
  nn::append_tensors(psi_joint, out);
  return out;
}

EncoderParams init_params(const EncoderArch& arch, std::uint64_t seed) {
  arch.validate();
  Rng rng(mix_seed(seed, 0xe7c0de));
  EncoderParams p;
  p.arch = arch;
  p.obs_norm = nn::Normalizer::identity(arch.d_obs);
  p.act_norm = nn::Normalizer::identity(arch.d_act);
  p.psi_obs = nn::make_mlp({arch.d_obs, arch.hidden, arch.e_obs}, nn::Output::tanh, rng);
  p.psi_act = nn::make_mlp({arch.d_act, arch.hidden, arch.e_act}, nn::Output::tanh, rng);
  p.psi_joint = nn::make_mlp({arch.e_obs + arch.e_act, arch.hidden, arch.d_emb}, nn::Output::linear, rng);
  return p;
}

namespace {

void check_frame(const EncoderArch& arch, const Frame& f) {
  if (f.observation.size() != arch.d_obs) {
    throw UsageError("observation has dimension " + std::to_string(f.observation.size()) +
                     ", encoder expects " + std::to_string(arch.d_obs));
  }
  if (arch.action_kind == ActionKind::continuous) {
    if (f.action.size() != arch.d_act) {
      throw UsageError("action has dimension " + std::to_string(f.action.size()) + ", encoder expects " +
                       std::to_string(arch.d_act));
    }
  } else if (f.category < 0 || static_cast<std::size_t>(f.category) >= arch.d_act) {
    throw UsageError("action category out of range for the encoder");
  }
}

Matrix observation_matrix(const EncoderParams& p, std::span<const Frame> frames) {
  Matrix m(frames.size(), p.arch.d_obs);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    check_frame(p.arch, frames[i]);
    for (std::size_t c = 0; c < p.arch.d_obs; ++c) m(i, c) = frames[i].observation[c];
  }
  return p.obs_norm.apply(m);
}

Matrix action_matrix(const EncoderParams& p, std::span<const Frame> frames) {
  Matrix m(frames.size(), p.arch.d_act, 0.0);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (p.arch.action_kind == ActionKind::continuous) {
      for (std::size_t c = 0; c < p.arch.d_act; ++c) m(i, c) = frames[i].action[c];
    } else {
      m(i, static_cast<std::size_t>(frames[i].category)) = 1.0;
    }
  }
  return p.arch.action_kind == ActionKind::continuous ? p.act_norm.apply(m) : m;
}

Matrix concat(const Matrix& a, const Matrix& b) {
  Matrix y(a.rows(), a.cols() + b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t c = 0; c < a.cols(); ++c) y(i, c) = a(i, c);
    for (std::size_t c = 0; c < b.cols(); ++c) y(i, a.cols() + c) = b(i, c);
  }
  return y;
}

Matrix encode_frames(const EncoderParams& p, std::span<const Frame> frames) {
  const Matrix obs = nn::forward(p.psi_obs, observation_matrix(p, frames));
  const Matrix act = nn::forward(p.psi_act, action_matrix(p, frames));
  return nn::forward(p.psi_joint, concat(obs, act));
}

}  // namespace

void fit_input_normalization(EncoderParams& params, const Dataset& d) {
  std::vector<Frame> all;
  for (const auto& t : d.trajectories) all.insert(all.end(), t.frames.begin(), t.frames.end());
  params.obs_norm = nn::Normalizer::identity(params.arch.d_obs);
  params.act_norm = nn::Normalizer::identity(params.arch.d_act);
  params.obs_norm = nn::Normalizer::fit(observation_matrix(params, all));
  if (params.arch.action_kind == ActionKind::continuous) {
    params.act_norm = nn::Normalizer::fit(action_matrix(params, all));
  }
}

std::vector<double> encode_frame(const EncoderParams& params, const Frame& frame) {
  return encode_frames(params, std::span<const Frame>(&frame, 1)).values();
}

EmbeddingSequence encode_sequence(const EncoderParams& params, const Trajectory& t) {
  return {t.id, encode_frames(params, t.frames)};
}

std::vector<EmbeddingSequence> encode_dataset(const EncoderParams& params, const Dataset& d) {
  std::vector<EmbeddingSequence> out;
  out.reserve(d.size());
  for (const auto& t : d.trajectories) out.push_back(encode_sequence(params, t));
  return out;
}

EncoderVars bind(ad::Tape& tape, const EncoderParams& params) {
  return {nn::bind(tape, params.psi_obs), nn::bind(tape, params.psi_act), nn::bind(tape, params.psi_joint)};
}

ad::Var encode_on_tape(ad::Tape& tape, const EncoderVars& vars, const EncoderParams& params,
                       std::span<const Frame> frames) {
  const ad::Var obs = tape.constant(observation_matrix(params, frames));
  const ad::Var act = tape.constant(action_matrix(params, frames));
  const ad::Var f_obs = nn::forward(tape, vars.psi_obs, params.psi_obs, obs);
  const ad::Var f_act = nn::forward(tape, vars.psi_act, params.psi_act, act);
  return nn::forward(tape, vars.psi_joint, params.psi_joint, tape.concat_cols(f_obs, f_act));
}

EncoderGradient grad(const EncoderParams& params, const EncoderLoss& loss) {
  ad::Tape tape;
  const EncoderVars vars = bind(tape, params);
  const ad::Var out = loss(tape, vars);
  const double value = tape.scalar(out);
  if (!std::isfinite(value)) throw NumericalError("loss is not finite");
  tape.backward(out);
  EncoderGradient g;
  g.loss = value;
  g.grad.arch = params.arch;
  g.grad.obs_norm = params.obs_norm;
  g.grad.act_norm = params.act_norm;
  g.grad.psi_obs = nn::gradients(tape, vars.psi_obs, params.psi_obs);
  g.grad.psi_act = nn::gradients(tape, vars.psi_act, params.psi_act);
  g.grad.psi_joint = nn::gradients(tape, vars.psi_joint, params.psi_joint);
  return g;
}

void save_encoder(const EncoderParams& params, const std::filesystem::path& path) {
  nn::WeightFile f;
  f.kind = "encoder";
  const auto& a = params.arch;
  f.meta["arch"] = {{"d_obs", a.d_obs},   {"d_act", a.d_act}, {"hidden", a.hidden}, {"e_obs", a.e_obs},
                    {"e_act", a.e_act},   {"d_emb", a.d_emb},
                    {"action_kind", a.action_kind == ActionKind::continuous ? "continuous" : "discrete"}};
  f.meta["obs_norm"] = nn::to_json(params.obs_norm);
  f.meta["act_norm"] = nn::to_json(params.act_norm);
  nn::add_mlp(f, "psi_obs", params.psi_obs);
  nn::add_mlp(f, "psi_act", params.psi_act);
  nn::add_mlp(f, "psi_joint", params.psi_joint);
  nn::save_weights(f, path);
}

EncoderParams load_encoder(const std::filesystem::path& path) {
  const nn::WeightFile f = nn::load_weights(path);
  if (f.kind != "encoder") throw DataError(path.string() + ": expected an encoder checkpoint, got '" + f.kind + "'");
  try {
    EncoderParams p;
    const auto& a = f.meta.at("arch");
    p.arch.d_obs = a.at("d_obs").get<std::size_t>();
    p.arch.d_act = a.at("d_act").get<std::size_t>();
    p.arch.hidden = a.at("hidden").get<std::size_t>();
    p.arch.e_obs = a.at("e_obs").get<std::size_t>();
    p.arch.e_act = a.at("e_act").get<std::size_t>();
    p.arch.d_emb = a.at("d_emb").get<std::size_t>();
    p.arch.action_kind =
        a.at("action_kind").get<std::string>() == "discrete" ? ActionKind::discrete : ActionKind::continuous;
    p.obs_norm = nn::normalizer_from_json(f.meta.at("obs_norm"));
    p.act_norm = nn::normalizer_from_json(f.meta.at("act_norm"));
    p.psi_obs = nn::read_mlp(f, "psi_obs", 2, nn::Output::tanh);
    p.psi_act = nn::read_mlp(f, "psi_act", 2, nn::Output::tanh);
    p.psi_joint = nn::read_mlp(f, "psi_joint", 2, nn::Output::linear);
    if (p.psi_obs.in() != p.arch.d_obs || p.psi_act.in() != p.arch.d_act ||
        p.psi_joint.in() != p.psi_obs.out() + p.psi_act.out() || p.psi_joint.out() != p.arch.d_emb) {
      throw DataError(path.string() + ": layer shapes disagree with the declared architecture");
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": bad encoder metadata: " + e.what());
  }
}

}  // namespace eil
