#pragma once

// Action-conditioned frame encoder: an observation network and an action
// network whose features are concatenated and passed through a joint network
// to give one embedding per frame.
//
// An intrinsic-state branch would slot in as a third feature network feeding
// the concatenation; it is not part of this build.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "eil/autodiff.hpp"
#include "eil/domain.hpp"
#include "eil/nn.hpp"

namespace eil {

struct EncoderArch {
  std::size_t d_obs = 4;
  std::size_t d_act = 2;  // categories for discrete actions (one-hot input)
  ActionKind action_kind = ActionKind::continuous;
  std::size_t hidden = 32;
  std::size_t e_obs = 16;
  std::size_t e_act = 16;
  std::size_t d_emb = 8;

  void validate() const;
  static EncoderArch for_dataset(const Dataset& d);
};

struct EncoderParams {
  EncoderArch arch;
  nn::Normalizer obs_norm;
  nn::Normalizer act_norm;  // identity for one-hot actions
  nn::Mlp psi_obs;    // d_obs -> hidden -> e_obs, tanh
  nn::Mlp psi_act;    // d_act -> hidden -> e_act, tanh
  nn::Mlp psi_joint;  // e_obs + e_act -> hidden -> d_emb, linear output

  std::vector<Matrix*> tensors();
  std::vector<const Matrix*> tensors() const;
};

EncoderParams init_params(const EncoderArch& arch, std::uint64_t seed);
/// Standardizes observation and continuous-action inputs with statistics of
/// all frames in `d`.
void fit_input_normalization(EncoderParams& params, const Dataset& d);

std::vector<double> encode_frame(const EncoderParams& params, const Frame& frame);
EmbeddingSequence encode_sequence(const EncoderParams& params, const Trajectory& t);
std::vector<EmbeddingSequence> encode_dataset(const EncoderParams& params, const Dataset& d);

/// Parameters bound onto a tape.
struct EncoderVars {
  nn::MlpVars psi_obs;
  nn::MlpVars psi_act;
  nn::MlpVars psi_joint;
};
EncoderVars bind(ad::Tape& tape, const EncoderParams& params);
/// Embeddings of `frames` (rows) as a tape variable.
ad::Var encode_on_tape(ad::Tape& tape, const EncoderVars& vars, const EncoderParams& params,
                       std::span<const Frame> frames);

using EncoderLoss = std::function<ad::Var(ad::Tape&, const EncoderVars&)>;

struct EncoderGradient {
  double loss = 0.0;
  EncoderParams grad;  // same shapes as the parameters
};
/// Reverse-mode gradient of `loss` at `params`. Throws NumericalError when
/// the loss is not finite.
EncoderGradient grad(const EncoderParams& params, const EncoderLoss& loss);

void save_encoder(const EncoderParams& params, const std::filesystem::path& path);
EncoderParams load_encoder(const std::filesystem::path& path);

}  // namespace eil
