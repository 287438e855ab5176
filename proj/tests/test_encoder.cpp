#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "eil/encoder.hpp"
#include "eil/error.hpp"
#include "eil/synthgen.hpp"
#include "eil/tcc.hpp"
#include "gradcheck.hpp"

using namespace eil;

namespace {

Dataset small_data() { return generate_extraneous(EnvSpec::reach2d(), NoiseSpec{}, 4, 5); }

EncoderParams fitted(const Dataset& d, std::uint64_t seed) {
  EncoderParams p = init_params(EncoderArch::for_dataset(d), seed);
  fit_input_normalization(p, d);
  return p;
}

Trajectory prefix(const Trajectory& t, std::size_t n) {
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < n; ++i) kept.push_back(i);
  return select_frames(t, kept);
}

}  // namespace

TEST_CASE("init is deterministic, bounded and seed dependent") {
  const Dataset d = small_data();
  const EncoderParams a = init_params(EncoderArch::for_dataset(d), 3);
  const EncoderParams b = init_params(EncoderArch::for_dataset(d), 3);
  const EncoderParams c = init_params(EncoderArch::for_dataset(d), 4);
  CHECK(a.psi_obs.layers[0].weight == b.psi_obs.layers[0].weight);
  CHECK_FALSE(a.psi_obs.layers[0].weight == c.psi_obs.layers[0].weight);
  for (const nn::Mlp* net : {&a.psi_obs, &a.psi_act, &a.psi_joint}) {
    for (const auto& layer : net->layers) {
      const double bound = nn::init_bound(layer.in(), layer.out());
      for (double w : layer.weight.values()) CHECK(std::abs(w) <= bound);
      for (double v : layer.bias.values()) CHECK(v == 0.0);
    }
  }
  CHECK(a.psi_joint.out() == 8);
  CHECK(a.psi_obs.out() == 16);
  CHECK(a.psi_act.out() == 16);
}

TEST_CASE("forward pass properties") {
  const Dataset d = small_data();
  const EncoderParams p = fitted(d, 1);
  const Trajectory& t = d.trajectories[0];

  CHECK(encode_frame(p, t.frames[3]) == encode_frame(p, t.frames[3]));
  const EmbeddingSequence s = encode_sequence(p, t);
  REQUIRE(s.size() == t.size());
  CHECK(s.trajectory_id == t.id);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto e = encode_frame(p, t.frames[i]);
    for (std::size_t c = 0; c < e.size(); ++c) CHECK(s.vectors(i, c) == e[c]);
  }

  Trajectory rev = t;
  std::reverse(rev.frames.begin(), rev.frames.end());
  const EmbeddingSequence r = encode_sequence(p, rev);
  for (std::size_t i = 0; i < t.size(); ++i)
    for (std::size_t c = 0; c < 8; ++c) CHECK(r.vectors(t.size() - 1 - i, c) == s.vectors(i, c));

  EncoderParams zero = p;
  for (Matrix* m : zero.tensors()) m->fill(0.0);
  for (double v : encode_frame(zero, t.frames[2])) CHECK(v == 0.0);

  Frame f = t.frames[1];
  CHECK_THROWS_AS(encode_frame(p, Frame{{0.0}, f.action, -1}), UsageError);
}

TEST_CASE("every input coordinate moves the embedding at init") {
  const Dataset d = small_data();
  const EncoderParams p = fitted(d, 2);
  const Frame base = d.trajectories[1].frames[4];
  const auto e0 = encode_frame(p, base);
  auto moved = [&](const Frame& f) {
    const auto e = encode_frame(p, f);
    double s = 0;
    for (std::size_t c = 0; c < e.size(); ++c) s += std::abs(e[c] - e0[c]);
    return s;
  };
  for (std::size_t c = 0; c < base.observation.size(); ++c) {
    Frame f = base;
    f.observation[c] += 1e-3;
    CHECK(moved(f) > 1e-8);
  }
  for (std::size_t c = 0; c < base.action.size(); ++c) {
    Frame f = base;
    f.action[c] += 1e-4;
    CHECK(moved(f) > 1e-8);
  }
}

TEST_CASE("discrete actions are one-hot encoded") {
  Dataset d;
  d.env_name = "robot";
  d.d_obs = 3;
  d.d_act = 6;
  d.action_kind = ActionKind::discrete;
  for (int k = 0; k < 2; ++k) {
    Trajectory t;
    t.id = "r" + std::to_string(k);
    for (int i = 0; i < 6; ++i) t.frames.push_back({{0.1 * i, 0.2 * k, -0.3}, {}, i});
    t.truth.extraneous.assign(6, false);
    d.trajectories.push_back(t);
  }
  const EncoderParams p = fitted(d, 1);
  CHECK(p.psi_act.in() == 6);
  const Frame a = d.trajectories[0].frames[0];
  Frame b = a;
  b.category = 4;
  CHECK_FALSE(encode_frame(p, a) == encode_frame(p, b));
  b.category = 6;
  CHECK_THROWS(encode_frame(p, b));
}

TEST_CASE("encoder gradient matches central differences on a 2x3-frame pair") {
  const Dataset d = small_data();
  const Trajectory u = prefix(d.trajectories[0], 2);
  const Trajectory v = prefix(d.trajectories[1], 3);
  const std::vector<std::size_t> anchors{0, 1};
  for (int variant : {1, 2}) {
    TccLossConfig cfg;
    cfg.variance_exponent = variant;
    EncoderParams p = fitted(d, 7);
    const EncoderGradient g = grad(p, [&](ad::Tape& tape, const EncoderVars& vars) {
      return tcc_pair_loss(tape, encode_on_tape(tape, vars, p, u.frames), encode_on_tape(tape, vars, p, v.frames),
                           anchors, cfg);
    });
    auto f = [&](const EncoderParams& q) {
      return tcc_pair_loss(encode_sequence(q, u).vectors, encode_sequence(q, v).vectors, anchors, cfg);
    };
    CHECK(g.loss == doctest::Approx(f(p)).epsilon(1e-12));
    double worst = 0.0;
    const auto gt = g.grad.tensors();
    for (std::size_t k = 0; k < gt.size(); ++k) {
      for (std::size_t e = 0; e < gt[k]->values().size(); ++e) {
        EncoderParams a = p, b = p;
        a.tensors()[k]->values()[e] += 1e-4;
        b.tensors()[k]->values()[e] -= 1e-4;
        const double numeric = (f(a) - f(b)) / 2e-4;
        worst = std::max(worst, test::relative_error(gt[k]->values()[e], numeric));
      }
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("a constant loss has zero gradient") {
  const Dataset d = small_data();
  const EncoderParams p = fitted(d, 1);
  const EncoderGradient g = grad(p, [](ad::Tape& tape, const EncoderVars&) {
    return tape.constant(Matrix(1, 1, 4.0));
  });
  for (const Matrix* m : g.grad.tensors())
    for (double v : m->values()) CHECK(v == 0.0);
}

TEST_CASE("non-finite losses are rejected") {
  const Dataset d = small_data();
  const EncoderParams p = fitted(d, 1);
  CHECK_THROWS_AS(grad(p, [](ad::Tape& tape, const EncoderVars&) {
                    return tape.log(tape.constant(Matrix(1, 1, -1.0)));
                  }),
                  NumericalError);
}

TEST_CASE("the log-variance term has the closed-form gradient on frozen betas") {
  // d(lambda log sigma)/d(beta_k) = lambda * ((k - i_hat)^2 - 2 k sum_j beta_j (j - i_hat)) / sigma
  const std::vector<double> beta{0.1, 0.2, 0.45, 0.25};
  const double lambda = 1e-3;
  ad::Tape t;
  const ad::Var b = t.leaf(Matrix(1, 4, beta));
  Matrix idx_col(4, 1), idx_row(1, 4);
  for (std::size_t k = 0; k < 4; ++k) idx_col(k, 0) = idx_row(0, k) = static_cast<double>(k);
  const ad::Var i_hat = t.matmul(b, t.constant(idx_col));
  const ad::Var centered = t.sub_col(t.constant(idx_row), i_hat);
  const ad::Var sigma = t.row_sum(t.mul(b, t.square(centered)));
  t.backward(t.scale(t.log(sigma), lambda));

  double ih = 0, s = 0, m1 = 0;
  for (std::size_t k = 0; k < 4; ++k) ih += beta[k] * static_cast<double>(k);
  for (std::size_t k = 0; k < 4; ++k) s += beta[k] * (static_cast<double>(k) - ih) * (static_cast<double>(k) - ih);
  for (std::size_t k = 0; k < 4; ++k) m1 += beta[k] * (static_cast<double>(k) - ih);
  for (std::size_t k = 0; k < 4; ++k) {
    const double kk = static_cast<double>(k);
    const double expected = lambda * ((kk - ih) * (kk - ih) - 2.0 * kk * m1) / s;
    CHECK(t.grad(b)(0, k) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("encoder checkpoints round-trip") {
  const Dataset d = small_data();
  const EncoderParams p = fitted(d, 9);
  const auto path = std::filesystem::temp_directory_path() / "eil_test_encoder.json";
  save_encoder(p, path);
  const EncoderParams q = load_encoder(path);
  for (const auto& t : d.trajectories) CHECK(encode_sequence(q, t).vectors == encode_sequence(p, t).vectors);
  CHECK_THROWS_AS(load_encoder(std::filesystem::temp_directory_path() / "eil_no_such_file.json"), DataError);
}
