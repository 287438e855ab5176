#pragma once

// Dense tanh networks shared by the frame encoder and the policy, their
// optimizer, and the weight-file format both checkpoint through.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "eil/autodiff.hpp"
#include "eil/matrix.hpp"
#include "eil/rng.hpp"

namespace eil::nn {

struct Dense {
  Matrix weight;  // out x in
  Matrix bias;    // 1 x out

  std::size_t in() const { return weight.cols(); }
  std::size_t out() const { return weight.rows(); }
};

enum class Output { tanh, linear };

/// Hidden layers use tanh; the last layer uses `output`.
struct Mlp {
  std::vector<Dense> layers;
  Output output = Output::tanh;

  std::size_t in() const { return layers.front().in(); }
  std::size_t out() const { return layers.back().out(); }
};

/// Weights uniform in [-s, s] with s = sqrt(6 / (fan_in + fan_out)); zero
/// biases.
Mlp make_mlp(const std::vector<std::size_t>& dims, Output output, Rng& rng);
double init_bound(std::size_t fan_in, std::size_t fan_out);

Matrix forward(const Mlp& net, const Matrix& x);

struct MlpVars {
  std::vector<ad::Var> weights;
  std::vector<ad::Var> biases;
};
MlpVars bind(ad::Tape& tape, const Mlp& net);
ad::Var forward(ad::Tape& tape, const MlpVars& vars, const Mlp& net, ad::Var x);
/// Copies gradients of `vars` into a network shaped like `net`.
Mlp gradients(const ad::Tape& tape, const MlpVars& vars, const Mlp& net);

void append_tensors(Mlp& net, std::vector<Matrix*>& out);
void append_tensors(const Mlp& net, std::vector<const Matrix*>& out);

/// Per-feature affine standardization applied before the first layer.
struct Normalizer {
  std::vector<double> shift;
  std::vector<double> scale;

  static Normalizer identity(std::size_t dim);
  /// Mean and standard deviation of the rows of `x`; near-constant features
  /// keep scale 1.
  static Normalizer fit(const Matrix& x);
  Matrix apply(const Matrix& x) const;
  std::vector<double> apply(const std::vector<double>& x) const;
  std::size_t dim() const { return shift.size(); }
};

/// Gradient descent with classical momentum: v <- mu v - lr g; p <- p + v.
class Momentum {
 public:
  Momentum(double learning_rate, double momentum) : lr_(learning_rate), mu_(momentum) {}
  void step(const std::vector<Matrix*>& params, const std::vector<const Matrix*>& grads);
  void set_learning_rate(double lr) { lr_ = lr; }

 private:
  double lr_;
  double mu_;
  std::vector<Matrix> velocity_;
};

// Weight file: one JSON document
//   {"format": "eil-weights", "kind": ..., "meta": {...},
//    "tensors": [{"name", "rows", "cols", "values": [row-major]}]}
struct WeightFile {
  std::string kind;
  nlohmann::json meta = nlohmann::json::object();
  std::vector<std::pair<std::string, Matrix>> tensors;

  const Matrix& tensor(const std::string& name) const;
};

void save_weights(const WeightFile& file, const std::filesystem::path& path);
WeightFile load_weights(const std::filesystem::path& path);

void add_mlp(WeightFile& file, const std::string& prefix, const Mlp& net);
Mlp read_mlp(const WeightFile& file, const std::string& prefix, std::size_t n_layers, Output output);
nlohmann::json to_json(const Normalizer& n);
Normalizer normalizer_from_json(const nlohmann::json& j);

}  // namespace eil::nn
