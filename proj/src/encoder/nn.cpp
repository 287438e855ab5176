#include "eil/nn.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "eil/error.hpp"
#include "eil/kernels.hpp"

namespace eil::nn {

using nlohmann::json;

double init_bound(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

Mlp make_mlp(const std::vector<std::size_t>& dims, Output output, Rng& rng) {
  if (dims.size() < 2) throw UsageError("an MLP needs at least an input and an output size");
  Mlp net;
  net.output = output;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    if (dims[l] == 0 || dims[l + 1] == 0) throw UsageError("MLP layer sizes must be positive");
    Dense layer{Matrix(dims[l + 1], dims[l]), Matrix(1, dims[l + 1], 0.0)};
    const double s = init_bound(dims[l], dims[l + 1]);
    for (double& w : layer.weight.values()) w = rng.uniform(-s, s);
    net.layers.push_back(std::move(layer));
  }
  return net;
}

Matrix forward(const Mlp& net, const Matrix& x) {
  Matrix h = x;
  const auto dot = kernels::active().dot;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const Dense& layer = net.layers[l];
    if (h.cols() != layer.in()) throw UsageError("input dimension mismatch in MLP forward");
    Matrix y(h.rows(), layer.out());
    const bool squash = l + 1 < net.layers.size() || net.output == Output::tanh;
    for (std::size_t i = 0; i < h.rows(); ++i) {
      for (std::size_t o = 0; o < layer.out(); ++o) {
        const double v = dot(h.data() + i * layer.in(), layer.weight.data() + o * layer.in(), layer.in()) +
                         layer.bias(0, o);
        y(i, o) = squash ? std::tanh(v) : v;
      }
    }
    h = std::move(y);
  }
  return h;
}

MlpVars bind(ad::Tape& tape, const Mlp& net) {
  MlpVars v;
  for (const auto& layer : net.layers) {
    v.weights.push_back(tape.leaf(layer.weight));
    v.biases.push_back(tape.leaf(layer.bias));
  }
  return v;
}

ad::Var forward(ad::Tape& tape, const MlpVars& vars, const Mlp& net, ad::Var x) {
  ad::Var h = x;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    h = tape.affine(h, vars.weights[l], vars.biases[l]);
    if (l + 1 < net.layers.size() || net.output == Output::tanh) h = tape.tanh(h);
  }
  return h;
}

Mlp gradients(const ad::Tape& tape, const MlpVars& vars, const Mlp& net) {
  Mlp g;
  g.output = net.output;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    g.layers.push_back(Dense{tape.grad(vars.weights[l]), tape.grad(vars.biases[l])});
  }
  return g;
}

void append_tensors(Mlp& net, std::vector<Matrix*>& out) {
  for (auto& layer : net.layers) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
}

void append_tensors(const Mlp& net, std::vector<const Matrix*>& out) {
  for (const auto& layer : net.layers) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
}

Normalizer Normalizer::identity(std::size_t dim) {
  return {std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)};
}

Normalizer Normalizer::fit(const Matrix& x) {
  Normalizer n = identity(x.cols());
  if (x.rows() == 0) return n;
  for (std::size_t c = 0; c < x.cols(); ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) mean += x(r, c);
    mean /= static_cast<double>(x.rows());
    double var = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) var += (x(r, c) - mean) * (x(r, c) - mean);
    var /= static_cast<double>(x.rows());
    n.shift[c] = mean;
    n.scale[c] = var > 1e-12 ? 1.0 / std::sqrt(var) : 1.0;
  }
  return n;
}

Matrix Normalizer::apply(const Matrix& x) const {
  if (x.cols() != dim()) throw UsageError("normalizer dimension mismatch");
  Matrix y = x;
  for (std::size_t r = 0; r < y.rows(); ++r)
    for (std::size_t c = 0; c < y.cols(); ++c) y(r, c) = (y(r, c) - shift[c]) * scale[c];
  return y;
}

std::vector<double> Normalizer::apply(const std::vector<double>& x) const {
  if (x.size() != dim()) throw UsageError("normalizer dimension mismatch");
  std::vector<double> y(x.size());
  for (std::size_t c = 0; c < x.size(); ++c) y[c] = (x[c] - shift[c]) * scale[c];
  return y;
}

void Momentum::step(const std::vector<Matrix*>& params, const std::vector<const Matrix*>& grads) {
  if (params.size() != grads.size()) throw UsageError("parameter and gradient lists differ in length");
  if (velocity_.empty()) {
    for (const Matrix* p : params) velocity_.emplace_back(p->rows(), p->cols(), 0.0);
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& v = velocity_[k].values();
    auto& p = params[k]->values();
    const auto& g = grads[k]->values();
    for (std::size_t i = 0; i < p.size(); ++i) {
      v[i] = mu_ * v[i] - lr_ * g[i];
      p[i] += v[i];
    }
  }
}

const Matrix& WeightFile::tensor(const std::string& name) const {
  for (const auto& [n, m] : tensors) {
    if (n == name) return m;
  }
  throw DataError("weight file has no tensor '" + name + "'");
}

void save_weights(const WeightFile& file, const std::filesystem::path& path) {
  json doc;
  doc["format"] = "eil-weights";
  doc["kind"] = file.kind;
  doc["meta"] = file.meta;
  json ts = json::array();
  for (const auto& [name, m] : file.tensors) {
    ts.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}, {"values", m.values()}});
  }
  doc["tensors"] = std::move(ts);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << doc.dump(1) << '\n';
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

WeightFile load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    const json doc = json::parse(buf.str());
    if (doc.at("format").get<std::string>() != "eil-weights") {
      throw DataError(path.string() + ": not an eil weight file");
    }
    WeightFile f;
    f.kind = doc.at("kind").get<std::string>();
    f.meta = doc.at("meta");
    for (const auto& t : doc.at("tensors")) {
      const auto rows = t.at("rows").get<std::size_t>();
      const auto cols = t.at("cols").get<std::size_t>();
      auto values = t.at("values").get<std::vector<double>>();
      if (values.size() != rows * cols) {
        throw DataError(path.string() + ": tensor '" + t.at("name").get<std::string>() + "' has wrong size");
      }
      for (double v : values) {
        if (!std::isfinite(v)) throw DataError(path.string() + ": non-finite weight");
      }
      f.tensors.emplace_back(t.at("name").get<std::string>(), Matrix(rows, cols, std::move(values)));
    }
    return f;
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": parse error: " + e.what());
  }
}

void add_mlp(WeightFile& file, const std::string& prefix, const Mlp& net) {
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    file.tensors.emplace_back(prefix + "." + std::to_string(l) + ".weight", net.layers[l].weight);
    file.tensors.emplace_back(prefix + "." + std::to_string(l) + ".bias", net.layers[l].bias);
  }
}

Mlp read_mlp(const WeightFile& file, const std::string& prefix, std::size_t n_layers, Output output) {
  Mlp net;
  net.output = output;
  for (std::size_t l = 0; l < n_layers; ++l) {
    Dense layer{file.tensor(prefix + "." + std::to_string(l) + ".weight"),
                file.tensor(prefix + "." + std::to_string(l) + ".bias")};
    if (layer.bias.rows() != 1 || layer.bias.cols() != layer.weight.rows()) {
      throw DataError("layer " + prefix + "." + std::to_string(l) + " has inconsistent shapes");
    }
    if (l > 0 && layer.in() != net.layers.back().out()) {
      throw DataError("layer " + prefix + "." + std::to_string(l) + " does not chain");
    }
    net.layers.push_back(std::move(layer));
  }
  return net;
}

json to_json(const Normalizer& n) { return {{"shift", n.shift}, {"scale", n.scale}}; }

Normalizer normalizer_from_json(const json& j) {
  Normalizer n{j.at("shift").get<std::vector<double>>(), j.at("scale").get<std::vector<double>>()};
  if (n.shift.size() != n.scale.size()) throw DataError("normalizer shift/scale sizes differ");
  return n;
}

}  // namespace eil::nn
