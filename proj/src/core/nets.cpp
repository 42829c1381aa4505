#include "ggan/nets.hpp"

#include <cmath>
#include <string>

namespace ggan {

namespace {

constexpr double kNormFloor = 1e-12;

Matrix normal_matrix(std::mt19937_64& rng, Index rows, Index cols, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(rows, cols);
  // Row-major fill order keeps draws independent of Eigen's storage order.
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  }
  return m;
}

std::vector<AffineLayer> init_chain(std::mt19937_64& rng, Index in, Index width, Index depth,
                                    Index out, const InitSpec& spec) {
  std::vector<AffineLayer> layers;
  Index fan_in = in;
  for (Index l = 0; l <= depth; ++l) {
    const Index fan_out = l == depth ? out : width;
    layers.push_back(AffineLayer{normal_matrix(rng, fan_out, fan_in, spec.weight_std),
                                 Vector::Constant(fan_out, spec.bias_value)});
    fan_in = fan_out;
  }
  return layers;
}

void validate_chain(const std::vector<AffineLayer>& layers, Index in, std::string_view what) {
  if (layers.empty()) throw ContractError(std::string(what) + ": no layers");
  Index fan_in = in;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    if (layer.weight.cols() != fan_in || layer.bias.size() != layer.weight.rows()) {
      throw ShapeError(std::string(what) + ": layer " + std::to_string(l) +
                       " does not chain with its input");
    }
    require_finite(layer.weight, what);
    require_finite(layer.bias, what);
    fan_in = layer.weight.rows();
  }
}

Vector unit(const Vector& v, const Vector& fallback) {
  const double n = v.norm();
  return n < kNormFloor ? fallback : Vector(v / n);
}

}  // namespace

std::string_view to_string(CriticRegularization mode) {
  return mode == CriticRegularization::spectral_norm ? "spectral_norm" : "gradient_penalty";
}

CriticRegularization critic_regularization_from(std::string_view name) {
  if (name == "spectral_norm" || name == "sn") return CriticRegularization::spectral_norm;
  if (name == "gradient_penalty" || name == "gp") return CriticRegularization::gradient_penalty;
  throw ContractError("unknown critic regularization '" + std::string(name) + "'");
}

GeneratorModel init_generator(Index input_dim, Index width, Index depth, Index output_dim,
                              const InitSpec& spec) {
  if (input_dim < 1 || width < 1 || depth < 1 || output_dim < 1) {
    throw ContractError("init_generator: dimensions must be >= 1");
  }
  if (!(spec.weight_std > 0.0)) throw ContractError("init_generator: weight std must be > 0");
  std::mt19937_64 rng(spec.seed);
  GeneratorModel g;
  g.input_map = normal_matrix(rng, input_dim, input_dim, spec.weight_std);
  g.layers = init_chain(rng, input_dim, width, depth, output_dim, spec);
  return g;
}

DiscriminatorModel init_discriminator(Index input_dim, Index width, Index depth,
                                      CriticRegularization mode, const InitSpec& spec) {
  if (input_dim < 1 || width < 1 || depth < 1) {
    throw ContractError("init_discriminator: dimensions must be >= 1");
  }
  if (!(spec.weight_std > 0.0)) {
    throw ContractError("init_discriminator: weight std must be > 0");
  }
  std::mt19937_64 rng(spec.seed);
  DiscriminatorModel dm;
  dm.mode = mode;
  dm.layers = init_chain(rng, input_dim, width, depth, 1, spec);
  if (mode == CriticRegularization::spectral_norm) {
    for (const auto& layer : dm.layers) {
      Vector u = normal_matrix(rng, layer.weight.rows(), 1, 1.0).col(0);
      dm.power_vectors.push_back(unit(u, Vector::Unit(u.size(), 0)));
    }
  }
  return dm;
}

void validate(const GeneratorModel& g) {
  if (g.input_map.rows() != g.input_map.cols()) {
    throw ShapeError("generator: input map must be square");
  }
  require_finite(g.input_map, "generator input map");
  validate_chain(g.layers, g.input_map.cols(), "generator");
  for (std::size_t l = 1; l + 1 < g.layers.size(); ++l) {
    if (g.layers[l].weight.rows() != g.layers[l].weight.cols()) {
      throw ShapeError("generator: hidden layer " + std::to_string(l) + " is not square");
    }
  }
  if (!(g.output_bound > 0.0)) throw ContractError("generator: output bound must be > 0");
}

void validate(const DiscriminatorModel& dm) {
  validate_chain(dm.layers, dm.layers.empty() ? 0 : dm.layers.front().weight.cols(),
                 "discriminator");
  if (dm.layers.back().weight.rows() != 1) {
    throw ShapeError("discriminator: output must be scalar");
  }
  if (dm.mode == CriticRegularization::spectral_norm) {
    if (dm.power_vectors.size() != dm.layers.size()) {
      throw ContractError("discriminator: one power-iteration vector per layer required");
    }
    for (std::size_t l = 0; l < dm.layers.size(); ++l) {
      if (dm.power_vectors[l].size() != dm.layers[l].weight.rows()) {
        throw ShapeError("discriminator: power vector " + std::to_string(l) + " has wrong length");
      }
      if (std::abs(dm.power_vectors[l].norm() - 1.0) > 1e-8) {
        throw ContractError("discriminator: power vector " + std::to_string(l) + " is not unit length");
      }
    }
  }
}

Matrix generator_forward(const GeneratorModel& g, const Matrix& noise) {
  if (noise.cols() != g.input_dim()) {
    throw ShapeError("generator_forward: noise has " + std::to_string(noise.cols()) +
                     " columns, generator expects " + std::to_string(g.input_dim()));
  }
  Matrix input = noise * g.input_map.transpose();
  Matrix out = chain_forward(g.layers, input);
  return out.cwiseMax(-g.output_bound).cwiseMin(g.output_bound);
}

Vector generator_forward(const GeneratorModel& g, const Vector& z) {
  return generator_forward(g, Matrix(z.transpose())).row(0).transpose();
}

double spectral_sigma(const Matrix& weight, const Vector& u) {
  return std::max((weight.transpose() * u).norm(), kNormFloor);
}

void spectral_normalize(DiscriminatorModel& dm) {
  if (dm.mode != CriticRegularization::spectral_norm) {
    throw ContractError("spectral_normalize: discriminator is not in spectral-norm mode");
  }
  for (std::size_t l = 0; l < dm.layers.size(); ++l) {
    const Matrix& a = dm.layers[l].weight;
    Vector& u = dm.power_vectors[l];
    const Vector v = unit(a.transpose() * u, Vector::Zero(a.cols()));
    if (v.isZero()) continue;
    u = unit(a * v, u);
  }
}

std::vector<AffineLayer> effective_layers(const DiscriminatorModel& dm) {
  if (dm.mode != CriticRegularization::spectral_norm) return dm.layers;
  std::vector<AffineLayer> out = dm.layers;
  for (std::size_t l = 0; l < out.size(); ++l) {
    out[l].weight /= spectral_sigma(out[l].weight, dm.power_vectors[l]);
  }
  return out;
}

Vector discriminator_forward(const DiscriminatorModel& dm, const Matrix& batch) {
  if (batch.cols() != dm.input_dim()) {
    throw ShapeError("discriminator_forward: input has " + std::to_string(batch.cols()) +
                     " columns, critic expects " + std::to_string(dm.input_dim()));
  }
  return chain_forward(effective_layers(dm), batch).col(0);
}

double discriminator_forward(const DiscriminatorModel& dm, const Vector& x) {
  return discriminator_forward(dm, Matrix(x.transpose()))(0);
}

Matrix sample_noise(std::mt19937_64& rng, Index n, Index d) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix z(n, d);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) z(i, j) = dist(rng);
  }
  return z;
}

}  // namespace ggan
