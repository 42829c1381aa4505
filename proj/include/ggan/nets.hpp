#pragma once

#include "ggan/numcore.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

namespace ggan {

/// Normal initialization for weights, constant biases.
struct InitSpec {
  double weight_std = 0.06324555320336759;  // sqrt(0.004)
  double bias_value = 0.0;
  std::uint64_t seed = 0;
};

/// g(z) = clamp(T_L o relu o ... o relu o T_0(B z)).
///
/// `layers` holds T_0..T_L, so depth() == layers.size() - 1 hidden layers;
/// layers 1..L-1 are square. `input_map` is B (d x d).
struct GeneratorModel {
  Matrix input_map;
  std::vector<AffineLayer> layers;
  double output_bound = 1.0;
  /// Optional elementwise bound on |B|, applied after each update.
  std::optional<double> input_map_cap;

  [[nodiscard]] Index input_dim() const { return input_map.cols(); }
  [[nodiscard]] Index output_dim() const { return layers.back().weight.rows(); }
  [[nodiscard]] Index depth() const { return static_cast<Index>(layers.size()) - 1; }
  [[nodiscard]] Index width() const { return layers.front().weight.rows(); }
};

enum class CriticRegularization { gradient_penalty, spectral_norm };

std::string_view to_string(CriticRegularization mode);
CriticRegularization critic_regularization_from(std::string_view name);

/// Scalar-output critic f_w. In spectral-norm mode every layer keeps a unit
/// left power-iteration vector in `power_vectors`.
struct DiscriminatorModel {
  std::vector<AffineLayer> layers;
  CriticRegularization mode = CriticRegularization::spectral_norm;
  std::vector<Vector> power_vectors;

  [[nodiscard]] Index input_dim() const { return layers.front().weight.cols(); }
};

GeneratorModel init_generator(Index input_dim, Index width, Index depth, Index output_dim,
                              const InitSpec& spec);

DiscriminatorModel init_discriminator(Index input_dim, Index width, Index depth,
                                      CriticRegularization mode, const InitSpec& spec);

/// Checks the structural invariants (square hidden layers, square B, chained shapes).
void validate(const GeneratorModel& g);
void validate(const DiscriminatorModel& dm);

/// Generator on a batch of noise rows (n x d); returns n x D.
Matrix generator_forward(const GeneratorModel& g, const Matrix& noise);
Vector generator_forward(const GeneratorModel& g, const Vector& z);

/// sigma_hat = |A^T u| (= u^T A v for v = A^T u / |A^T u|), floored at 1e-12.
double spectral_sigma(const Matrix& weight, const Vector& u);

/// One power-iteration step v = A^T u / |.|, u = A v / |.| on every layer.
void spectral_normalize(DiscriminatorModel& dm);

/// The layers the critic actually applies: weights divided by sigma_hat in
/// spectral-norm mode, unchanged otherwise.
std::vector<AffineLayer> effective_layers(const DiscriminatorModel& dm);

double discriminator_forward(const DiscriminatorModel& dm, const Vector& x);
/// Critic values for a batch of rows, as an n-vector.
Vector discriminator_forward(const DiscriminatorModel& dm, const Matrix& batch);

/// Draws an n x d standard-normal noise matrix.
Matrix sample_noise(std::mt19937_64& rng, Index n, Index d);

}  // namespace ggan
