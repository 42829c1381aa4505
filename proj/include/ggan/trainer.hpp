#pragma once

#include "ggan/nets.hpp"
#include "ggan/penalties.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace ggan {

/// Adam with bias correction. Moments are kept per parameter array.
struct AdamState {
  double learning_rate = 2e-4;
  double beta1 = 0.0;
  double beta2 = 0.9;
  double epsilon = 1e-8;
  long step = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;
};

using ParamRef = Eigen::Map<Matrix>;

/// m <- b1 m + (1-b1) g; v <- b2 v + (1-b2) g^2; p <- p - lr mhat / (sqrt(vhat) + eps).
/// Moments are allocated lazily on the first call.
void adam_step(AdamState& state, std::span<ParamRef> params, std::span<const Matrix> grads);

/// Views of B, A_0, c_0, ..., A_L, c_L in that order; ids 0, 1, 2, ...
std::vector<ParamRef> generator_params(GeneratorModel& g);
/// Views of A_0, c_0, ..., A_L, c_L; ids 0, 1, ...
std::vector<ParamRef> discriminator_params(DiscriminatorModel& dm);

inline ParamId generator_input_map_id() { return ParamId{0}; }
inline ParamId generator_weight_id(std::size_t l) { return ParamId{1 + 2 * static_cast<int>(l)}; }
inline ParamId generator_bias_id(std::size_t l) { return ParamId{2 + 2 * static_cast<int>(l)}; }

struct LossAndGrad {
  double value = 0.0;
  GradientMap grads;
};

/// mean f(fake) - mean f(real), plus gp_weight * mean (|grad_x f(xhat)| - 1)^2
/// over xhat = u real + (1-u) fake in gradient-penalty mode. `mix` holds one u
/// per sample. Spectral-norm mode uses the stored power vectors as they are.
LossAndGrad discriminator_loss(const DiscriminatorModel& dm, const Matrix& real,
                               const Matrix& fake, const Vector& mix, double gp_weight);

/// -mean f(g(B z)) + lambda1 M(B) + lambda2 P(theta) + lambda3 Q(theta).
/// Gradients include the penalty subgradients.
LossAndGrad generator_loss(const GeneratorModel& g, const DiscriminatorModel& dm,
                           const Matrix& noise, const PenaltyConfig& penalty);

enum class TruncationPolicy {
  second_half,  // every interval in the second half, and after the last update
  final_only,   // once after the last update
  never,
};

std::string_view to_string(TruncationPolicy policy);
TruncationPolicy truncation_policy_from(std::string_view name);

struct TrainConfig {
  int critic_steps = 5;
  int batch_size = 512;
  long updates = 5000;
  double gp_weight = 10.0;
  PenaltyConfig penalty;
  double delta1 = 1.1;
  double delta2 = 0.9;
  long interval = 100;
  double learning_rate = 2e-4;
  double beta1 = 0.0;
  double beta2 = 0.9;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  TruncationPolicy truncation = TruncationPolicy::second_half;
  /// When false, B is held at its initial value.
  bool train_input_map = true;
  long log_interval = 100;

  void validate() const;
};

/// One row of the training log.
struct LogRow {
  long iteration = 0;
  double critic_loss = 0.0;
  double generator_loss = 0.0;
  double group_row = 0.0;
  double depth = 0.0;
  double sparsity = 0.0;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double lambda3 = 0.0;
  long nonzero_rows = 0;
};

struct TrainedModel {
  GeneratorModel generator;
  DiscriminatorModel discriminator;
  std::vector<LogRow> history;
};

/// Draws minibatches from a fixed sample matrix by walking shuffled epochs.
class MinibatchSampler {
 public:
  MinibatchSampler(const Matrix& data, std::mt19937_64& rng);
  Matrix next(Index batch);

 private:
  const Matrix& data_;
  std::mt19937_64& rng_;
  std::vector<Index> order_;
  std::size_t cursor_ = 0;
};

/// The state of one adversarial training run. Exposes the individual critic
/// and generator updates so callers can drive them with explicit minibatches.
class Trainer {
 public:
  Trainer(TrainConfig cfg, GeneratorModel g, DiscriminatorModel dm);

  /// One critic update; runs a power-iteration step first in spectral-norm mode.
  double critic_update(const Matrix& real, const Matrix& noise, const Vector& mix);
  /// One generator update with the current penalty weights.
  double generator_update(const Matrix& noise);
  /// Applies tau1 to B and tau2 to theta, clearing Adam moments of truncated entries.
  void truncate();

  /// Iteration t (1-based) of the full loop, drawing batches from `data`.
  void iterate(long t, MinibatchSampler& sampler, std::mt19937_64& rng);

  [[nodiscard]] const GeneratorModel& generator() const { return gen_; }
  [[nodiscard]] const DiscriminatorModel& discriminator() const { return disc_; }
  [[nodiscard]] const PenaltyConfig& penalty() const { return penalty_; }
  [[nodiscard]] LogRow log_row(long t) const;

 private:
  TrainConfig cfg_;
  GeneratorModel gen_;
  DiscriminatorModel disc_;
  PenaltyConfig penalty_;
  AdamState gen_adam_;
  AdamState disc_adam_;
  double last_critic_loss_ = 0.0;
  double last_generator_loss_ = 0.0;
};

using ProgressFn = std::function<void(const LogRow&)>;

/// Minibatch adversarial training with scheduled penalties and truncation.
/// Deterministic for a fixed cfg.seed.
TrainedModel train(const Matrix& data, const TrainConfig& cfg, GeneratorModel g,
                   DiscriminatorModel dm, const ProgressFn& progress = {});

}  // namespace ggan
