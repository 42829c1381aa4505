#include "ggan/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace ggan {

namespace {

ParamRef view(Matrix& m) { return ParamRef(m.data(), m.rows(), m.cols()); }
ParamRef view(Vector& v) { return ParamRef(v.data(), v.size(), 1); }

void check_finite_term(double value, long t, std::string_view term) {
  if (!std::isfinite(value)) {
    throw NumericError("iteration " + std::to_string(t) + ": " + std::string(term) +
                       " is not finite");
  }
}

/// Critic weights as tape nodes, spectrally scaled when the critic asks for it.
ChainVars register_critic(GradTape& tape, const DiscriminatorModel& dm) {
  ChainVars chain;
  const bool sn = dm.mode == CriticRegularization::spectral_norm;
  for (std::size_t l = 0; l < dm.layers.size(); ++l) {
    auto w = tape.parameter(ParamId{2 * static_cast<int>(l)}, dm.layers[l].weight);
    if (sn) w = tape.spectral_scaled(w, dm.power_vectors[l]);
    chain.weights.push_back(w);
    chain.biases.push_back(
        tape.parameter(ParamId{2 * static_cast<int>(l) + 1}, Matrix(dm.layers[l].bias)));
  }
  return chain;
}

ChainVars constant_chain(GradTape& tape, const std::vector<AffineLayer>& layers) {
  ChainVars chain;
  for (const auto& layer : layers) {
    chain.weights.push_back(tape.constant(layer.weight));
    chain.biases.push_back(tape.constant(Matrix(layer.bias)));
  }
  return chain;
}

}  // namespace

void adam_step(AdamState& state, std::span<ParamRef> params, std::span<const Matrix> grads) {
  if (params.size() != grads.size()) {
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " parameters but " +
                     std::to_string(grads.size()) + " gradients");
  }
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.push_back(Matrix::Zero(p.rows(), p.cols()));
      state.v.push_back(Matrix::Zero(p.rows(), p.cols()));
    }
  }
  if (state.m.size() != params.size()) {
    throw ShapeError("adam_step: moment count does not match parameter count");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    const Matrix& g = grads[i];
    if (g.rows() != p.rows() || g.cols() != p.cols() || state.m[i].rows() != p.rows() ||
        state.m[i].cols() != p.cols()) {
      throw ShapeError("adam_step: gradient " + std::to_string(i) + " does not match its parameter");
    }
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g.cwiseProduct(g);
    p.array() -= state.learning_rate * (state.m[i].array() / c1) /
                 ((state.v[i].array() / c2).sqrt() + state.epsilon);
  }
}

std::vector<ParamRef> generator_params(GeneratorModel& g) {
  std::vector<ParamRef> out;
  out.push_back(view(g.input_map));
  for (auto& layer : g.layers) {
    out.push_back(view(layer.weight));
    out.push_back(view(layer.bias));
  }
  return out;
}

std::vector<ParamRef> discriminator_params(DiscriminatorModel& dm) {
  std::vector<ParamRef> out;
  for (auto& layer : dm.layers) {
    out.push_back(view(layer.weight));
    out.push_back(view(layer.bias));
  }
  return out;
}

LossAndGrad discriminator_loss(const DiscriminatorModel& dm, const Matrix& real,
                               const Matrix& fake, const Vector& mix, double gp_weight) {
  if (real.rows() != fake.rows() || real.cols() != fake.cols()) {
    throw ShapeError("discriminator_loss: real and fake batches differ in shape");
  }
  GradTape tape;
  const ChainVars chain = register_critic(tape, dm);
  const auto real_out = record_chain(tape, tape.constant(real), chain).output;
  const auto fake_out = record_chain(tape, tape.constant(fake), chain).output;
  auto loss = tape.sub(tape.mean(fake_out), tape.mean(real_out));
  if (dm.mode == CriticRegularization::gradient_penalty && gp_weight != 0.0) {
    if (mix.size() != real.rows()) {
      throw ShapeError("discriminator_loss: need one interpolation weight per sample");
    }
    Matrix blend = mix.asDiagonal() * real;
    blend += (1.0 - mix.array()).matrix().asDiagonal() * fake;
    const auto record = record_chain(tape, tape.constant(std::move(blend)), chain);
    const auto grad_x = record_input_gradient(tape, chain, record.masks, real.rows());
    const auto penalty = tape.mean(tape.square(tape.add_scalar(tape.row_norms(grad_x), -1.0)));
    loss = tape.add(loss, tape.scale(penalty, gp_weight));
  }
  LossAndGrad out;
  out.value = tape.scalar(loss);
  out.grads = tape.backward(loss);
  return out;
}

LossAndGrad generator_loss(const GeneratorModel& g, const DiscriminatorModel& dm,
                           const Matrix& noise, const PenaltyConfig& penalty) {
  if (noise.cols() != g.input_dim()) {
    throw ShapeError("generator_loss: noise width does not match the input map");
  }
  GradTape tape;
  const auto b = tape.parameter(generator_input_map_id(), g.input_map);
  ChainVars chain;
  for (std::size_t l = 0; l < g.layers.size(); ++l) {
    chain.weights.push_back(tape.parameter(generator_weight_id(l), g.layers[l].weight));
    chain.biases.push_back(tape.parameter(generator_bias_id(l), Matrix(g.layers[l].bias)));
  }
  const auto input = tape.matmul_nt(tape.constant(noise), b);
  const auto fake = tape.clamp(record_chain(tape, input, chain).output, g.output_bound);
  const auto critic = record_chain(tape, fake, constant_chain(tape, effective_layers(dm))).output;
  const auto loss = tape.scale(tape.mean(critic), -1.0);

  LossAndGrad out;
  out.value = tape.scalar(loss);
  out.grads = tape.backward(loss);

  if (penalty.lambda1 != 0.0) {
    out.value += penalty.lambda1 * group_row_penalty(g.input_map);
    out.grads[generator_input_map_id()] += penalty.lambda1 * group_row_subgradient(g.input_map);
  }
  auto add_layers = [&](double lambda, const std::vector<AffineLayer>& sub) {
    for (std::size_t l = 0; l < sub.size(); ++l) {
      out.grads[generator_weight_id(l)] += lambda * sub[l].weight;
      out.grads[generator_bias_id(l)] += lambda * Matrix(sub[l].bias);
    }
  };
  if (penalty.lambda2 != 0.0) {
    out.value += penalty.lambda2 * depth_penalty(g);
    add_layers(penalty.lambda2, depth_subgradient(g));
  }
  if (penalty.lambda3 != 0.0) {
    out.value += penalty.lambda3 * sparsity_penalty(g.layers);
    add_layers(penalty.lambda3, sparsity_subgradient(g.layers));
  }
  return out;
}

std::string_view to_string(TruncationPolicy policy) {
  switch (policy) {
    case TruncationPolicy::second_half:
      return "second_half";
    case TruncationPolicy::final_only:
      return "final";
    case TruncationPolicy::never:
      return "never";
  }
  return "never";
}

TruncationPolicy truncation_policy_from(std::string_view name) {
  if (name == "second_half") return TruncationPolicy::second_half;
  if (name == "final") return TruncationPolicy::final_only;
  if (name == "never") return TruncationPolicy::never;
  throw ContractError("unknown truncation policy '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (critic_steps < 1) throw ContractError("train config: critic steps must be >= 1");
  if (batch_size < 1) throw ContractError("train config: batch size must be >= 1");
  if (updates < 0) throw ContractError("train config: number of updates must be >= 0");
  if (log_interval < 1) throw ContractError("train config: log interval must be >= 1");
  if (!(learning_rate > 0.0)) throw ContractError("train config: learning rate must be > 0");
  if (gp_weight < 0.0) throw ContractError("train config: gradient-penalty weight must be >= 0");
  penalty.validate();
  ScheduleState{delta1, delta2, interval, std::max(updates, 1L), 0}.validate();
}

// ---------------------------------------------------------------------------

MinibatchSampler::MinibatchSampler(const Matrix& data, std::mt19937_64& rng)
    : data_(data), rng_(rng), order_(static_cast<std::size_t>(data.rows())) {
  std::iota(order_.begin(), order_.end(), Index{0});
  cursor_ = order_.size();
}

Matrix MinibatchSampler::next(Index batch) {
  if (batch > data_.rows()) {
    throw ContractError("minibatch larger than the dataset (" + std::to_string(batch) + " > " +
                        std::to_string(data_.rows()) + ")");
  }
  Matrix out(batch, data_.cols());
  for (Index i = 0; i < batch; ++i) {
    if (cursor_ == order_.size()) {
      std::shuffle(order_.begin(), order_.end(), rng_);
      cursor_ = 0;
    }
    out.row(i) = data_.row(order_[cursor_++]);
  }
  return out;
}

// ---------------------------------------------------------------------------

Trainer::Trainer(TrainConfig cfg, GeneratorModel g, DiscriminatorModel dm)
    : cfg_(std::move(cfg)), gen_(std::move(g)), disc_(std::move(dm)), penalty_(cfg_.penalty) {
  cfg_.validate();
  validate(gen_);
  validate(disc_);
  if (gen_.output_dim() != disc_.input_dim()) {
    throw ShapeError("trainer: generator output and critic input dimensions differ");
  }
  for (AdamState* s : {&gen_adam_, &disc_adam_}) {
    s->learning_rate = cfg_.learning_rate;
    s->beta1 = cfg_.beta1;
    s->beta2 = cfg_.beta2;
    s->epsilon = cfg_.epsilon;
  }
}

double Trainer::critic_update(const Matrix& real, const Matrix& noise, const Vector& mix) {
  const Matrix fake = generator_forward(gen_, noise);
  if (disc_.mode == CriticRegularization::spectral_norm) spectral_normalize(disc_);
  auto [value, grads] = discriminator_loss(disc_, real, fake, mix, cfg_.gp_weight);
  auto params = discriminator_params(disc_);
  std::vector<Matrix> ordered;
  ordered.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    ordered.push_back(std::move(grads.at(ParamId{static_cast<int>(i)})));
  }
  adam_step(disc_adam_, params, ordered);
  last_critic_loss_ = value;
  return value;
}

double Trainer::generator_update(const Matrix& noise) {
  auto [value, grads] = generator_loss(gen_, disc_, noise, penalty_);
  if (!cfg_.train_input_map) grads[generator_input_map_id()].setZero();
  auto params = generator_params(gen_);
  std::vector<Matrix> ordered;
  ordered.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    ordered.push_back(std::move(grads.at(ParamId{static_cast<int>(i)})));
  }
  adam_step(gen_adam_, params, ordered);
  if (gen_.input_map_cap) {
    const double cap = *gen_.input_map_cap;
    gen_.input_map = gen_.input_map.cwiseMax(-cap).cwiseMin(cap);
  }
  last_generator_loss_ = value;
  return value;
}

void Trainer::truncate() {
  GeneratorModel next = gen_;
  if (cfg_.train_input_map) next.input_map = truncate_rows(gen_.input_map, penalty_.tau1);
  next.layers = truncate_params(gen_.layers, penalty_.tau2);
  if (!gen_adam_.m.empty()) {
    auto before = generator_params(gen_);
    auto after = generator_params(next);
    for (std::size_t i = 0; i < before.size(); ++i) {
      const auto cut = (before[i].array() != after[i].array());
      gen_adam_.m[i] = cut.select(0.0, gen_adam_.m[i]);
      gen_adam_.v[i] = cut.select(0.0, gen_adam_.v[i]);
    }
  }
  gen_ = std::move(next);
}

void Trainer::iterate(long t, MinibatchSampler& sampler, std::mt19937_64& rng) {
  penalty_ = schedule_step(penalty_, ScheduleState{cfg_.delta1, cfg_.delta2, cfg_.interval,
                                                   cfg_.updates, t});
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Index b = cfg_.batch_size;
  for (int k = 0; k < cfg_.critic_steps; ++k) {
    Matrix real = sampler.next(b);
    Matrix noise = sample_noise(rng, b, gen_.input_dim());
    Vector mix(b);
    for (Index i = 0; i < b; ++i) mix(i) = unit(rng);
    check_finite_term(critic_update(real, noise, mix), t, "critic loss");
  }
  Matrix noise = sample_noise(rng, b, gen_.input_dim());
  check_finite_term(generator_update(noise), t, "generator loss");

  const bool at_interval = t % cfg_.interval == 0 && 2 * t > cfg_.updates;
  const bool last = t == cfg_.updates;
  if ((cfg_.truncation == TruncationPolicy::second_half && (at_interval || last)) ||
      (cfg_.truncation == TruncationPolicy::final_only && last)) {
    truncate();
  }
}

LogRow Trainer::log_row(long t) const {
  LogRow row;
  row.iteration = t;
  row.critic_loss = last_critic_loss_;
  row.generator_loss = last_generator_loss_;
  row.group_row = group_row_penalty(gen_.input_map);
  row.depth = depth_penalty(gen_);
  row.sparsity = sparsity_penalty(gen_.layers);
  row.lambda1 = penalty_.lambda1;
  row.lambda2 = penalty_.lambda2;
  row.lambda3 = penalty_.lambda3;
  row.nonzero_rows = (gen_.input_map.rowwise().norm().array() > 0.0).count();
  return row;
}

TrainedModel train(const Matrix& data, const TrainConfig& cfg, GeneratorModel g,
                   DiscriminatorModel dm, const ProgressFn& progress) {
#if defined(__GLIBC__)
  // Batch-sized temporaries sit just above glibc's mmap threshold, so every
  // tape node would otherwise cost an mmap/munmap pair.
  static const bool tuned = [] {
    mallopt(M_MMAP_THRESHOLD, 64 << 20);
    mallopt(M_TRIM_THRESHOLD, 256 << 20);
    return true;
  }();
  (void)tuned;
#endif
  Trainer trainer(cfg, std::move(g), std::move(dm));
  if (cfg.updates > 0 && data.rows() < cfg.batch_size) {
    throw ContractError("train: dataset has fewer rows than the batch size");
  }
  if (data.cols() != trainer.generator().output_dim()) {
    throw ShapeError("train: data dimension does not match the generator output");
  }
  require_finite(data, "training data");
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                    0x7472u};
  std::mt19937_64 rng(seq);
  MinibatchSampler sampler(data, rng);
  TrainedModel out;
  for (long t = 1; t <= cfg.updates; ++t) {
    trainer.iterate(t, sampler, rng);
    if (t % cfg.log_interval == 0 || t == cfg.updates) {
      out.history.push_back(trainer.log_row(t));
      if (progress) progress(out.history.back());
    }
  }
  out.generator = trainer.generator();
  out.discriminator = trainer.discriminator();
  return out;
}

}  // namespace ggan
