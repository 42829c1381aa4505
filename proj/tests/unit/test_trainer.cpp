#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ggan/metrics.hpp"
#include "ggan/penalties.hpp"
#include "ggan/trainer.hpp"
#include "oracles.hpp"
#include "plain_gan.hpp"

#include <cmath>

using namespace ggan;

namespace {

struct Tiny {
  GeneratorModel g;
  DiscriminatorModel d;
  Matrix data;
};

Tiny tiny(CriticRegularization mode, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  Tiny t;
  t.g = init_generator(4, 6, 3, 5, InitSpec{0.4, 0.0, seed});
  t.g.output_bound = 50.0;
  t.d = init_discriminator(5, 6, 2, mode, InitSpec{0.4, 0.0, seed + 1});
  t.data = oracle::random_matrix(rng, 40, 5);
  // random biases keep every pre-activation off the relu kink
  for (auto& l : t.g.layers) l.bias = oracle::random_vector(rng, l.bias.size(), 0.1);
  for (auto& l : t.d.layers) l.bias = oracle::random_vector(rng, l.bias.size(), 0.1);
  return t;
}

TrainConfig tiny_config(long updates) {
  TrainConfig c;
  c.batch_size = 8;
  c.critic_steps = 2;
  c.updates = updates;
  c.interval = 5;
  c.log_interval = 5;
  c.penalty = PenaltyConfig{0.01, 0.001, 1e-4, 0.05, 0.02};
  c.seed = 99;
  return c;
}

bool same_layers(const std::vector<AffineLayer>& a, const std::vector<AffineLayer>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t l = 0; l < a.size(); ++l) {
    if (a[l].weight != b[l].weight || a[l].bias != b[l].bias) return false;
  }
  return true;
}

double max_diff(const std::vector<AffineLayer>& a, const oracle::Params& p) {
  double m = 0.0;
  for (std::size_t l = 0; l < a.size(); ++l) {
    m = std::max(m, (a[l].weight - p[2 * l]).cwiseAbs().maxCoeff());
    m = std::max(m, (a[l].bias - p[2 * l + 1].col(0)).cwiseAbs().maxCoeff());
  }
  return m;
}

}  // namespace

TEST_CASE("adam_step") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    Matrix p = Matrix::Constant(2, 2, 0.5);
    AdamState s;
    std::vector<ParamRef> refs{ParamRef(p.data(), 2, 2)};
    std::vector<Matrix> g{Matrix::Zero(2, 2)};
    for (int i = 0; i < 3; ++i) adam_step(s, refs, g);
    CHECK(p == Matrix::Constant(2, 2, 0.5));
  }
  SUBCASE("first step with unit gradient") {
    Matrix p = Matrix::Zero(1, 1);
    AdamState s;
    std::vector<ParamRef> refs{ParamRef(p.data(), 1, 1)};
    std::vector<Matrix> g{Matrix::Ones(1, 1)};
    adam_step(s, refs, g);
    CHECK(p(0, 0) == doctest::Approx(-2e-4 / (1.0 + 1e-8)).epsilon(1e-14));
  }
  SUBCASE("ten steps on p^2 follow the scalar recurrence") {
    for (double b1 : {0.0, 0.5}) {
      Matrix p = Matrix::Ones(1, 1);
      AdamState s;
      s.beta1 = b1;
      oracle::ScalarAdam ref{2e-4, b1, 0.9, 1e-8};
      double q = 1.0;
      std::vector<ParamRef> refs{ParamRef(p.data(), 1, 1)};
      for (int i = 0; i < 10; ++i) {
        std::vector<Matrix> g{Matrix::Constant(1, 1, 2.0 * p(0, 0))};
        adam_step(s, refs, g);
        q = ref.step(q, 2.0 * q);
        CHECK(std::abs(p(0, 0) - q) <= 1e-12);
      }
    }
  }
  SUBCASE("mismatched gradient shapes are rejected") {
    Matrix p = Matrix::Zero(2, 1);
    AdamState s;
    std::vector<ParamRef> refs{ParamRef(p.data(), 2, 1)};
    std::vector<Matrix> g{Matrix::Zero(1, 2)};
    CHECK_THROWS_AS(adam_step(s, refs, g), ShapeError);
  }
}

TEST_CASE("discriminator_loss") {
  SUBCASE("zero critic: loss 0 plus the penalty at a zero input gradient") {
    auto t = tiny(CriticRegularization::gradient_penalty);
    for (auto& l : t.d.layers) {
      l.weight.setZero();
      l.bias.setZero();
    }
    const Matrix fake = t.data.bottomRows(8);
    const Vector mix = Vector::Constant(8, 0.4);
    CHECK(discriminator_loss(t.d, t.data.topRows(8), fake, mix, 10.0).value == doctest::Approx(10.0));
    CHECK(discriminator_loss(t.d, t.data.topRows(8), fake, mix, 0.0).value == 0.0);
  }
  SUBCASE("identical batches without a penalty give zero") {
    auto t = tiny(CriticRegularization::spectral_norm);
    const Matrix x = t.data.topRows(8);
    CHECK(std::abs(discriminator_loss(t.d, x, x, Vector::Zero(8), 10.0).value) <= 1e-15);
  }
  SUBCASE("unequal batches are a shape error") {
    auto t = tiny(CriticRegularization::gradient_penalty);
    CHECK_THROWS_AS(discriminator_loss(t.d, t.data.topRows(8), t.data.topRows(7),
                                       Vector::Zero(8), 10.0),
                    ShapeError);
  }
  SUBCASE("gradients match finite differences in both modes") {
    for (auto mode : {CriticRegularization::gradient_penalty, CriticRegularization::spectral_norm}) {
      CAPTURE(to_string(mode));
      auto t = tiny(mode, 5);
      std::mt19937_64 rng(6);
      const Matrix real = t.data.topRows(6);
      const Matrix fake = oracle::random_matrix(rng, 6, 5);
      Vector mix(6);
      mix << 0.1, 0.5, 0.9, 0.3, 0.7, 0.2;
      const auto lg = discriminator_loss(t.d, real, fake, mix, 10.0);
      for (std::size_t l = 0; l < t.d.layers.size(); ++l) {
        auto f = [&] { return discriminator_loss(t.d, real, fake, mix, 10.0).value; };
        const Matrix fw = oracle::finite_difference(f, t.d.layers[l].weight, 1e-6);
        const Vector fb = oracle::finite_difference(f, t.d.layers[l].bias, 1e-6);
        CHECK(oracle::rel_err(lg.grads.at(ParamId{static_cast<int>(2 * l)}), fw) <= 1e-3);
        CHECK(oracle::rel_err(lg.grads.at(ParamId{static_cast<int>(2 * l + 1)}), fb, 1e-6) <= 1e-3);
      }
    }
  }
}

TEST_CASE("generator_loss") {
  auto t = tiny(CriticRegularization::spectral_norm, 3);
  std::mt19937_64 rng(4);
  const Matrix noise = oracle::random_matrix(rng, 7, 4);
  SUBCASE("with all weights zero it is the plain adversarial loss") {
    const double expect = -discriminator_forward(t.d, generator_forward(t.g, noise)).mean();
    CHECK(std::abs(generator_loss(t.g, t.d, noise, PenaltyConfig{}).value - expect) <= 1e-13);
  }
  SUBCASE("zero critic with lambda1 = 1 is M(B)") {
    for (auto& l : t.d.layers) {
      l.weight.setZero();
      l.bias.setZero();
    }
    const auto lg = generator_loss(t.g, t.d, noise, PenaltyConfig{1.0, 0, 0, 0, 0});
    CHECK(lg.value == doctest::Approx(group_row_penalty(t.g.input_map)).epsilon(1e-14));
  }
  SUBCASE("gradients match finite differences with every penalty on") {
    const PenaltyConfig pen{0.3, 0.05, 0.01, 0, 0};
    const auto lg = generator_loss(t.g, t.d, noise, pen);
    auto f = [&] { return generator_loss(t.g, t.d, noise, pen).value; };
    const Matrix fd_b = oracle::finite_difference(f, t.g.input_map, 1e-6);
    CHECK(oracle::rel_err(lg.grads.at(generator_input_map_id()), fd_b) <= 1e-3);
    for (std::size_t l = 0; l < t.g.layers.size(); ++l) {
      const Matrix fw = oracle::finite_difference(f, t.g.layers[l].weight, 1e-6);
      const Vector fb = oracle::finite_difference(f, t.g.layers[l].bias, 1e-6);
      CHECK(oracle::rel_err(lg.grads.at(generator_weight_id(l)), fw) <= 1e-3);
      CHECK(oracle::rel_err(lg.grads.at(generator_bias_id(l)), fb) <= 1e-3);
    }
  }
}

TEST_CASE("train with T = 0 returns the initial models") {
  auto t = tiny(CriticRegularization::spectral_norm);
  const auto out = train(t.data, tiny_config(0), t.g, t.d);
  CHECK(out.generator.input_map == t.g.input_map);
  CHECK(same_layers(out.generator.layers, t.g.layers));
  CHECK(same_layers(out.discriminator.layers, t.d.layers));
  CHECK(out.history.empty());
}

TEST_CASE("training is bit-for-bit deterministic for a fixed seed") {
  for (auto mode : {CriticRegularization::gradient_penalty, CriticRegularization::spectral_norm}) {
    auto t = tiny(mode);
    const auto a = train(t.data, tiny_config(20), t.g, t.d);
    const auto b = train(t.data, tiny_config(20), t.g, t.d);
    CHECK(a.generator.input_map == b.generator.input_map);
    CHECK(same_layers(a.generator.layers, b.generator.layers));
    CHECK(same_layers(a.discriminator.layers, b.discriminator.layers));
    TrainConfig other = tiny_config(20);
    other.seed = 100;
    const auto c = train(t.data, other, t.g, t.d);
    CHECK_FALSE(same_layers(a.generator.layers, c.generator.layers));
  }
}

TEST_CASE("a non-finite loss aborts with the iteration and the term") {
  auto t = tiny(CriticRegularization::gradient_penalty);
  // finite weights whose products overflow
  for (auto& l : t.d.layers) l.weight *= 1e120;
  try {
    train(t.data, tiny_config(5), t.g, t.d);
    FAIL("expected a NumericError");
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("iteration 1") != std::string::npos);
    CHECK(msg.find("loss") != std::string::npos);
  }
}

TEST_CASE("train checks its inputs") {
  auto t = tiny(CriticRegularization::gradient_penalty);
  TrainConfig c = tiny_config(3);
  c.batch_size = 100;
  CHECK_THROWS_AS(train(t.data, c, t.g, t.d), ContractError);
  CHECK_THROWS_AS(train(Matrix(t.data.leftCols(3)), tiny_config(3), t.g, t.d), ShapeError);
  TrainConfig bad = tiny_config(3);
  bad.critic_steps = 0;
  CHECK_THROWS(bad.validate());
  bad = tiny_config(3);
  bad.learning_rate = -1.0;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("the trainer follows the penalty schedule") {
  auto t = tiny(CriticRegularization::spectral_norm);
  TrainConfig c = tiny_config(40);
  const auto out = train(t.data, c, t.g, t.d);
  // multiples of 5 up to 40: 5..20 expand (2t <= 40), 25..40 shrink
  const double expect = c.penalty.lambda1 * std::pow(1.1, 4) * std::pow(0.9, 4);
  CHECK(out.history.back().lambda1 == doctest::Approx(expect).epsilon(1e-13));
  CHECK(out.history.back().iteration == 40);
  CHECK(out.history.size() == 8);
}

TEST_CASE("logged penalties equal recomputation from the final parameters") {
  auto t = tiny(CriticRegularization::spectral_norm);
  const auto out = train(t.data, tiny_config(30), t.g, t.d);
  const LogRow& last = out.history.back();
  CHECK(last.group_row == group_row_penalty(out.generator.input_map));
  CHECK(last.depth == depth_penalty(out.generator));
  CHECK(last.sparsity == sparsity_penalty(out.generator.layers));
  CHECK(last.nonzero_rows == estimated_dim(out.generator.input_map));
}

TEST_CASE("truncation policies") {
  auto t = tiny(CriticRegularization::spectral_norm);
  TrainConfig c = tiny_config(30);
  c.penalty.tau1 = 0.35;
  c.penalty.tau2 = 0.1;
  const auto cut = train(t.data, c, t.g, t.d);
  const Vector norms = cut.generator.input_map.rowwise().norm();
  CHECK(((norms.array() == 0.0) || (norms.array() > 0.35)).all());
  for (const auto& l : cut.generator.layers) {
    CHECK(((l.weight.array() == 0.0) || (l.weight.array().abs() > 0.1)).all());
  }
  CHECK(prop_zero(cut.generator.layers) > 0.0);

  c.truncation = TruncationPolicy::never;
  const auto kept = train(t.data, c, t.g, t.d);
  for (const auto& l : kept.generator.layers) CHECK((l.weight.array() != 0.0).all());

  CHECK(truncation_policy_from("final") == TruncationPolicy::final_only);
  CHECK(truncation_policy_from(to_string(TruncationPolicy::second_half)) ==
        TruncationPolicy::second_half);
  CHECK_THROWS(truncation_policy_from("sometimes"));
}

TEST_CASE("a frozen input map is never updated") {
  auto t = tiny(CriticRegularization::spectral_norm);
  TrainConfig c = tiny_config(15);
  c.train_input_map = false;
  c.penalty = PenaltyConfig{};
  t.g.input_map = Matrix::Identity(4, 4);
  const auto out = train(t.data, c, t.g, t.d);
  CHECK(out.generator.input_map == Matrix::Identity(4, 4));
  CHECK_FALSE(same_layers(out.generator.layers, t.g.layers));
}

TEST_CASE("truncated rows stay zero once their moments are cleared") {
  auto t = tiny(CriticRegularization::gradient_penalty);
  for (auto& l : t.d.layers) {
    l.weight.setZero();
    l.bias.setZero();
  }
  std::mt19937_64 rng(12);
  t.g.input_map = oracle::random_matrix(rng, 4, 4);
  t.g.input_map.row(2) *= 1e-3;
  TrainConfig c = tiny_config(10);
  c.penalty = PenaltyConfig{0.5, 0, 0, 0.01, 0};
  Trainer trainer(c, t.g, t.d);
  const Matrix noise = oracle::random_matrix(rng, 8, 4);
  for (int i = 0; i < 3; ++i) trainer.generator_update(noise);
  CHECK(trainer.generator().input_map.row(2).norm() > 0.0);
  trainer.truncate();
  CHECK(trainer.generator().input_map.row(2).norm() == 0.0);
  for (int i = 0; i < 5; ++i) trainer.generator_update(noise);
  CHECK(trainer.generator().input_map.row(2).norm() == 0.0);
  CHECK(trainer.generator().input_map.row(0).norm() > 0.0);
}

TEST_CASE("MinibatchSampler walks every row once per epoch") {
  Matrix data(12, 1);
  for (Index i = 0; i < 12; ++i) data(i, 0) = static_cast<double>(i);
  std::mt19937_64 rng(3);
  MinibatchSampler sampler(data, rng);
  std::vector<int> seen(12, 0);
  for (int b = 0; b < 3; ++b) {
    const Matrix batch = sampler.next(4);
    for (Index i = 0; i < 4; ++i) ++seen[static_cast<std::size_t>(batch(i, 0))];
  }
  for (int s : seen) CHECK(s == 1);
}

TEST_CASE("with B = I and no penalties one cycle equals a plain WGAN-GP update") {
  std::mt19937_64 rng(2718);
  const Index d = 5, D = 6, n = 16;
  auto g = init_generator(d, 8, 3, D, InitSpec{0.3, 0.0, 1});
  g.input_map = Matrix::Identity(d, d);
  g.output_bound = 1.5;  // low enough that some outputs clip
  for (auto& l : g.layers) l.bias = oracle::random_vector(rng, l.bias.size(), 0.1);
  auto dm = init_discriminator(D, 7, 3, CriticRegularization::gradient_penalty, InitSpec{0.3, 0.0, 2});
  for (auto& l : dm.layers) l.bias = oracle::random_vector(rng, l.bias.size(), 0.1);

  TrainConfig c;
  c.critic_steps = 3;
  c.batch_size = n;
  c.updates = 1;
  c.penalty = PenaltyConfig{};
  c.truncation = TruncationPolicy::never;
  c.train_input_map = false;
  Trainer trainer(c, g, dm);

  oracle::PlainGan plain;
  plain.gen = oracle::flatten(g.layers);
  plain.critic = oracle::flatten(dm.layers);
  plain.bound = g.output_bound;

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int cycle = 0; cycle < 2; ++cycle) {
    for (int k = 0; k < c.critic_steps; ++k) {
      const Matrix real = oracle::random_matrix(rng, n, D, 2.0);
      const Matrix noise = oracle::random_matrix(rng, n, d);
      Vector mix(n);
      for (Index i = 0; i < n; ++i) mix(i) = unit(rng);
      trainer.critic_update(real, noise, mix);
      plain.critic_step(real, noise, mix);
    }
    const Matrix noise = oracle::random_matrix(rng, n, d);
    trainer.generator_update(noise);
    plain.generator_step(noise);
    CHECK(max_diff(trainer.discriminator().layers, plain.critic) <= 1e-10);
    CHECK(max_diff(trainer.generator().layers, plain.gen) <= 1e-10);
  }
}
