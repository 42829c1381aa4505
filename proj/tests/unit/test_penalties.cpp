#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ggan/penalties.hpp"
#include "oracles.hpp"

#include <cmath>

using namespace ggan;

namespace {

GeneratorModel random_generator(std::mt19937_64& rng, Index d = 4, Index width = 5, Index depth = 3) {
  auto g = init_generator(d, width, depth, 3, InitSpec{0.5, 0.0, rng()});
  for (auto& l : g.layers) l.bias = oracle::random_vector(rng, l.bias.size(), 0.5);
  return g;
}

double row_norm_sum(const Matrix& b) {
  double total = 0.0;
  for (Index i = 0; i < b.rows(); ++i) {
    double ss = 0.0;
    for (Index j = 0; j < b.cols(); ++j) ss += b(i, j) * b(i, j);
    total += std::sqrt(ss);
  }
  return total;
}

double abs_sum(const std::vector<AffineLayer>& theta) {
  double s = 0.0;
  for (const auto& l : theta) {
    for (Index i = 0; i < l.weight.size(); ++i) s += std::abs(l.weight.data()[i]);
    for (Index i = 0; i < l.bias.size(); ++i) s += std::abs(l.bias(i));
  }
  return s;
}

}  // namespace

TEST_CASE("group_row_penalty") {
  Matrix b(2, 2);
  b << 3, 4, 0, 0;
  CHECK(group_row_penalty(b) == 5.0);
  CHECK(group_row_penalty(Matrix::Zero(3, 3)) == 0.0);
  std::mt19937_64 rng(1);
  const Matrix r = oracle::random_matrix(rng, 4, 4);
  CHECK(std::abs(group_row_penalty(r) - row_norm_sum(r)) <= 1e-12);
}

TEST_CASE("group_row_penalty is absolutely homogeneous and nonnegative") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 25; ++trial) {
    const Matrix b = oracle::random_matrix(rng, 6, 6);
    const double c = std::normal_distribution<double>(0.0, 3.0)(rng);
    CHECK(std::abs(group_row_penalty(c * b) - std::abs(c) * group_row_penalty(b)) <= 1e-12 * (1 + std::abs(c) * 10));
    CHECK(group_row_penalty(b) > 0.0);
  }
}

TEST_CASE("group_row_subgradient") {
  Matrix b(2, 2);
  b << 3, 4, 0, 0;
  Matrix expect(2, 2);
  expect << 0.6, 0.8, 0, 0;
  CHECK((group_row_subgradient(b) - expect).cwiseAbs().maxCoeff() <= 1e-15);

  std::mt19937_64 rng(3);
  Matrix r = oracle::random_matrix(rng, 5, 4);
  const Matrix fd = oracle::finite_difference([&] { return group_row_penalty(r); }, r, 1e-6);
  CHECK(oracle::rel_err(group_row_subgradient(r), fd) <= 1e-5);
}

TEST_CASE("depth_penalty") {
  SUBCASE("collapsed hidden layers give zero") {
    auto g = init_generator(3, 4, 3, 2, InitSpec{});
    for (int l = 1; l <= 2; ++l) {
      g.layers[l].weight = Matrix::Identity(4, 4);
      g.layers[l].bias.setZero();
    }
    CHECK(depth_penalty(g) == 0.0);
  }
  SUBCASE("hand sum with one extra entry and a bias") {
    auto g = init_generator(2, 2, 2, 2, InitSpec{});
    g.layers[1].weight = Matrix::Identity(2, 2);
    g.layers[1].weight(0, 1) = 0.3;
    g.layers[1].bias << 0.1, 0.0;
    CHECK(depth_penalty(g) == doctest::Approx(0.4).epsilon(1e-15));
  }
  SUBCASE("first and last affine maps are excluded") {
    std::mt19937_64 rng(4);
    auto g = random_generator(rng);
    const double before = depth_penalty(g);
    g.layers.front().weight(0, 0) += 5.0;
    g.layers.back().bias(0) -= 2.0;
    g.input_map(1, 1) += 1.0;
    CHECK(depth_penalty(g) == before);
  }
  SUBCASE("equals a direct oracle sum") {
    std::mt19937_64 rng(5);
    const auto g = random_generator(rng, 4, 6, 4);
    double s = 0.0;
    for (std::size_t l = 1; l + 1 < g.layers.size(); ++l) {
      const Matrix d = g.layers[l].weight - Matrix::Identity(6, 6);
      s += d.cwiseAbs().sum() + g.layers[l].bias.cwiseAbs().sum();
    }
    CHECK(std::abs(depth_penalty(g) - s) <= 1e-12);
    CHECK(depth_penalty(g) > 0.0);
  }
  SUBCASE("non-square hidden layer is a contract error") {
    auto g = init_generator(2, 3, 3, 2, InitSpec{});
    g.layers[1].weight = Matrix::Zero(3, 4);
    g.layers[2].weight = Matrix::Zero(3, 3);
    CHECK_THROWS_AS(depth_penalty(g), ContractError);
    CHECK_THROWS_AS(depth_subgradient(g), ContractError);
  }
}

TEST_CASE("depth_subgradient matches finite differences and vanishes outside hidden layers") {
  std::mt19937_64 rng(6);
  auto g = random_generator(rng, 3, 5, 3);
  const auto sub = depth_subgradient(g);
  CHECK(sub.front().weight == Matrix::Zero(5, 3));
  CHECK(sub.back().bias == Vector::Zero(3));
  for (std::size_t l = 1; l + 1 < g.layers.size(); ++l) {
    const Matrix fd = oracle::finite_difference([&] { return depth_penalty(g); }, g.layers[l].weight, 1e-6);
    const Vector fb = oracle::finite_difference([&] { return depth_penalty(g); }, g.layers[l].bias, 1e-6);
    CHECK(oracle::rel_err(sub[l].weight, fd) <= 1e-5);
    CHECK(oracle::rel_err(sub[l].bias, fb) <= 1e-5);
  }
  // sign(0) = 0 exactly on identity entries
  g.layers[1].weight = Matrix::Identity(5, 5);
  g.layers[1].bias.setZero();
  const auto flat = depth_subgradient(g);
  CHECK(flat[1].weight == Matrix::Zero(5, 5));
  CHECK(flat[1].bias == Vector::Zero(5));
}

TEST_CASE("sparsity_penalty") {
  CHECK(sparsity_penalty({{Matrix::Zero(2, 3), Vector::Zero(2)}}) == 0.0);
  Matrix w(1, 2);
  w << 1, -2;
  CHECK(sparsity_penalty({{w, Vector::Constant(1, 3.0)}}) == 6.0);
  std::mt19937_64 rng(7);
  const auto g = random_generator(rng, 4, 7, 3);
  CHECK(std::abs(sparsity_penalty(g.layers) - abs_sum(g.layers)) <= 1e-12);
}

TEST_CASE("sparsity_subgradient is the elementwise sign") {
  std::mt19937_64 rng(8);
  auto g = random_generator(rng, 3, 4, 2);
  g.layers[0].weight(0, 0) = 0.0;
  const auto sub = sparsity_subgradient(g.layers);
  CHECK(sub[0].weight(0, 0) == 0.0);
  g.layers[0].weight(0, 0) = 0.7;
  const auto sub2 = sparsity_subgradient(g.layers);
  for (std::size_t l = 0; l < g.layers.size(); ++l) {
    const Matrix fd = oracle::finite_difference([&] { return sparsity_penalty(g.layers); }, g.layers[l].weight, 1e-6);
    CHECK(oracle::rel_err(sub2[l].weight, fd) <= 1e-5);
  }
}

TEST_CASE("truncate_rows") {
  Matrix b(3, 2);
  b << 3, 4, 0.003, 0.004, 0.012, 0.016;  // norms 5, 0.005, 0.02
  const Matrix t = truncate_rows(b, 0.01);
  CHECK(t.row(0) == b.row(0));
  CHECK(t.row(1).norm() == 0.0);
  CHECK(t.row(2) == b.row(2));
  CHECK(truncate_rows(b, 0.0) == b);

  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix r = oracle::random_matrix(rng, 12, 4, 0.3);
    const double tau = 0.6;
    const Matrix once = truncate_rows(r, tau);
    CHECK(truncate_rows(once, tau) == once);
    for (Index i = 0; i < once.rows(); ++i) {
      const double n = once.row(i).norm();
      CHECK((n == 0.0 || n > tau));
      if (n > 0.0) CHECK(once.row(i) == r.row(i));
    }
  }
  CHECK_THROWS(truncate_rows(b, -1.0));
}

TEST_CASE("truncate_params") {
  Matrix w(1, 3);
  w << 0.2, -0.005, 0.011;
  const auto t = truncate_params({{w, Vector::Constant(1, 0.01)}}, 0.01);
  Matrix expect(1, 3);
  expect << 0.2, 0.0, 0.011;
  CHECK(t[0].weight == expect);
  CHECK(t[0].bias(0) == 0.0);
  CHECK(truncate_params({{w, Vector::Constant(1, 0.01)}}, 0.0)[0].weight == w);

  std::mt19937_64 rng(10);
  const auto g = random_generator(rng, 4, 6, 3);
  const auto once = truncate_params(g.layers, 0.3);
  const auto twice = truncate_params(once, 0.3);
  for (std::size_t l = 0; l < once.size(); ++l) {
    CHECK(once[l].weight == twice[l].weight);
    CHECK(once[l].bias == twice[l].bias);
    CHECK(((once[l].weight.array() == 0.0) || (once[l].weight.array().abs() > 0.3)).all());
  }
}

TEST_CASE("schedule_step") {
  const PenaltyConfig base{0.002, 0.01, 1e-6, 0.01, 0.01};
  SUBCASE("three expansions by t = 300") {
    PenaltyConfig p = base;
    for (long t = 1; t <= 300; ++t) p = schedule_step(p, ScheduleState{1.1, 0.9, 100, 20000, t});
    CHECK(p.lambda1 == doctest::Approx(0.002 * std::pow(1.1, 3)).epsilon(1e-14));
    CHECK(p.tau1 == base.tau1);
  }
  SUBCASE("off-interval iterations are unchanged") {
    const PenaltyConfig p = schedule_step(base, ScheduleState{1.1, 0.9, 100, 20000, 250});
    CHECK(p.lambda1 == base.lambda1);
    CHECK(p.lambda2 == base.lambda2);
    CHECK(p.lambda3 == base.lambda3);
  }
  SUBCASE("a full run expands 100 times and shrinks 100 times") {
    PenaltyConfig p = base;
    int up = 0, down = 0;
    for (long t = 1; t <= 20000; ++t) {
      const PenaltyConfig next = schedule_step(p, ScheduleState{1.1, 0.9, 100, 20000, t});
      if (next.lambda1 > p.lambda1) ++up;
      if (next.lambda1 < p.lambda1) ++down;
      p = next;
    }
    CHECK(up == 100);
    CHECK(down == 100);
    CHECK(p.lambda1 == doctest::Approx(0.002 * std::pow(1.1 * 0.9, 100)).epsilon(1e-12));
    CHECK(p.lambda3 == doctest::Approx(1e-6 * std::pow(1.1 * 0.9, 100)).epsilon(1e-12));
  }
  SUBCASE("closed form after a expansions and b shrinkages for other horizons") {
    for (long total : {1000L, 5000L, 1234L}) {
      PenaltyConfig p = base;
      int a = 0, b = 0;
      for (long t = 1; t <= total; ++t) {
        if (t % 100 == 0) (2 * t <= total ? a : b) += 1;
        p = schedule_step(p, ScheduleState{1.1, 0.9, 100, total, t});
      }
      CHECK(p.lambda2 == doctest::Approx(0.01 * std::pow(1.1, a) * std::pow(0.9, b)).epsilon(1e-12));
    }
  }
  SUBCASE("invalid schedules are rejected") {
    CHECK_THROWS(schedule_step(base, ScheduleState{0.9, 0.9, 100, 10, 1}));
    CHECK_THROWS(schedule_step(base, ScheduleState{1.1, 1.2, 100, 10, 1}));
    CHECK_THROWS(schedule_step(base, ScheduleState{1.1, 0.9, 0, 10, 1}));
    CHECK_THROWS(schedule_step(base, ScheduleState{1.1, 0.9, 100, 10, 11}));
  }
}

TEST_CASE("penalties vanish exactly on their zero configurations") {
  auto g = init_generator(3, 4, 3, 2, InitSpec{});
  for (auto& l : g.layers) {
    l.weight.setZero();
    l.bias.setZero();
  }
  CHECK(sparsity_penalty(g.layers) == 0.0);
  CHECK(group_row_penalty(Matrix::Zero(3, 3)) == 0.0);
  for (int l = 1; l <= 2; ++l) g.layers[l].weight = Matrix::Identity(4, 4);
  CHECK(depth_penalty(g) == 0.0);
  CHECK(sparsity_penalty(g.layers) > 0.0);
}

TEST_CASE("PenaltyConfig rejects negative values") {
  CHECK_THROWS(PenaltyConfig{-1.0, 0, 0, 0, 0}.validate());
  CHECK_THROWS(PenaltyConfig{0, 0, 0, 0, -0.1}.validate());
  CHECK_NOTHROW(PenaltyConfig{0.1, 0.2, 0.3, 0.01, 0.01}.validate());
}
