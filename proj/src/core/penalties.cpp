#include "ggan/penalties.hpp"

#include <cmath>

namespace ggan {

namespace {

Matrix sign_of(const Matrix& m) {
  return m.unaryExpr([](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

void require_square_hidden(const GeneratorModel& g) {
  for (std::size_t l = 1; l + 1 < g.layers.size(); ++l) {
    if (g.layers[l].weight.rows() != g.layers[l].weight.cols()) {
      throw ContractError("depth penalty: hidden layer " + std::to_string(l) + " is not square");
    }
  }
}

}  // namespace

void PenaltyConfig::validate() const {
  if (lambda1 < 0 || lambda2 < 0 || lambda3 < 0 || tau1 < 0 || tau2 < 0) {
    throw ContractError("penalty config: all weights and thresholds must be >= 0");
  }
}

void ScheduleState::validate() const {
  if (!(delta1 > 1.0)) throw ContractError("schedule: expansion factor must be > 1");
  if (!(delta2 > 0.0 && delta2 < 1.0)) {
    throw ContractError("schedule: shrinkage factor must lie in (0, 1)");
  }
  if (interval < 1) throw ContractError("schedule: interval must be >= 1");
}

double group_row_penalty(const Matrix& b) { return b.rowwise().norm().sum(); }

Matrix group_row_subgradient(const Matrix& b) {
  Matrix out = Matrix::Zero(b.rows(), b.cols());
  for (Index i = 0; i < b.rows(); ++i) {
    const double n = b.row(i).norm();
    if (n > 0.0) out.row(i) = b.row(i) / n;
  }
  return out;
}

double depth_penalty(const GeneratorModel& g) {
  require_square_hidden(g);
  double total = 0.0;
  for (std::size_t l = 1; l + 1 < g.layers.size(); ++l) {
    const auto& layer = g.layers[l];
    const Index w = layer.weight.rows();
    total += (layer.weight - Matrix::Identity(w, w)).cwiseAbs().sum();
    total += layer.bias.cwiseAbs().sum();
  }
  return total;
}

std::vector<AffineLayer> depth_subgradient(const GeneratorModel& g) {
  require_square_hidden(g);
  std::vector<AffineLayer> out;
  out.reserve(g.layers.size());
  for (std::size_t l = 0; l < g.layers.size(); ++l) {
    const auto& layer = g.layers[l];
    if (l == 0 || l + 1 == g.layers.size()) {
      out.push_back({Matrix::Zero(layer.weight.rows(), layer.weight.cols()),
                     Vector::Zero(layer.bias.size())});
      continue;
    }
    const Index w = layer.weight.rows();
    out.push_back({sign_of(layer.weight - Matrix::Identity(w, w)),
                   sign_of(Matrix(layer.bias)).col(0)});
  }
  return out;
}

double sparsity_penalty(const std::vector<AffineLayer>& theta) {
  double total = 0.0;
  for (const auto& layer : theta) {
    total += layer.weight.cwiseAbs().sum() + layer.bias.cwiseAbs().sum();
  }
  return total;
}

std::vector<AffineLayer> sparsity_subgradient(const std::vector<AffineLayer>& theta) {
  std::vector<AffineLayer> out;
  out.reserve(theta.size());
  for (const auto& layer : theta) {
    out.push_back({sign_of(layer.weight), sign_of(Matrix(layer.bias)).col(0)});
  }
  return out;
}

Matrix truncate_rows(const Matrix& b, double tau1) {
  if (tau1 < 0) throw ContractError("truncate_rows: tau1 must be >= 0");
  Matrix out = b;
  for (Index i = 0; i < out.rows(); ++i) {
    if (out.row(i).norm() <= tau1) out.row(i).setZero();
  }
  return out;
}

std::vector<AffineLayer> truncate_params(const std::vector<AffineLayer>& theta, double tau2) {
  if (tau2 < 0) throw ContractError("truncate_params: tau2 must be >= 0");
  auto cut = [tau2](double x) { return std::abs(x) <= tau2 ? 0.0 : x; };
  std::vector<AffineLayer> out;
  out.reserve(theta.size());
  for (const auto& layer : theta) {
    out.push_back({layer.weight.unaryExpr(cut), layer.bias.unaryExpr(cut)});
  }
  return out;
}

PenaltyConfig schedule_step(const PenaltyConfig& cfg, const ScheduleState& s) {
  s.validate();
  if (s.t < 0 || s.t > s.total) throw ContractError("schedule_step: iteration out of range");
  if (s.t == 0 || s.t % s.interval != 0) return cfg;
  // 2t <= T is the first half for 1-based iteration counts.
  const double factor = 2 * s.t <= s.total ? s.delta1 : s.delta2;
  PenaltyConfig out = cfg;
  out.lambda1 *= factor;
  out.lambda2 *= factor;
  out.lambda3 *= factor;
  return out;
}

}  // namespace ggan
