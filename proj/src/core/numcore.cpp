#include "ggan/numcore.hpp"

#include <cmath>
#include <utility>

namespace ggan {

namespace {

constexpr double kSigmaFloor = 1e-12;

std::string shape_of(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

void require_finite(const Matrix& m, std::string_view what) {
  if (!m.allFinite()) {
    throw NumericError(std::string(what) + ": non-finite entry");
  }
}

void require_finite(const Vector& v, std::string_view what) {
  if (!v.allFinite()) {
    throw NumericError(std::string(what) + ": non-finite entry");
  }
}

Matrix matrix_from_rows(Index rows, Index cols, std::span<const double> data) {
  if (rows < 0 || cols < 0 || static_cast<std::size_t>(rows * cols) != data.size()) {
    throw ShapeError("matrix_from_rows: expected " + std::to_string(rows * cols) +
                     " entries, got " + std::to_string(data.size()));
  }
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      m(i, j) = data[static_cast<std::size_t>(i * cols + j)];
    }
  }
  require_finite(m, "matrix_from_rows");
  return m;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + shape_of(a) + " * " + shape_of(b));
  }
  return a * b;
}

Vector relu(const Vector& x) { return x.cwiseMax(0.0); }

// ---------------------------------------------------------------------------
// GradTape

GradTape::Var GradTape::push(Matrix value,
                             std::function<void(GradTape&, std::size_t)> reverse,
                             std::initializer_list<Var> parents) {
  bool tracked = false;
  for (Var p : parents) tracked = tracked || nodes_[p.index].tracked;
  nodes_.push_back(Node{std::move(value), Matrix(), tracked ? std::move(reverse) : nullptr,
                        std::nullopt, tracked});
  return Var{nodes_.size() - 1};
}

Matrix& GradTape::grad_of(std::size_t index) {
  auto& node = nodes_[index];
  if (node.grad.size() == 0) {
    node.grad = Matrix::Zero(node.value.rows(), node.value.cols());
  }
  return node.grad;
}

void GradTape::accumulate(std::size_t index, const Matrix& g) { grad_of(index) += g; }

GradTape::Var GradTape::constant(Matrix value) { return push(std::move(value), nullptr, {}); }

GradTape::Var GradTape::parameter(ParamId id, Matrix value) {
  auto v = push(std::move(value), nullptr, {});
  nodes_[v.index].param = id;
  nodes_[v.index].tracked = true;
  return v;
}

GradTape::Var GradTape::matmul(Var a, Var b) {
  const Matrix& av = value(a);
  const Matrix& bv = value(b);
  if (av.cols() != bv.rows()) {
    throw ShapeError("tape matmul: " + shape_of(av) + " * " + shape_of(bv));
  }
  Matrix out = av * bv;
  return push(std::move(out), [a, b](GradTape& t, std::size_t self) {
    const Matrix& g = t.nodes_[self].grad;
    if (t.tracked(a)) t.grad_of(a.index).noalias() += g * t.value(b).transpose();
    if (t.tracked(b)) t.grad_of(b.index).noalias() += t.value(a).transpose() * g;
  }, {a, b});
}

GradTape::Var GradTape::matmul_nt(Var a, Var b) {
  const Matrix& av = value(a);
  const Matrix& bv = value(b);
  if (av.cols() != bv.cols()) {
    throw ShapeError("tape matmul_nt: " + shape_of(av) + " * (" + shape_of(bv) + ")^T");
  }
  Matrix out = av * bv.transpose();
  return push(std::move(out), [a, b](GradTape& t, std::size_t self) {
    const Matrix& g = t.nodes_[self].grad;
    if (t.tracked(a)) t.grad_of(a.index).noalias() += g * t.value(b);
    if (t.tracked(b)) t.grad_of(b.index).noalias() += g.transpose() * t.value(a);
  }, {a, b});
}

GradTape::Var GradTape::add_bias(Var x, Var bias) {
  const Matrix& xv = value(x);
  const Matrix& bv = value(bias);
  if (bv.cols() != 1 || bv.rows() != xv.cols()) {
    throw ShapeError("tape add_bias: " + shape_of(xv) + " + " + shape_of(bv));
  }
  Matrix out = xv.rowwise() + bv.col(0).transpose();
  return push(std::move(out), [x, bias](GradTape& t, std::size_t self) {
    const Matrix& g = t.nodes_[self].grad;
    if (t.tracked(x)) t.grad_of(x.index) += g;
    if (t.tracked(bias)) t.grad_of(bias.index) += g.colwise().sum().transpose();
  }, {x, bias});
}

GradTape::Var GradTape::relu(Var x) {
  Matrix out = value(x).cwiseMax(0.0);
  return push(std::move(out), [x](GradTape& t, std::size_t self) {
    const Matrix& g = t.nodes_[self].grad;
    const Matrix& xv = t.value(x);
    t.grad_of(x.index) += (xv.array() > 0.0).select(g, 0.0);
  }, {x});
}

GradTape::Var GradTape::hadamard_const(Var x, const Matrix& mask) {
  const Matrix& xv = value(x);
  if (xv.rows() != mask.rows() || xv.cols() != mask.cols()) {
    throw ShapeError("tape hadamard_const: " + shape_of(xv) + " vs " + shape_of(mask));
  }
  Matrix out = xv.cwiseProduct(mask);
  return push(std::move(out), [x, mask](GradTape& t, std::size_t self) {
    t.grad_of(x.index) += t.nodes_[self].grad.cwiseProduct(mask);
  }, {x});
}

GradTape::Var GradTape::clamp(Var x, double bound) {
  Matrix out = value(x).cwiseMax(-bound).cwiseMin(bound);
  return push(std::move(out), [x, bound](GradTape& t, std::size_t self) {
    const Matrix& g = t.nodes_[self].grad;
    t.grad_of(x.index) += (t.value(x).array().abs() <= bound).select(g, 0.0);
  }, {x});
}

GradTape::Var GradTape::broadcast_rows(Var row, Index rows) {
  const Matrix& rv = value(row);
  if (rv.rows() != 1) {
    throw ShapeError("tape broadcast_rows: expected a single row, got " + shape_of(rv));
  }
  Matrix out = rv.replicate(rows, 1);
  return push(std::move(out), [row](GradTape& t, std::size_t self) {
    t.grad_of(row.index) += t.nodes_[self].grad.colwise().sum();
  }, {row});
}

GradTape::Var GradTape::row_norms(Var x) {
  Matrix out = value(x).rowwise().norm();
  return push(std::move(out), [x](GradTape& t, std::size_t self) {
    const Matrix& g = t.nodes_[self].grad;
    const Matrix& norms = t.nodes_[self].value;
    const Matrix& xv = t.value(x);
    Matrix& gx = t.grad_of(x.index);
    for (Index i = 0; i < xv.rows(); ++i) {
      if (norms(i, 0) > 0.0) {
        gx.row(i) += (g(i, 0) / norms(i, 0)) * xv.row(i);
      }
    }
  }, {x});
}

GradTape::Var GradTape::square(Var x) {
  Matrix out = value(x).array().square().matrix();
  return push(std::move(out), [x](GradTape& t, std::size_t self) {
    t.grad_of(x.index) += 2.0 * t.nodes_[self].grad.cwiseProduct(t.value(x));
  }, {x});
}

GradTape::Var GradTape::add(Var a, Var b) {
  const Matrix& av = value(a);
  const Matrix& bv = value(b);
  if (av.rows() != bv.rows() || av.cols() != bv.cols()) {
    throw ShapeError("tape add: " + shape_of(av) + " + " + shape_of(bv));
  }
  Matrix out = av + bv;
  return push(std::move(out), [a, b](GradTape& t, std::size_t self) {
    const Matrix& g = t.nodes_[self].grad;
    if (t.tracked(a)) t.grad_of(a.index) += g;
    if (t.tracked(b)) t.grad_of(b.index) += g;
  }, {a, b});
}

GradTape::Var GradTape::sub(Var a, Var b) {
  const Matrix& av = value(a);
  const Matrix& bv = value(b);
  if (av.rows() != bv.rows() || av.cols() != bv.cols()) {
    throw ShapeError("tape sub: " + shape_of(av) + " - " + shape_of(bv));
  }
  Matrix out = av - bv;
  return push(std::move(out), [a, b](GradTape& t, std::size_t self) {
    const Matrix& g = t.nodes_[self].grad;
    if (t.tracked(a)) t.grad_of(a.index) += g;
    if (t.tracked(b)) t.grad_of(b.index) -= g;
  }, {a, b});
}

GradTape::Var GradTape::scale(Var x, double s) {
  Matrix out = s * value(x);
  return push(std::move(out), [x, s](GradTape& t, std::size_t self) {
    t.grad_of(x.index) += s * t.nodes_[self].grad;
  }, {x});
}

GradTape::Var GradTape::add_scalar(Var x, double s) {
  Matrix out = value(x).array() + s;
  return push(std::move(out), [x](GradTape& t, std::size_t self) {
    t.grad_of(x.index) += t.nodes_[self].grad;
  }, {x});
}

GradTape::Var GradTape::mean(Var x) {
  const Matrix& xv = value(x);
  if (xv.size() == 0) {
    throw ContractError("tape mean: empty operand");
  }
  Matrix out(1, 1);
  out(0, 0) = xv.mean();
  return push(std::move(out), [x](GradTape& t, std::size_t self) {
    const double g = t.nodes_[self].grad(0, 0);
    Matrix& gx = t.grad_of(x.index);
    gx.array() += g / static_cast<double>(gx.size());
  }, {x});
}

GradTape::Var GradTape::spectral_scaled(Var weight, const Vector& u) {
  const Matrix& w = value(weight);
  if (u.size() != w.rows()) {
    throw ShapeError("tape spectral_scaled: u has length " + std::to_string(u.size()) +
                     " for weight " + shape_of(w));
  }
  const Vector wtu = w.transpose() * u;
  const double raw = wtu.norm();
  const bool floored = raw < kSigmaFloor;
  const double sigma = floored ? kSigmaFloor : raw;
  Matrix out = w / sigma;
  Vector v = floored ? Vector::Zero(w.cols()) : Vector(wtu / raw);
  return push(std::move(out), [weight, u, v, sigma, floored](GradTape& t, std::size_t self) {
    const Matrix& g = t.nodes_[self].grad;
    Matrix& gw = t.grad_of(weight.index);
    gw += g / sigma;
    if (!floored) {
      const double inner = g.cwiseProduct(t.value(weight)).sum();
      gw.noalias() -= (inner / (sigma * sigma)) * (u * v.transpose());
    }
  }, {weight});
}

double GradTape::scalar(Var v) const {
  const Matrix& m = value(v);
  if (m.rows() != 1 || m.cols() != 1) {
    throw ContractError("tape scalar: node is " + shape_of(m) + ", not 1x1");
  }
  return m(0, 0);
}

GradientMap GradTape::backward(Var loss) {
  if (consumed_) {
    throw ContractError("tape backward: tape already consumed by a reverse pass");
  }
  const Matrix& lv = value(loss);
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw ContractError("tape backward: loss is " + shape_of(lv) + ", not a scalar");
  }
  consumed_ = true;
  grad_of(loss.index)(0, 0) = 1.0;
  for (std::size_t i = loss.index + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (node.grad.size() != 0 && node.reverse) {
      node.reverse(*this, i);
    }
  }
  GradientMap out;
  for (auto& node : nodes_) {
    if (!node.param) continue;
    Matrix g = node.grad.size() != 0 ? std::move(node.grad)
                                     : Matrix::Zero(node.value.rows(), node.value.cols());
    auto [it, inserted] = out.try_emplace(*node.param, g);
    if (!inserted) it->second += g;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Chains

ChainVars register_chain(GradTape& tape, std::span<const AffineLayer> net, int first_id) {
  ChainVars vars;
  for (std::size_t l = 0; l < net.size(); ++l) {
    const int id = first_id + 2 * static_cast<int>(l);
    vars.weights.push_back(tape.parameter(ParamId{id}, net[l].weight));
    vars.biases.push_back(tape.parameter(ParamId{id + 1}, Matrix(net[l].bias)));
  }
  return vars;
}

ChainRecord record_chain(GradTape& tape, GradTape::Var input, const ChainVars& chain) {
  if (chain.weights.empty() || chain.weights.size() != chain.biases.size()) {
    throw ContractError("record_chain: chain needs matching, nonempty weight and bias lists");
  }
  ChainRecord record;
  GradTape::Var h = input;
  const std::size_t last = chain.weights.size() - 1;
  for (std::size_t l = 0; l <= last; ++l) {
    h = tape.add_bias(tape.matmul_nt(h, chain.weights[l]), chain.biases[l]);
    if (l < last) {
      record.masks.push_back((tape.value(h).array() > 0.0).cast<double>().matrix());
      h = tape.relu(h);
    }
  }
  record.output = h;
  return record;
}

GradTape::Var record_input_gradient(GradTape& tape, const ChainVars& chain,
                                    const std::vector<Matrix>& masks, Index batch) {
  const std::size_t layers = chain.weights.size();
  if (layers == 0 || masks.size() + 1 != layers) {
    throw ContractError("record_input_gradient: need one mask per hidden layer");
  }
  if (tape.value(chain.weights.back()).rows() != 1) {
    throw ContractError("record_input_gradient: chain output must be scalar");
  }
  GradTape::Var g = tape.broadcast_rows(chain.weights.back(), batch);
  for (std::size_t l = layers - 1; l-- > 0;) {
    g = tape.hadamard_const(g, masks[l]);
    g = tape.matmul(g, chain.weights[l]);
  }
  return g;
}

Matrix chain_forward(std::span<const AffineLayer> net, const Matrix& batch) {
  Matrix h = batch;
  for (std::size_t l = 0; l < net.size(); ++l) {
    if (h.cols() != net[l].weight.cols()) {
      throw ShapeError("chain_forward: layer " + std::to_string(l) + " expects " +
                       std::to_string(net[l].weight.cols()) + " inputs, got " +
                       std::to_string(h.cols()));
    }
    Matrix next = h * net[l].weight.transpose();
    next.rowwise() += net[l].bias.transpose();
    if (l + 1 < net.size()) next = next.cwiseMax(0.0);
    h = std::move(next);
  }
  return h;
}

Vector input_gradient(std::span<const AffineLayer> net, const Vector& x) {
  GradTape tape;
  auto chain = register_chain(tape, net);
  auto input = tape.constant(Matrix(x.transpose()));
  auto record = record_chain(tape, input, chain);
  auto g = record_input_gradient(tape, chain, record.masks, 1);
  return tape.value(g).row(0).transpose();
}

std::vector<AffineLayer> grad_of_input_grad_norm(std::span<const AffineLayer> net,
                                                 const Vector& x) {
  GradTape tape;
  auto chain = register_chain(tape, net);
  auto input = tape.constant(Matrix(x.transpose()));
  auto record = record_chain(tape, input, chain);
  auto g = record_input_gradient(tape, chain, record.masks, 1);
  auto penalty = tape.mean(tape.square(tape.add_scalar(tape.row_norms(g), -1.0)));
  auto grads = tape.backward(penalty);
  std::vector<AffineLayer> out(net.size());
  for (std::size_t l = 0; l < net.size(); ++l) {
    const int id = 2 * static_cast<int>(l);
    out[l].weight = grads.at(ParamId{id});
    out[l].bias = grads.at(ParamId{id + 1}).col(0);
  }
  return out;
}

}  // namespace ggan
