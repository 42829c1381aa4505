#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ggan {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Thrown when operand dimensions do not line up.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a precondition of an operation is violated.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Thrown when a computation produces NaN or Inf.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void require_finite(const Matrix& m, std::string_view what);
void require_finite(const Vector& v, std::string_view what);

/// Builds a matrix from row-major data, validating size and finiteness.
Matrix matrix_from_rows(Index rows, Index cols, std::span<const double> data);

Matrix matmul(const Matrix& a, const Matrix& b);
Vector relu(const Vector& x);

/// One affine map x -> weight * x + bias.
struct AffineLayer {
  Matrix weight;
  Vector bias;
};

/// Identifies a trainable array registered on a tape.
struct ParamId {
  int value = 0;
  friend auto operator<=>(const ParamId&, const ParamId&) = default;
};

using GradientMap = std::map<ParamId, Matrix>;

/// Reverse-mode differentiation over matrix-valued nodes.
///
/// Batches are laid out with one sample per row. A tape records exactly one
/// forward pass and supports one call to backward(). Parameters referenced
/// more than once accumulate their gradients additively.
class GradTape {
 public:
  struct Var {
    std::size_t index = 0;
  };

  Var constant(Matrix value);
  Var parameter(ParamId id, Matrix value);

  Var matmul(Var a, Var b);
  /// a * b^T
  Var matmul_nt(Var a, Var b);
  /// Adds the column vector `bias` (m x 1) to every row of x (n x m).
  Var add_bias(Var x, Var bias);
  /// Elementwise max(x, 0); the reverse pass uses the mask 1{x > 0}.
  Var relu(Var x);
  /// Elementwise product with a constant matrix.
  Var hadamard_const(Var x, const Matrix& mask);
  /// Elementwise clamp into [-bound, bound].
  Var clamp(Var x, double bound);
  /// Repeats a 1 x m row `rows` times.
  Var broadcast_rows(Var row, Index rows);
  /// Euclidean norm of each row as an n x 1 column; subgradient 0 at a zero row.
  Var row_norms(Var x);
  Var square(Var x);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var scale(Var x, double s);
  Var add_scalar(Var x, double s);
  /// Mean of all entries, as a 1 x 1 node.
  Var mean(Var x);
  /// weight / sigma with sigma = max(|weight^T u|, 1e-12), u held constant.
  Var spectral_scaled(Var weight, const Vector& u);

  [[nodiscard]] const Matrix& value(Var v) const { return nodes_.at(v.index).value; }
  [[nodiscard]] double scalar(Var v) const;
  [[nodiscard]] std::size_t size() const { return nodes_.size(); }

  /// Gradient of a 1 x 1 node with respect to every registered parameter.
  GradientMap backward(Var loss);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::function<void(GradTape&, std::size_t)> reverse;
    std::optional<ParamId> param;
    bool tracked = false;  // depends on at least one parameter
  };

  Var push(Matrix value, std::function<void(GradTape&, std::size_t)> reverse,
           std::initializer_list<Var> parents);
  [[nodiscard]] bool tracked(Var v) const { return nodes_[v.index].tracked; }
  Matrix& grad_of(std::size_t index);
  void accumulate(std::size_t index, const Matrix& g);

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

/// Vars for one affine-ReLU chain recorded on a tape.
struct ChainVars {
  std::vector<GradTape::Var> weights;
  std::vector<GradTape::Var> biases;
};

/// Output node plus the 0/1 ReLU masks (one per hidden layer) of a recorded chain.
struct ChainRecord {
  GradTape::Var output;
  std::vector<Matrix> masks;
};

/// Records T_L o relu o ... o relu o T_0 applied row-wise to `input`.
ChainRecord record_chain(GradTape& tape, GradTape::Var input, const ChainVars& chain);

/// Records the per-sample input gradient of a scalar-output chain, with the
/// activation masks treated as constants. Rows of the result are gradients.
GradTape::Var record_input_gradient(GradTape& tape, const ChainVars& chain,
                                    const std::vector<Matrix>& masks, Index batch);

/// Registers every layer of `net` as parameters 2l (weight) and 2l+1 (bias).
ChainVars register_chain(GradTape& tape, std::span<const AffineLayer> net, int first_id = 0);

/// Forward pass of an affine-ReLU chain on a batch (rows are samples).
Matrix chain_forward(std::span<const AffineLayer> net, const Matrix& batch);

/// Gradient of a scalar affine-ReLU chain with respect to its input.
Vector input_gradient(std::span<const AffineLayer> net, const Vector& x);

/// Gradient of (|grad_x f(x)| - 1)^2 with respect to every layer of `net`,
/// activation masks held fixed. Bias gradients are identically zero.
std::vector<AffineLayer> grad_of_input_grad_norm(std::span<const AffineLayer> net,
                                                 const Vector& x);

}  // namespace ggan
