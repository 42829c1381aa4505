#include "ggan/metrics.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>

namespace ggan {

namespace {

constexpr double kPsdTolerance = -1e-8;

/// Sum of k over all row pairs (i in a, j in b).
double kernel_sum(const Matrix& a, const Matrix& b, const KernelMix& k) {
  // Row-major copies keep each sample contiguous for the distance loop.
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const RowMajor ar = a;
  const RowMajor br = b;
  const Index dim = a.cols();
  double total = 0.0;
  for (Index i = 0; i < ar.rows(); ++i) {
    const double* x = ar.data() + i * dim;
    double row = 0.0;
    for (Index j = 0; j < br.rows(); ++j) {
      const double* y = br.data() + j * dim;
      double d2 = 0.0;
      for (Index c = 0; c < dim; ++c) {
        const double diff = x[c] - y[c];
        d2 += diff * diff;
      }
      row += k(d2);
    }
    total += row;
  }
  return total;
}

Matrix psd_sqrt(const Matrix& c, std::string_view what) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(c);
  if (eig.info() != Eigen::Success) {
    throw NumericError(std::string(what) + ": eigendecomposition failed");
  }
  Vector values = eig.eigenvalues();
  for (Index i = 0; i < values.size(); ++i) {
    if (values(i) < kPsdTolerance) {
      throw ContractError(std::string(what) + ": matrix is not positive semidefinite (eigenvalue " +
                          std::to_string(values(i)) + ")");
    }
    values(i) = std::sqrt(std::max(values(i), 0.0));
  }
  return eig.eigenvectors() * values.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

void KernelMix::validate() const {
  if (bandwidths.empty()) throw ContractError("kernel mix: no bandwidths");
  for (double s : bandwidths) {
    if (!(s > 0.0)) throw ContractError("kernel mix: bandwidths must be > 0");
  }
}

double KernelMix::operator()(double squared_distance) const {
  double total = 0.0;
  for (double s : bandwidths) total += std::exp(-squared_distance / (2.0 * s));
  return total;
}

double mmd_squared(const Matrix& a, const Matrix& b, const KernelMix& k) {
  if (a.rows() == 0 || b.rows() == 0) throw ContractError("mmd_squared: empty sample set");
  if (a.cols() != b.cols()) throw ShapeError("mmd_squared: sample dimensions differ");
  k.validate();
  const double n = static_cast<double>(a.rows());
  const double m = static_cast<double>(b.rows());
  return kernel_sum(a, a, k) / (n * n) + kernel_sum(b, b, k) / (m * m) -
         2.0 * kernel_sum(a, b, k) / (n * m);
}

MmdReference::MmdReference(Matrix reference, KernelMix k)
    : reference_(std::move(reference)), kernel_(std::move(k)) {
  if (reference_.rows() == 0) throw ContractError("MmdReference: empty reference set");
  kernel_.validate();
  const double m = static_cast<double>(reference_.rows());
  self_term_ = kernel_sum(reference_, reference_, kernel_) / (m * m);
}

double MmdReference::operator()(const Matrix& sample) const {
  if (sample.rows() == 0) throw ContractError("mmd: empty sample set");
  if (sample.cols() != reference_.cols()) throw ShapeError("mmd: sample dimensions differ");
  const double n = static_cast<double>(sample.rows());
  const double m = static_cast<double>(reference_.rows());
  return kernel_sum(sample, sample, kernel_) / (n * n) + self_term_ -
         2.0 * kernel_sum(sample, reference_, kernel_) / (n * m);
}

double frechet_gaussian(const Vector& m1, const Matrix& c1, const Vector& m2, const Matrix& c2) {
  const Index d = m1.size();
  if (m2.size() != d || c1.rows() != d || c1.cols() != d || c2.rows() != d || c2.cols() != d) {
    throw ShapeError("frechet_gaussian: mean and covariance dimensions differ");
  }
  const Matrix s1 = psd_sqrt(0.5 * (c1 + c1.transpose()), "frechet_gaussian C1");
  psd_sqrt(0.5 * (c2 + c2.transpose()), "frechet_gaussian C2");
  const Matrix inner = s1 * c2 * s1;
  const Matrix cross = psd_sqrt(0.5 * (inner + inner.transpose()), "frechet_gaussian cross term");
  return (m1 - m2).squaredNorm() + c1.trace() + c2.trace() - 2.0 * cross.trace();
}

std::pair<Vector, Matrix> estimate_moments(const Matrix& features) {
  if (features.rows() < 2) throw ContractError("estimate_moments: need at least two samples");
  const Vector mean = features.colwise().mean().transpose();
  const Matrix centered = features.rowwise() - mean.transpose();
  Matrix cov = centered.transpose() * centered / static_cast<double>(features.rows() - 1);
  return {mean, cov};
}

Index estimated_dim(const Matrix& b) { return (b.rowwise().norm().array() > 0.0).count(); }

double prop_zero(const std::vector<AffineLayer>& theta) {
  Index zeros = 0;
  Index total = 0;
  for (const auto& layer : theta) {
    zeros += (layer.weight.array() == 0.0).count() + (layer.bias.array() == 0.0).count();
    total += layer.weight.size() + layer.bias.size();
  }
  return total == 0 ? 0.0 : static_cast<double>(zeros) / static_cast<double>(total);
}

Index effective_depth(const GeneratorModel& g, double eps) {
  Index collapsed = 0;
  for (std::size_t l = 1; l + 1 < g.layers.size(); ++l) {
    const auto& layer = g.layers[l];
    if (layer.weight.rows() != layer.weight.cols()) continue;
    const Matrix offset = layer.weight - Matrix::Identity(layer.weight.rows(), layer.weight.cols());
    const double bias_max = layer.bias.size() ? layer.bias.cwiseAbs().maxCoeff() : 0.0;
    if (offset.cwiseAbs().maxCoeff() <= eps && bias_max <= eps) ++collapsed;
  }
  return static_cast<Index>(g.layers.size()) - collapsed;
}

}  // namespace ggan
