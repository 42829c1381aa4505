#pragma once

#include "ggan/nets.hpp"

#include <utility>
#include <vector>

namespace ggan {

/// Mixture of Gaussian kernels k(x, y) = sum_j exp(-|x - y|^2 / (2 sigma_j)).
struct KernelMix {
  std::vector<double> bandwidths{1.0, 5.0, 10.0};

  void validate() const;
  [[nodiscard]] double operator()(double squared_distance) const;
};

/// Biased (V-statistic) squared MMD between the row sets of a and b.
double mmd_squared(const Matrix& a, const Matrix& b, const KernelMix& k = {});

/// MMD against a fixed reference set, caching the reference self-term.
class MmdReference {
 public:
  MmdReference(Matrix reference, KernelMix k = {});
  [[nodiscard]] double operator()(const Matrix& sample) const;
  [[nodiscard]] const Matrix& reference() const { return reference_; }

 private:
  Matrix reference_;
  KernelMix kernel_;
  double self_term_ = 0.0;
};

/// |m1 - m2|^2 + Tr(C1 + C2 - 2 (C1^{1/2} C2 C1^{1/2})^{1/2}).
double frechet_gaussian(const Vector& m1, const Matrix& c1, const Vector& m2, const Matrix& c2);

/// Sample mean and covariance (divisor N - 1) of the rows.
std::pair<Vector, Matrix> estimate_moments(const Matrix& features);

/// Number of rows of b with nonzero norm.
Index estimated_dim(const Matrix& b);

/// Fraction of exactly-zero entries among all A_l and c_l.
double prop_zero(const std::vector<AffineLayer>& theta);

/// (L + 1) minus the hidden layers within eps of (I, 0) in the sup norm.
Index effective_depth(const GeneratorModel& g, double eps);

struct MetricsReport {
  double mmd2 = 0.0;
  double mmd_scaled = 0.0;  // mmd2 * 1e4
  Index dim = 0;
  double prop0 = 0.0;       // fraction in [0, 1]
  Index effective_depth = 0;
};

}  // namespace ggan
