#pragma once

#include "ggan/nets.hpp"

#include <vector>

namespace ggan {

/// Penalty weights and truncation thresholds.
struct PenaltyConfig {
  double lambda1 = 0.0;  // group row penalty on B
  double lambda2 = 0.0;  // depth penalty
  double lambda3 = 0.0;  // sparsity penalty
  double tau1 = 0.0;     // row-norm threshold for B
  double tau2 = 0.0;     // entry threshold for theta

  void validate() const;
};

/// Multiplicative penalty schedule: expand by delta1 every `interval`
/// iterations in the first half of `total`, shrink by delta2 afterwards.
/// Iterations are counted from 1.
struct ScheduleState {
  double delta1 = 1.1;
  double delta2 = 0.9;
  long interval = 100;
  long total = 1;
  long t = 0;

  void validate() const;
};

/// sum_i |B[i,:]|_2
double group_row_penalty(const Matrix& b);
/// Row i is B[i,:]/|B[i,:]| or zero for a zero row.
Matrix group_row_subgradient(const Matrix& b);

/// sum over hidden layers l = 1..L-1 of |A_l - I|_1 + |c_l|_1.
double depth_penalty(const GeneratorModel& g);
/// sign(A_l - I), sign(c_l) on hidden layers, zero elsewhere; sign(0) = 0.
std::vector<AffineLayer> depth_subgradient(const GeneratorModel& g);

/// Entrywise L1 norm of every A_l and c_l (B excluded).
double sparsity_penalty(const std::vector<AffineLayer>& theta);
std::vector<AffineLayer> sparsity_subgradient(const std::vector<AffineLayer>& theta);

/// Zeroes every row whose Euclidean norm is <= tau1.
Matrix truncate_rows(const Matrix& b, double tau1);
/// Zeroes every entry of every A_l, c_l with |entry| <= tau2.
std::vector<AffineLayer> truncate_params(const std::vector<AffineLayer>& theta, double tau2);

/// Applies the schedule rule for iteration s.t; returns cfg unchanged off-interval.
PenaltyConfig schedule_step(const PenaltyConfig& cfg, const ScheduleState& s);

}  // namespace ggan
