#pragma once

#include <span>
#include <vector>

#include "spdesync/field.hpp"

namespace spdesync {

/// Geometric grid of smoothing times s_min = s_0 < ... < s_{J-1} = 1.
class SGrid {
 public:
  SGrid(double s_min, int points);

  /// s_min = (L/N)^2, the finest scale the grid resolves.
  static SGrid for_grid(const TorusGrid& grid, int points = 64);

  std::span<const double> times() const noexcept { return times_; }
  std::size_t size() const noexcept { return times_.size(); }
  double s_min() const noexcept { return times_.front(); }
  /// Spacing in log s.
  double log_step() const noexcept { return log_step_; }

  /// Nested refinement: inserts the geometric midpoint between neighbours.
  SGrid refined() const;

  /// Weights W_j with sum_j W_j F(s_j) ~ int_0^1 s^w F(s) ds/s.
  ///
  /// F is interpolated linearly in log s between grid points and held at
  /// F(s_min) below s_min; s^w is integrated exactly against that
  /// interpolant. All weights are positive for w > 0.
  std::vector<double> weights(double w) const;

 private:
  explicit SGrid(std::vector<double> times);
  std::vector<double> times_;
  double log_step_ = 0.0;
};

/// Exponent, integrability index and s-grid of the negative Besov norms.
struct BesovParams {
  double alpha;
  int p;
  SGrid s_grid;

  BesovParams(double alpha, int p, SGrid s_grid);
};

/// sup over the s-grid of s^{alpha/2} ||f_s||_inf.
double besov_norm_sup(const Field& f, double alpha, const SGrid& s_grid);

/// (int_0^1 s^{alpha p / 2} ||f_s||_p^p ds/s)^{1/p}, by log-s quadrature.
double besov_norm_p(const Field& f, const BesovParams& params);

/// 2^{p-1} sum_x sgn(f) |f|^p h^d, with sgn(0) = 0.
double phi_p(const Field& f, int p);

/// int_0^1 s^{(alpha - d/p) p / 2} phi_p(f_s) ds/s. Requires alpha > d/p.
double phi_besov(const Field& f, const BesovParams& params);

/// phi_besov(f) - phi_besov(g), summed pointwise so that near-equal fields
/// do not lose precision to cancellation.
double phi_besov_difference(const Field& f, const Field& g, const BesovParams& params);

/// phi_besov(base + offset) - phi_besov(base) with the offset carried
/// separately; exact to relative precision even when offset << base.
double phi_besov_increment(const Field& base, const Field& offset, const BesovParams& params);

struct InequalitySides {
  double lhs;
  double rhs;
};

/// ||f - g||_{-alpha;p}^p versus int s^{alpha p/2}(phi_p(f_s) - phi_p(g_s)) ds/s
/// on the same quadrature. Requires g below f pointwise.
InequalitySides lemma_a1_gap(const Field& f, const Field& g, const BesovParams& params);

/// |Phi(f) - Phi(g)| versus C(p) (||f-g|| ^ 1) max{1, ||f||^p + ||g||^p},
/// where Phi uses the weight s^{alpha p/2} and C(p) = 2^{p-1} p.
InequalitySides lemma_a2_gap(const Field& f, const Field& g, const BesovParams& params);

/// 2^{p-1} p.
double lemma_a2_constant(int p);

/// Constant C1 with besov_norm_p(f) <= C1 besov_norm_sup(f) for every grid
/// field: (L^d sum_j W_j s_j^{-alpha p/2})^{1/p}.
double sup_to_p_embedding_constant(const TorusGrid& grid, const BesovParams& params);

}  // namespace spdesync
