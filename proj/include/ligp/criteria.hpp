#pragma once

#include <vector>

#include "ligp/full_gp.hpp"
#include "ligp/induced_state.hpp"
#include "ligp/neighborhood.hpp"

namespace ligp {

/// One-dimensional factor of the weighted product integral
/// int_lo^hi k(t, x_star) k(t, a) k(t, b) dt.
double w_factor(double a, double b, double x_star, double theta, double lo, double hi);

/// Derivative of w_factor with respect to `b` (one slot only).
double w_factor_db(double a, double b, double x_star, double theta, double lo, double hi);

/// Product of w_factor over coordinates: entry (i, j) of W*.
double w_entry(const Vector& xbar_i, const Vector& xbar_j, const Vector& x_star, double theta,
               const Domain& domain);

/// erf(u) - erf(v), evaluated without cancellation in the tails.
double erf_diff(double u, double v);

/// The three trace terms whose combination k_term - q_term - w_term is the
/// gradient; exposed so oracles can check each piece.
struct WimseGradientTerms {
  Vector k_term;  ///< tr(dK Kj^-1 W Kj^-1)
  Vector q_term;  ///< tr(dQ Q^-1 W Q^-1)
  Vector w_term;  ///< tr((Kj^-1 - Q^-1) dW)
};

/// Caches everything about the weighted criterion that does not depend on
/// the candidate: W* among the current inducing points, the per-coordinate
/// factors, and the weighted-volume constant. Candidate evaluations augment
/// the state through update_add_inducing and are O(m^2 n).
///
/// Borrows `state`; the state must outlive the evaluator.
class WimseEvaluator {
 public:
  WimseEvaluator(const InducedState& state, const Domain& domain, const Vector& x_star);

  /// (1 + g) prod_k int k(t_k, x*_k) dt_k.
  double erf_const() const { return erf_const_; }
  const Matrix& w_star() const { return w_star_; }

  /// wIMSE with x_cand appended; +infinity when the candidate is degenerate.
  double value(const Vector& x_cand) const;

  /// Value and analytic gradient with respect to x_cand (zero gradient when degenerate).
  double value_and_gradient(const Vector& x_cand, Vector& grad, WimseGradientTerms* terms = nullptr) const;

 private:
  Matrix augmented_w(const Vector& x_cand, std::vector<Vector>* last_factors) const;

  const InducedState& state_;
  Domain domain_;
  Vector x_star_;
  double theta_;
  std::vector<Matrix> w_dims_;
  Matrix w_star_;
  double erf_const_;
};

double wimse(const Vector& x_cand, const InducedState& state, const Domain& domain, const Vector& x_star);
Vector wimse_grad(const Vector& x_cand, const InducedState& state, const Domain& domain, const Vector& x_star);

/// Unweighted integrals for the global criterion.
struct GlobalImseWorkspace {
  double e = 0.0;  ///< (1 + g) * volume
  Matrix w;        ///< int k(x_i, t) k(x_j, t) dt over the domain
};

/// One-dimensional factor int_lo^hi k(t, a) k(t, b) dt.
double w_factor_unweighted(double a, double b, double theta, double lo, double hi);

GlobalImseWorkspace global_imse_workspace(const Matrix& points, double theta, double g, const Domain& domain);

/// Integrated scaled variance over the domain with x_cand appended.
double imse_global(const Vector& x_cand, const InducedState& state, const Domain& domain);

/// Summed reduction of scaled predictive variance over `ref_set` when x_cand
/// joins the inducing set (larger is better; -infinity when degenerate).
double alc_global(const Vector& x_cand, const InducedState& state, const Matrix& ref_set);

/// Reduction v_n(x*) - v_{n+1}(x*) of the dense model's kernel variance from
/// adding training input `x_cand`, by partitioned inverse in O(n^2).
double lagp_alc_delta(const DenseGp& local, const Vector& x_cand, const Vector& x_star);

/// Index form: `cand` indexes X_N and must not already be in `nb`.
double lagp_alc_delta(const DenseGp& local, const Neighborhood& nb, const Matrix& x_all, Eigen::Index cand,
                      const Vector& x_star);

}  // namespace ligp
