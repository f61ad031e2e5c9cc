#ifndef DCC_DYNAMIC_GEOMETRY_HPP
#define DCC_DYNAMIC_GEOMETRY_HPP

#include "dcc/types.hpp"

namespace dcc {

// Per-sample rank-1 covariance adjustment. With precision P = S^{-1} for a
// symmetric positive definite S and an adjustment vector u, quadratic forms
// in the adjusted metric (S - u u^T)^{-1} expand in closed form:
//
//   x^T (S - u u^T)^{-1} x  =  x^T P x + (x^T P u)^2 / (1 - u^T P u)
//
// so after caching w = P u the correction costs O(d) per evaluation on top
// of the O(d^2) base quadratic.

/// Guard on |1 - u^T P u| below which the adjusted matrix is treated as
/// exactly rank-deficient along u.
inline constexpr double kSingularDenomGuard = 1e-12;

struct AdjustmentContext {
  const Matrix* precision = nullptr;  // shared, read-only; not owned
  Vector u;       // adjustment vector
  Vector w;       // precision * u
  double p = 0.0;     // u^T precision u
  double denom = 1.0; // 1 - p
};

/// Caches w, p and denom for the closed-form adjusted quadratic. The
/// precision matrix must stay alive as long as the context is used.
/// Throws SingularAdjustmentError when |1 - p| < 1e-12.
AdjustmentContext make_context(const Matrix& precision, const Vector& u);

/// x^T (S - u u^T)^{-1} x via the closed form above. O(d^2).
double adjusted_quadratic(const AdjustmentContext& ctx, const Vector& x);

/// Same quadratic by explicit dense inversion of (cov - u u^T); the O(d^3)
/// reference path used for equivalence checks. Throws
/// SingularAdjustmentError when the adjusted matrix is numerically singular.
double adjusted_quadratic_dense(const Matrix& cov, const Vector& u, const Vector& x);

/// v^T S v - v^T (S - f f^T) v, computed as the literal difference of the two
/// quadratic forms. Equals (v^T f)^2 up to rounding.
double rank_one_gap(const Matrix& cov, const Vector& f, const Vector& v);

/// Scalars controlling nonnegativity of the adjusted quadratic on u - anchor:
/// p = u^T P u, q = anchor^T P anchor, s = u^T P anchor. The sufficient
/// condition (s-1)^2 <= (p-1)(q-1) applies on the p > 1 branch and is
/// vacuously true when p < 1.
struct NonnegativityCheck {
  double p = 0.0;
  double q = 0.0;
  double s = 0.0;
  bool condition_holds = false;
  bool quadratic_nonneg = false;
};

/// Evaluates the nonnegativity condition for the pair (u, anchor) and the
/// adjusted quadratic on x = u - anchor (nonnegative means >= -1e-10).
/// Throws ParamError for a zero anchor.
NonnegativityCheck nonnegativity_check(const Matrix& precision, const Vector& u, const Vector& anchor);

}  // namespace dcc

#endif  // DCC_DYNAMIC_GEOMETRY_HPP
