#include "dcc/dynamic_geometry.hpp"

#include <cmath>
#include <string>

#include "dcc/error.hpp"

namespace dcc {

AdjustmentContext make_context(const Matrix& precision, const Vector& u) {
  if (precision.rows() != precision.cols() || precision.rows() != u.size()) {
    throw ParamError("precision/vector shape mismatch in make_context");
  }
  AdjustmentContext ctx;
  ctx.precision = &precision;
  ctx.u = u;
  ctx.w = precision * u;
  ctx.p = u.dot(ctx.w);
  ctx.denom = 1.0 - ctx.p;
  if (std::abs(ctx.denom) < kSingularDenomGuard) {
    throw SingularAdjustmentError(
        "adjusted matrix is rank-deficient along u (|1 - p| = " +
        std::to_string(std::abs(ctx.denom)) + ")");
  }
  return ctx;
}

double adjusted_quadratic(const AdjustmentContext& ctx, const Vector& x) {
  const double base = x.dot(*ctx.precision * x);
  const double cross = x.dot(ctx.w);
  return base + cross * cross / ctx.denom;
}

double adjusted_quadratic_dense(const Matrix& cov, const Vector& u, const Vector& x) {
  Matrix adjusted = cov - u * u.transpose();
  Eigen::PartialPivLU<Matrix> lu(adjusted);
  const double rcond = lu.rcond();
  if (!(rcond > 1e-14)) {
    throw SingularAdjustmentError(
        "adjusted matrix numerically singular (rcond = " + std::to_string(rcond) + ")");
  }
  return x.dot(lu.solve(x));
}

double rank_one_gap(const Matrix& cov, const Vector& f, const Vector& v) {
  const double plain = v.dot(cov * v);
  const double adjusted = v.dot((cov - f * f.transpose()) * v);
  return plain - adjusted;
}

NonnegativityCheck nonnegativity_check(const Matrix& precision, const Vector& u, const Vector& anchor) {
  if (anchor.isZero(0.0)) throw ParamError("nonnegativity_check requires a nonzero anchor");
  const AdjustmentContext ctx = make_context(precision, u);

  NonnegativityCheck check;
  check.p = ctx.p;
  check.q = anchor.dot(precision * anchor);
  check.s = anchor.dot(ctx.w);
  check.condition_holds =
      ctx.p > 1.0 ? (check.s - 1.0) * (check.s - 1.0) <= (check.p - 1.0) * (check.q - 1.0)
                  : true;
  check.quadratic_nonneg = adjusted_quadratic(ctx, u - anchor) >= -1e-10;
  return check;
}

}  // namespace dcc
