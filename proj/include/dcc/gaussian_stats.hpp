#ifndef DCC_GAUSSIAN_STATS_HPP
#define DCC_GAUSSIAN_STATS_HPP

#include <string>

#include "dcc/feature_set.hpp"
#include "dcc/types.hpp"

namespace dcc {

enum class CovSource { within, full };

CovSource parse_cov_source(const std::string& name);  // "within" | "full"
std::string to_string(CovSource source);

/// Gaussian machinery fitted on labeled, L2-normalized training features:
/// per-class means, the pooled covariance of the class-centered deviations,
/// the covariance about the global mean, and the regularized inverse of the
/// former.
struct GaussianStats {
  Matrix means;             // n_classes x dim
  Matrix cov_within;        // dim x dim, (1/N) * sum r r^T, r = f - mean[class(f)]
  Matrix cov_full;          // dim x dim, (1/N) * sum (f - mu)(f - mu)^T
  Matrix precision_within;  // inverse of (cov_within + reg_epsilon * I)
  double reg_epsilon = 0.0;
  int n_classes = 0;
  int dim = 0;

  const Matrix& covariance(CovSource source) const {
    return source == CovSource::within ? cov_within : cov_full;
  }
};

/// Orthonormal eigenvectors (rows) of a covariance matrix belonging to its k
/// smallest eigenvalues, ascending. Projection onto their span isolates the
/// residual space.
struct ResidualBasis {
  Matrix basis;       // k x dim
  Vector eigenvalues; // length k, ascending
  CovSource source = CovSource::within;

  Index k() const { return basis.rows(); }
};

/// Fits GaussianStats on a labeled feature set that is already L2-normalized.
/// reg_epsilon is reg_epsilon_scale times the mean diagonal of the within
/// covariance (times 1.0 when that mean is zero, so the inverse always
/// exists). Throws DataError on empty classes, ConditioningError when the
/// regularized covariance has condition estimate above 1e14.
GaussianStats fit_stats(const FeatureSet& train, double reg_epsilon_scale = 1e-6);

/// Eigenvectors of the chosen *unregularized* covariance with the k smallest
/// eigenvalues, 1 <= k <= dim-1. Rows carry a deterministic sign: the entry
/// of largest magnitude (lowest index on ties) is made positive.
ResidualBasis residual_basis(const GaussianStats& stats, int k, CovSource source);

/// Diagonal load for inverting a covariance: scale * mean(diag), or scale
/// itself when the diagonal is identically zero.
double regularization_epsilon(const Matrix& cov, double scale);

/// Symmetric inverse of (cov + epsilon * I) via its spectral decomposition.
/// Throws ConditioningError when the condition estimate exceeds 1e14.
Matrix regularized_precision(const Matrix& cov, double epsilon);

}  // namespace dcc

#endif  // DCC_GAUSSIAN_STATS_HPP
