#include "dcc/gaussian_stats.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "dcc/error.hpp"

namespace dcc {

namespace {

constexpr double kMaxCondition = 1e14;

Eigen::SelfAdjointEigenSolver<Matrix> solve_eigen(const Matrix& sym,
                                                  const char* what) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
  if (solver.info() != Eigen::Success) {
    throw NumericalError(std::string("eigendecomposition failed for ") + what);
  }
  return solver;
}

}  // namespace

CovSource parse_cov_source(const std::string& name) {
  if (name == "within") return CovSource::within;
  if (name == "full") return CovSource::full;
  throw ParamError("unknown covariance source '" + name + "' (expected within or full)");
}

std::string to_string(CovSource source) {
  return source == CovSource::within ? "within" : "full";
}

double regularization_epsilon(const Matrix& cov, double scale) {
  const double mean_diag = cov.diagonal().mean();
  return scale * (mean_diag > 0.0 ? mean_diag : 1.0);
}

Matrix regularized_precision(const Matrix& cov, double epsilon) {
  const auto solver = solve_eigen(cov, "covariance");
  const Vector& eig = solver.eigenvalues();
  const double lo = eig(0) + epsilon;
  const double hi = eig(eig.size() - 1) + epsilon;
  if (!(lo > 0.0) || hi / lo > kMaxCondition) {
    throw ConditioningError(
        "regularized covariance is near-singular (condition estimate " +
        std::to_string(lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity()) +
        "); increase the regularization scale");
  }
  Matrix precision = solver.eigenvectors() *
                     (eig.array() + epsilon).inverse().matrix().asDiagonal() *
                     solver.eigenvectors().transpose();
  // Spectral reconstruction is symmetric only up to rounding.
  precision = ((precision + precision.transpose()) * 0.5).eval();
  return precision;
}

GaussianStats fit_stats(const FeatureSet& train, double reg_epsilon_scale) {
  validate(train);
  if (!train.has_labels()) throw LabelError("fit_stats requires labeled training data");

  const Index n = train.rows();
  const Index d = train.cols();
  const int n_classes = train.num_classes();

  std::vector<Index> class_counts(static_cast<size_t>(n_classes), 0);
  for (std::int32_t label : *train.labels) ++class_counts[static_cast<size_t>(label)];
  for (int c = 0; c < n_classes; ++c) {
    if (class_counts[static_cast<size_t>(c)] == 0) {
      throw DataError("class " + std::to_string(c) + " is empty");
    }
  }

  GaussianStats stats;
  stats.n_classes = n_classes;
  stats.dim = static_cast<int>(d);

  stats.means = Matrix::Zero(n_classes, d);
  for (Index i = 0; i < n; ++i) {
    stats.means.row((*train.labels)[static_cast<size_t>(i)]) += train.data.row(i);
  }
  for (int c = 0; c < n_classes; ++c) {
    stats.means.row(c) /= static_cast<double>(class_counts[static_cast<size_t>(c)]);
  }

  // Deviations from the class mean form a zero-mean pool by construction, so
  // the within covariance is a plain (1/N) outer-product sum.
  Matrix deviations(n, d);
  for (Index i = 0; i < n; ++i) {
    deviations.row(i) =
        train.data.row(i) - stats.means.row((*train.labels)[static_cast<size_t>(i)]);
  }
  stats.cov_within = (deviations.transpose() * deviations) / static_cast<double>(n);
  stats.cov_within = ((stats.cov_within + stats.cov_within.transpose()) * 0.5).eval();

  const Eigen::RowVectorXd global_mean = train.data.colwise().mean();
  Matrix centered = train.data.rowwise() - global_mean;
  stats.cov_full = (centered.transpose() * centered) / static_cast<double>(n);
  stats.cov_full = ((stats.cov_full + stats.cov_full.transpose()) * 0.5).eval();

  stats.reg_epsilon = regularization_epsilon(stats.cov_within, reg_epsilon_scale);
  stats.precision_within = regularized_precision(stats.cov_within, stats.reg_epsilon);
  return stats;
}

ResidualBasis residual_basis(const GaussianStats& stats, int k, CovSource source) {
  if (k < 1 || k > stats.dim - 1) {
    throw ParamError("residual dimension k = " + std::to_string(k) +
                     " out of range [1, " + std::to_string(stats.dim - 1) + "]");
  }
  const auto solver = solve_eigen(stats.covariance(source), "residual basis");

  ResidualBasis basis;
  basis.source = source;
  basis.eigenvalues = solver.eigenvalues().head(k);
  basis.basis = solver.eigenvectors().leftCols(k).transpose();

  // Sign convention: make each eigenvector's largest-magnitude entry positive
  // (lowest index on ties) so repeated fits produce identical bases.
  for (Index r = 0; r < basis.basis.rows(); ++r) {
    Index arg = 0;
    double best = 0.0;
    for (Index j = 0; j < basis.basis.cols(); ++j) {
      const double mag = std::abs(basis.basis(r, j));
      if (mag > best) {
        best = mag;
        arg = j;
      }
    }
    if (basis.basis(r, arg) < 0.0) basis.basis.row(r) = -basis.basis.row(r);
  }
  return basis;
}

}  // namespace dcc
