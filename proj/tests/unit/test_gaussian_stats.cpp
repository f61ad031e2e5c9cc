#include <doctest.h>

#include <filesystem>
#include <random>
#include <vector>

#include "dcc/error.hpp"
#include "dcc/gaussian_stats.hpp"
#include "dcc/stats_archive.hpp"
#include "dcc/synth.hpp"

using namespace dcc;

namespace {

FeatureSet toy_two_class() {
  // class 0: (1,0), (-1,0); class 1: (0,1), (0,-1). All unit norm already.
  FeatureSet set;
  set.data.resize(4, 2);
  set.data << 1, 0, -1, 0, 0, 1, 0, -1;
  set.labels = std::vector<std::int32_t>{0, 0, 1, 1};
  return set;
}

FeatureSet random_labeled(Index n, Index d, int n_classes, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  FeatureSet set;
  set.data.resize(n, d);
  set.labels = std::vector<std::int32_t>(static_cast<size_t>(n));
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) set.data(i, j) = gauss(rng);
    (*set.labels)[static_cast<size_t>(i)] = static_cast<std::int32_t>(i % n_classes);
  }
  return l2_normalize(set);
}

Matrix random_spd(Index d, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix a(d, d);
  for (Index i = 0; i < d; ++i) {
    for (Index j = 0; j < d; ++j) a(i, j) = gauss(rng);
  }
  Matrix spd = a * a.transpose() / static_cast<double>(d);
  spd += 0.1 * Matrix::Identity(d, d);
  return spd;
}

GaussianStats stats_with_cov(const Matrix& cov) {
  GaussianStats stats;
  stats.dim = static_cast<int>(cov.rows());
  stats.n_classes = 1;
  stats.means = Matrix::Zero(1, cov.rows());
  stats.cov_within = cov;
  stats.cov_full = cov;
  stats.reg_epsilon = 0.0;
  stats.precision_within = Matrix::Identity(cov.rows(), cov.cols());
  return stats;
}

}  // namespace

TEST_CASE("two-class toy: means and within covariance") {
  const GaussianStats stats = fit_stats(toy_two_class());

  CHECK(stats.n_classes == 2);
  CHECK(stats.means.row(0).norm() == 0.0);
  CHECK(stats.means.row(1).norm() == 0.0);

  // Oracle: brute-force outer-product sum over the 4 deviations.
  const FeatureSet toy = toy_two_class();
  Matrix expected = Matrix::Zero(2, 2);
  for (Index i = 0; i < 4; ++i) {
    expected += toy.data.row(i).transpose() * toy.data.row(i);
  }
  expected /= 4.0;
  CHECK((stats.cov_within - expected).norm() == 0.0);
  CHECK(stats.cov_within(0, 0) == 0.5);
  CHECK(stats.cov_within(1, 1) == 0.5);
  CHECK(stats.cov_within(0, 1) == 0.0);
}

TEST_CASE("degenerate zero-variance class yields precision I / epsilon") {
  FeatureSet set;
  set.data.resize(3, 2);
  set.data << 1, 0, 1, 0, 1, 0;
  set.labels = std::vector<std::int32_t>{0, 0, 0};
  const double scale = 1e-6;
  const GaussianStats stats = fit_stats(set, scale);
  CHECK(stats.cov_within.norm() == 0.0);
  CHECK(stats.reg_epsilon == scale);  // mean diagonal is zero, absolute fallback
  CHECK((stats.precision_within - (1.0 / scale) * Matrix::Identity(2, 2)).norm() <=
        1e-8 * (1.0 / scale));
}

TEST_CASE("precision is consistent with the regularized covariance") {
  const FeatureSet train = random_labeled(500, 8, 5, 11);
  const GaussianStats stats = fit_stats(train);
  const Matrix reg =
      stats.cov_within + stats.reg_epsilon * Matrix::Identity(stats.dim, stats.dim);
  const Matrix product = stats.precision_within * reg;
  const double err = (product - Matrix::Identity(stats.dim, stats.dim)).norm() /
                     Matrix::Identity(stats.dim, stats.dim).norm();
  CHECK(err <= 1e-8);
}

TEST_CASE("fitted covariances satisfy the structural invariants") {
  const FeatureSet train = random_labeled(400, 10, 4, 3);
  const GaussianStats stats = fit_stats(train);

  CHECK((stats.cov_within - stats.cov_within.transpose()).norm() <=
        1e-12 * stats.cov_within.norm());
  CHECK((stats.cov_full - stats.cov_full.transpose()).norm() <=
        1e-12 * stats.cov_full.norm());

  // Class-size-weighted mean deviation sums to zero.
  Vector weighted = Vector::Zero(stats.dim);
  for (Index i = 0; i < train.rows(); ++i) {
    weighted += (train.data.row(i) - stats.means.row((*train.labels)[static_cast<size_t>(i)]))
                    .transpose();
  }
  CHECK(weighted.norm() <= 1e-10);

  // Between-class part (full minus within) is PSD up to tolerance.
  Eigen::SelfAdjointEigenSolver<Matrix> solver(stats.cov_full - stats.cov_within);
  CHECK(solver.eigenvalues()(0) >= -1e-8);

  // Regularized within covariance is positive definite.
  Eigen::SelfAdjointEigenSolver<Matrix> reg_solver(
      stats.cov_within + stats.reg_epsilon * Matrix::Identity(stats.dim, stats.dim));
  CHECK(reg_solver.eigenvalues()(0) > 0.0);
}

TEST_CASE("fit rejects bad inputs") {
  SUBCASE("unlabeled") {
    FeatureSet set;
    set.data = Matrix::Identity(2, 2);
    CHECK_THROWS_AS(fit_stats(set), LabelError);
  }
  SUBCASE("missing class index") {
    FeatureSet set;
    set.data = Matrix::Identity(3, 3);
    set.labels = std::vector<std::int32_t>{0, 0, 2};
    CHECK_THROWS_AS(fit_stats(set), LabelError);
  }
}

TEST_CASE("residual basis on an axis-aligned spectrum") {
  Vector diag(3);
  diag << 3.0, 2.0, 1.0;
  const Matrix cov = diag.asDiagonal();
  const GaussianStats stats = stats_with_cov(cov);

  SUBCASE("k = 1 picks the smallest axis") {
    const ResidualBasis basis = residual_basis(stats, 1, CovSource::within);
    CHECK(basis.eigenvalues(0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(std::abs(basis.basis(0, 2)) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(basis.basis(0, 2) > 0.0);  // sign convention
    CHECK(std::abs(basis.basis(0, 0)) <= 1e-14);
    CHECK(std::abs(basis.basis(0, 1)) <= 1e-14);
  }
  SUBCASE("k = 2 spans the two smallest axes, ascending") {
    const ResidualBasis basis = residual_basis(stats, 2, CovSource::within);
    CHECK(basis.eigenvalues(0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(basis.eigenvalues(1) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(std::abs(basis.basis(0, 2)) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(std::abs(basis.basis(1, 1)) == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("residual basis eigenpairs satisfy the residual bound") {
  const Matrix cov = random_spd(16, 99);
  const GaussianStats stats = stats_with_cov(cov);
  const ResidualBasis basis = residual_basis(stats, 4, CovSource::within);

  CHECK((basis.basis * basis.basis.transpose() - Matrix::Identity(4, 4)).norm() <= 1e-10);
  for (Index r = 0; r < 4; ++r) {
    const Vector b = basis.basis.row(r).transpose();
    const double residual = (cov * b - basis.eigenvalues(r) * b).norm();
    CHECK(residual <= 1e-8 * cov.norm());
  }
  for (Index r = 1; r < 4; ++r) {
    CHECK(basis.eigenvalues(r) >= basis.eigenvalues(r - 1));
  }
}

TEST_CASE("residual basis is bitwise deterministic") {
  const FeatureSet train = random_labeled(300, 12, 3, 5);
  const GaussianStats stats = fit_stats(train);
  const ResidualBasis a = residual_basis(stats, 5, CovSource::full);
  const ResidualBasis b = residual_basis(stats, 5, CovSource::full);
  CHECK(a.basis == b.basis);
  CHECK(a.eigenvalues == b.eigenvalues);
}

TEST_CASE("residual basis rejects out-of-range k") {
  const GaussianStats stats = stats_with_cov(random_spd(6, 1));
  CHECK_THROWS_AS(residual_basis(stats, 0, CovSource::within), ParamError);
  CHECK_THROWS_AS(residual_basis(stats, 6, CovSource::within), ParamError);
  CHECK_NOTHROW(residual_basis(stats, 5, CovSource::within));
}

TEST_CASE("stats archive round-trips at storage precision") {
  const FeatureSet train = random_labeled(200, 6, 4, 21);
  const GaussianStats stats = fit_stats(train);
  const ResidualBasis basis = residual_basis(stats, 2, CovSource::within);

  const auto path = std::filesystem::temp_directory_path() / "dcc_stats_test.farc";
  write_stats_archive(path, stats, &basis);
  const StatsArchive archive = read_stats_archive(path);

  CHECK(archive.stats.n_classes == stats.n_classes);
  CHECK(archive.stats.dim == stats.dim);
  // Blocks are stored as binary32: read-back equals the quantized original.
  for (Index i = 0; i < stats.means.rows(); ++i) {
    for (Index j = 0; j < stats.means.cols(); ++j) {
      CHECK(archive.stats.means(i, j) ==
            static_cast<double>(static_cast<float>(stats.means(i, j))));
    }
  }
  CHECK(archive.stats.reg_epsilon ==
        static_cast<double>(static_cast<float>(stats.reg_epsilon)));
  REQUIRE(archive.basis.has_value());
  CHECK(archive.basis->source == CovSource::within);
  CHECK(archive.basis->k() == 2);
  for (Index j = 0; j < basis.eigenvalues.size(); ++j) {
    CHECK(archive.basis->eigenvalues(j) ==
          static_cast<double>(static_cast<float>(basis.eigenvalues(j))));
  }
}

TEST_CASE("archive without basis omits the basis blocks") {
  const FeatureSet train = random_labeled(100, 4, 2, 8);
  const GaussianStats stats = fit_stats(train);
  const auto path = std::filesystem::temp_directory_path() / "dcc_stats_nobasis.farc";
  write_stats_archive(path, stats, nullptr);
  const StatsArchive archive = read_stats_archive(path);
  CHECK_FALSE(archive.basis.has_value());
}
