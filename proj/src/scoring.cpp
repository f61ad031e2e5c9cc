#include "dcc/scoring.hpp"

#include <omp.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "dcc/dynamic_geometry.hpp"
#include "dcc/error.hpp"

namespace dcc {

namespace {

int resolve_threads(int threads) {
  return threads > 0 ? threads : omp_get_max_threads();
}

bool method_is_euclidean(Method m) {
  return m == Method::euclidean_static || m == Method::euclidean_dynamic;
}

bool method_is_dynamic(Method m) {
  return m == Method::dcc || m == Method::euclidean_dynamic;
}

// Everything the per-sample loop needs, fixed after setup. precision() is
// null for the identity (Euclidean) metric.
struct ScoringPlan {
  const Matrix* means = nullptr;
  const Matrix* stats_precision = nullptr;  // borrowed from GaussianStats
  Matrix owned_precision;  // backing store when dcm selects the full covariance
  bool has_owned_precision = false;
  Matrix reg_cov;          // regularized covariance matching precision()
  const Matrix* basis = nullptr;  // k x d, null when the adjustment uses f itself
  bool dynamic = false;
  Matrix class_gram;  // n_classes x d: means * precision (means for identity)
  Vector class_quad;  // n_classes: mean_i^T precision mean_i

  // Safe across copies/moves, unlike a pointer into owned_precision.
  const Matrix* precision() const {
    return has_owned_precision ? &owned_precision : stats_precision;
  }
};

ScoringPlan make_plan(const Matrix& means, const GaussianStats* stats,
                      const ResidualBasis* basis, const ScoreConfig& config) {
  ScoringPlan plan;
  plan.means = &means;
  plan.dynamic = method_is_dynamic(config.method);

  if (config.method == Method::dcc && !config.dme) {
    throw ParamError("method dcc requires dynamic matrix estimation (dme)");
  }
  if (plan.dynamic && config.rsp && basis == nullptr &&
      !method_is_euclidean(config.method)) {
    throw ParamError("residual space projection requested without a basis");
  }
  if (basis != nullptr) {
    if (basis->basis.cols() != means.cols()) {
      throw ParamError("basis dimension does not match feature dimension");
    }
    const bool use_basis = plan.dynamic && (config.rsp || method_is_euclidean(config.method));
    if (use_basis) plan.basis = &basis->basis;
  }

  if (!method_is_euclidean(config.method)) {
    if (stats == nullptr) throw ParamError("method requires fitted statistics");
    const Index d = stats->precision_within.rows();
    if (config.dcm) {
      plan.stats_precision = &stats->precision_within;
      plan.reg_cov = stats->cov_within + stats->reg_epsilon * Matrix::Identity(d, d);
    } else {
      const double eps = regularization_epsilon(stats->cov_full, config.reg_epsilon_scale);
      plan.owned_precision = regularized_precision(stats->cov_full, eps);
      plan.has_owned_precision = true;
      plan.reg_cov = stats->cov_full + eps * Matrix::Identity(d, d);
    }
    plan.class_gram = means * (*plan.precision());
    plan.class_quad.resize(means.rows());
    for (Index i = 0; i < means.rows(); ++i) {
      plan.class_quad(i) = plan.class_gram.row(i).dot(means.row(i));
    }
  } else {
    plan.class_gram = means;
    plan.class_quad = means.rowwise().squaredNorm();
  }
  return plan;
}

Matrix prepare_rows(const FeatureSet& test, Index dim, bool normalize) {
  if (test.cols() != dim) {
    throw ParamError("test dimension " + std::to_string(test.cols()) +
                     " does not match fitted dimension " + std::to_string(dim));
  }
  Matrix rows = test.data;
  if (normalize) l2_normalize_rows(rows);
  return rows;
}

struct SampleResult {
  double score;
  std::int32_t argmin;
  bool clamped;
  bool singular;
};

// Fast path: closed-form rank-1 expansion on top of the decomposed class
// quadratics r_i^T P r_i = f^T P f - 2 mean_i^T P f + mean_i^T P mean_i.
SampleResult score_sample_fast(const ScoringPlan& plan, const Vector& f) {
  const Index n_classes = plan.means->rows();
  const bool identity = plan.precision() == nullptr;

  const Vector pf = identity ? f : Vector(*plan.precision() * f);
  const double f_quad = f.dot(pf);
  const Vector class_cross = plan.class_gram * f;  // mean_i^T P f

  bool singular = false;
  double inv_denom = 0.0;
  double f_cross = 0.0;
  Vector class_u_cross;
  if (plan.dynamic) {
    Vector u;
    if (plan.basis != nullptr) {
      u = plan.basis->transpose() * (*plan.basis * f);
    } else {
      u = f;
    }
    const Vector w = (plan.basis == nullptr) ? pf : (identity ? u : Vector(*plan.precision() * u));
    const double p = u.dot(w);
    const double denom = 1.0 - p;
    if (std::abs(denom) < kSingularDenomGuard) {
      singular = true;
    } else {
      inv_denom = 1.0 / denom;
      f_cross = f.dot(w);
      class_u_cross = *plan.means * w;  // mean_i^T w
    }
  }

  double best = std::numeric_limits<double>::infinity();
  Index best_class = 0;
  for (Index i = 0; i < n_classes; ++i) {
    double dist = f_quad - 2.0 * class_cross(i) + plan.class_quad(i);
    if (plan.dynamic && !singular) {
      const double cross = f_cross - class_u_cross(i);
      dist += cross * cross * inv_denom;
    }
    if (dist < best) {
      best = dist;
      best_class = i;
    }
  }

  SampleResult out;
  out.singular = plan.dynamic && singular;
  out.clamped = best < 0.0 && !out.singular;
  const double positive = best < 0.0 ? 0.0 : best;
  out.score = positive == 0.0 ? 0.0 : -std::sqrt(positive);
  out.argmin = static_cast<std::int32_t>(best_class);
  return out;
}

// Reference path: invert the adjusted covariance outright and evaluate every
// class quadratic against the dense inverse.
SampleResult score_sample_dense(const ScoringPlan& plan, const Vector& f) {
  const Index d = f.size();
  const Index n_classes = plan.means->rows();
  const bool identity = plan.precision() == nullptr;

  bool singular = false;
  Matrix metric;
  if (plan.dynamic) {
    Vector u;
    if (plan.basis != nullptr) {
      u = plan.basis->transpose() * (*plan.basis * f);
    } else {
      u = f;
    }
    const Vector w = identity ? u : Vector(*plan.precision() * u);
    const double p = u.dot(w);
    if (std::abs(1.0 - p) < kSingularDenomGuard) {
      singular = true;
    } else {
      const Matrix base = identity ? Matrix(Matrix::Identity(d, d)) : plan.reg_cov;
      metric = (base - u * u.transpose()).inverse();
    }
  }
  const bool use_static = !plan.dynamic || singular;

  double best = std::numeric_limits<double>::infinity();
  Index best_class = 0;
  for (Index i = 0; i < n_classes; ++i) {
    const Vector r = f - plan.means->row(i).transpose();
    double dist;
    if (use_static) {
      dist = identity ? r.squaredNorm() : r.dot(*plan.precision() * r);
    } else {
      dist = r.dot(metric * r);
    }
    if (dist < best) {
      best = dist;
      best_class = i;
    }
  }

  SampleResult out;
  out.singular = plan.dynamic && singular;
  out.clamped = best < 0.0 && !out.singular;
  const double positive = best < 0.0 ? 0.0 : best;
  out.score = positive == 0.0 ? 0.0 : -std::sqrt(positive);
  out.argmin = static_cast<std::int32_t>(best_class);
  return out;
}

ScoredBatch run_batch(const ScoringPlan& plan, const Matrix& rows, int threads,
                      bool dense) {
  const Index n = rows.rows();
  ScoredBatch batch;
  batch.scores.resize(static_cast<size_t>(n));
  batch.argmin_class.resize(static_cast<size_t>(n));
  batch.clamped.assign(static_cast<size_t>(n), 0);
  batch.singular.assign(static_cast<size_t>(n), 0);

  if (dense) {
    for (Index i = 0; i < n; ++i) {
      const SampleResult r = score_sample_dense(plan, rows.row(i).transpose());
      batch.scores[static_cast<size_t>(i)] = r.score;
      batch.argmin_class[static_cast<size_t>(i)] = r.argmin;
      batch.clamped[static_cast<size_t>(i)] = r.clamped ? 1 : 0;
      batch.singular[static_cast<size_t>(i)] = r.singular ? 1 : 0;
    }
  } else {
    const int n_threads = resolve_threads(threads);
#pragma omp parallel for schedule(static) num_threads(n_threads)
    for (Index i = 0; i < n; ++i) {
      const SampleResult r = score_sample_fast(plan, rows.row(i).transpose());
      batch.scores[static_cast<size_t>(i)] = r.score;
      batch.argmin_class[static_cast<size_t>(i)] = r.argmin;
      batch.clamped[static_cast<size_t>(i)] = r.clamped ? 1 : 0;
      batch.singular[static_cast<size_t>(i)] = r.singular ? 1 : 0;
    }
  }

  for (Index i = 0; i < n; ++i) {
    batch.clamp_count += batch.clamped[static_cast<size_t>(i)];
    batch.singular_count += batch.singular[static_cast<size_t>(i)];
  }
  return batch;
}

}  // namespace

Method parse_method(const std::string& name) {
  if (name == "dcc") return Method::dcc;
  if (name == "maha") return Method::mahalanobis_static;
  if (name == "euclid") return Method::euclidean_static;
  if (name == "euclid-dyn") return Method::euclidean_dynamic;
  throw ParamError("unknown method '" + name +
                   "' (expected dcc, maha, euclid or euclid-dyn)");
}

std::string to_string(Method method) {
  switch (method) {
    case Method::dcc: return "dcc";
    case Method::mahalanobis_static: return "maha";
    case Method::euclidean_static: return "euclid";
    case Method::euclidean_dynamic: return "euclid-dyn";
  }
  return "?";
}

ScoredBatch score_batch(const FeatureSet& test, const GaussianStats& stats,
                        const ResidualBasis* basis, const ScoreConfig& config,
                        int threads) {
  if (method_is_euclidean(config.method)) {
    return score_euclidean(test, stats.means, basis,
                           config.method == Method::euclidean_dynamic,
                           config.normalize, threads);
  }
  const ScoringPlan plan = make_plan(stats.means, &stats, basis, config);
  const Matrix rows = prepare_rows(test, stats.means.cols(), config.normalize);
  return run_batch(plan, rows, threads, /*dense=*/false);
}

ScoredBatch score_batch_reference(const FeatureSet& test, const GaussianStats& stats,
                                  const ResidualBasis* basis, const ScoreConfig& config) {
  const GaussianStats* stats_ptr = method_is_euclidean(config.method) ? nullptr : &stats;
  const ScoringPlan plan = make_plan(stats.means, stats_ptr, basis, config);
  const Matrix rows = prepare_rows(test, stats.means.cols(), config.normalize);
  return run_batch(plan, rows, /*threads=*/1, /*dense=*/true);
}

ScoredBatch score_euclidean(const FeatureSet& test, const Matrix& means,
                            const ResidualBasis* basis, bool dynamic,
                            bool normalize, int threads) {
  ScoreConfig config;
  config.method = dynamic ? Method::euclidean_dynamic : Method::euclidean_static;
  config.normalize = normalize;
  const ScoringPlan plan = make_plan(means, nullptr, basis, config);
  const Matrix rows = prepare_rows(test, means.cols(), normalize);
  return run_batch(plan, rows, threads, /*dense=*/false);
}

std::vector<bool> classify(const std::vector<double>& scores, double lambda) {
  std::vector<bool> out(scores.size());
  for (size_t i = 0; i < scores.size(); ++i) out[i] = scores[i] > lambda;
  return out;
}

void write_scores(const std::filesystem::path& path, const ScoredBatch& batch,
                  FileFormat format) {
  if (format == FileFormat::binary) {
    Matrix column(static_cast<Index>(batch.size()), 1);
    for (size_t i = 0; i < batch.size(); ++i) {
      column(static_cast<Index>(i), 0) = batch.scores[i];
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    write_fmat(out, column);
    return;
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "index,score,argmin_class,clamped,singular\n";
  for (size_t i = 0; i < batch.size(); ++i) {
    out << i << ',' << format_double(batch.scores[i]) << ',' << batch.argmin_class[i]
        << ',' << int(batch.clamped[i]) << ',' << int(batch.singular[i]) << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<double> read_scores(const std::filesystem::path& path) {
  {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw IoError("cannot open " + path.string() + " for reading");
    char magic[4] = {0, 0, 0, 0};
    probe.read(magic, 4);
    if (probe.gcount() == 4 && std::memcmp(magic, "FMAT", 4) == 0) {
      probe.seekg(0);
      const Matrix m = read_fmat(probe, path.string());
      std::vector<double> scores;
      scores.reserve(static_cast<size_t>(m.size()));
      for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) scores.push_back(m(i, j));
      }
      return scores;
    }
  }

  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::vector<double> scores;
  std::string line;
  int score_column = -1;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::stringstream ss(line);
    std::vector<std::string> fields;
    std::string field;
    while (std::getline(ss, field, ',')) {
      if (!field.empty() && field.back() == '\r') field.pop_back();
      fields.push_back(field);
    }
    if (first) {
      first = false;
      for (size_t j = 0; j < fields.size(); ++j) {
        if (fields[j] == "score") score_column = static_cast<int>(j);
      }
      if (score_column >= 0) continue;  // header row
      if (fields.size() != 1) {
        throw FormatError(path.string() +
                          ": headerless score files must have one value per line");
      }
      score_column = 0;
    }
    const std::string& cell = fields.at(static_cast<size_t>(score_column));
    try {
      scores.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw FormatError(path.string() + ": unparsable score '" + cell + "'");
    }
  }
  if (scores.empty()) throw DataError(path.string() + ": no scores found");
  return scores;
}

}  // namespace dcc
