#ifndef DCC_SCORING_HPP
#define DCC_SCORING_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dcc/feature_io.hpp"
#include "dcc/feature_set.hpp"
#include "dcc/gaussian_stats.hpp"

namespace dcc {

enum class Method {
  dcc,                 // dynamic covariance calibration (full method)
  mahalanobis_static,  // fitted precision, no per-sample adjustment
  euclidean_static,    // identity metric
  euclidean_dynamic,   // identity metric with the rank-1 adjustment
};

Method parse_method(const std::string& name);  // dcc | maha | euclid | euclid-dyn
std::string to_string(Method method);

struct ScoreConfig {
  Method method = Method::dcc;
  bool dme = true;   // per-sample rank-1 adjustment (must be true for dcc)
  bool rsp = true;   // restrict the adjustment vector to the residual space
  bool dcm = true;   // within-class covariance; false selects the full covariance
  int residual_dim = 0;  // k; required (> 0) when rsp is enabled
  double reg_epsilon_scale = 1e-6;
  bool normalize = true;
};

/// Scores for one batch; higher means more in-distribution. Scores are
/// negative minimum distances, so 0 is the most ID-like value possible.
struct ScoredBatch {
  std::vector<double> scores;
  std::vector<std::int32_t> argmin_class;
  std::vector<std::uint8_t> clamped;   // adjusted quadratic went negative
  std::vector<std::uint8_t> singular;  // |1 - p| guard tripped; static fallback used
  int clamp_count = 0;
  int singular_count = 0;

  std::size_t size() const { return scores.size(); }
};

/// Scores every test row against the fitted statistics:
///   score(f) = -sqrt(max(0, min_i (f - mean_i)^T M(f) (f - mean_i)))
/// where M(f) is the precision selected by dcm, rank-1 adjusted along
/// u = B^T(Bf) (rsp) or u = f when dme is enabled. Evaluated with the
/// closed-form rank-1 expansion and per-class caches, O(d^2 + n_classes * d)
/// per sample, parallel over rows. `basis` may be null when rsp is off.
/// `threads` <= 0 picks the OpenMP default.
ScoredBatch score_batch(const FeatureSet& test, const GaussianStats& stats,
                        const ResidualBasis* basis, const ScoreConfig& config,
                        int threads = 0);

/// Serial reference for score_batch: per sample, explicitly inverts the
/// adjusted covariance and evaluates every class quadratic against the dense
/// inverse. O(d^3) per sample; kept for equivalence testing and benchmarks.
ScoredBatch score_batch_reference(const FeatureSet& test, const GaussianStats& stats,
                                  const ResidualBasis* basis, const ScoreConfig& config);

/// Euclidean variant: the metric is the identity (no fitted covariance).
/// dynamic = false scores -min_i ||f - mean_i||; dynamic = true applies the
/// rank-1 adjustment with u the residual projection (or f itself when no
/// basis is supplied).
ScoredBatch score_euclidean(const FeatureSet& test, const Matrix& means,
                            const ResidualBasis* basis, bool dynamic,
                            bool normalize = true, int threads = 0);

/// Element-wise detector: true where score > lambda (strict).
std::vector<bool> classify(const std::vector<double>& scores, double lambda);

// Score files. CSV carries columns index,score,argmin_class,clamped,singular
// (header included); binary is a single-column FMAT matrix of scores.
void write_scores(const std::filesystem::path& path, const ScoredBatch& batch,
                  FileFormat format);

/// Reads scores back from a score CSV (header with a "score" column or one
/// bare value per line) or a single-column FMAT file.
std::vector<double> read_scores(const std::filesystem::path& path);

}  // namespace dcc

#endif  // DCC_SCORING_HPP
