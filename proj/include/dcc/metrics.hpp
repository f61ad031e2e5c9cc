#ifndef DCC_METRICS_HPP
#define DCC_METRICS_HPP

#include <cstdint>
#include <span>
#include <string>

namespace dcc {

/// Probability that a uniformly random ID score exceeds a uniformly random
/// OOD score, ties counting 1/2 (Mann-Whitney). Rank-based,
/// O((n+m) log(n+m)). Throws DataError on empty input.
double auroc(std::span<const double> id_scores, std::span<const double> ood_scores);

struct FprResult {
  double fpr = 0.0;
  double threshold = 0.0;
};

/// threshold = the largest score t such that the fraction of ID scores >= t
/// is at least tpr_target; fpr = fraction of OOD scores >= t. No
/// interpolation: the realized TPR may exceed the target.
FprResult fpr_at_tpr(std::span<const double> id_scores,
                     std::span<const double> ood_scores, double tpr_target = 0.95);

struct EvalReport {
  double auroc = 0.0;
  double fpr95 = 0.0;
  std::int64_t n_id = 0;
  std::int64_t n_ood = 0;
  double threshold_at_tpr95 = 0.0;
};

EvalReport evaluate(std::span<const double> id_scores,
                    std::span<const double> ood_scores);

/// Flat JSON object with keys auroc, fpr95, n_id, n_ood, threshold_at_tpr95;
/// numbers at 17 significant digits.
std::string to_json(const EvalReport& report);

}  // namespace dcc

#endif  // DCC_METRICS_HPP
