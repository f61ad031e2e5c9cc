#include "dcc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "dcc/error.hpp"
#include "dcc/feature_io.hpp"

namespace dcc {

namespace {

void require_scores(std::span<const double> id_scores,
                    std::span<const double> ood_scores) {
  if (id_scores.empty()) throw DataError("empty ID score vector");
  if (ood_scores.empty()) throw DataError("empty OOD score vector");
  for (double v : id_scores) {
    if (!std::isfinite(v)) throw DataError("non-finite ID score");
  }
  for (double v : ood_scores) {
    if (!std::isfinite(v)) throw DataError("non-finite OOD score");
  }
}

}  // namespace

double auroc(std::span<const double> id_scores, std::span<const double> ood_scores) {
  require_scores(id_scores, ood_scores);
  const size_t n = id_scores.size();
  const size_t m = ood_scores.size();

  // Pool, sort, midrank. The rank sum over ID entries gives the
  // Mann-Whitney U statistic; every quantity is a multiple of 1/2 so the sum
  // is exact in double and matches a pairwise count bit for bit.
  std::vector<std::pair<double, bool>> pooled;
  pooled.reserve(n + m);
  for (double v : id_scores) pooled.emplace_back(v, true);
  for (double v : ood_scores) pooled.emplace_back(v, false);
  std::sort(pooled.begin(), pooled.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  double id_rank_sum = 0.0;
  size_t i = 0;
  while (i < pooled.size()) {
    size_t j = i;
    while (j < pooled.size() && pooled[j].first == pooled[i].first) ++j;
    // 1-based ranks i+1 .. j share the midrank (i + j + 1) / 2.
    const double midrank = (static_cast<double>(i) + static_cast<double>(j) + 1.0) / 2.0;
    for (size_t k = i; k < j; ++k) {
      if (pooled[k].second) id_rank_sum += midrank;
    }
    i = j;
  }
  const double u_statistic =
      id_rank_sum - static_cast<double>(n) * (static_cast<double>(n) + 1.0) / 2.0;
  return u_statistic / (static_cast<double>(n) * static_cast<double>(m));
}

FprResult fpr_at_tpr(std::span<const double> id_scores,
                     std::span<const double> ood_scores, double tpr_target) {
  require_scores(id_scores, ood_scores);
  if (!(tpr_target > 0.0 && tpr_target <= 1.0)) {
    throw ParamError("tpr_target must lie in (0, 1]");
  }

  std::vector<double> sorted_id(id_scores.begin(), id_scores.end());
  std::sort(sorted_id.begin(), sorted_id.end(), std::greater<double>());
  const double n = static_cast<double>(sorted_id.size());

  // Walk candidate thresholds from the highest ID score down; the first one
  // whose TPR reaches the target is the largest feasible threshold.
  double threshold = sorted_id.back();
  for (size_t i = 0; i < sorted_id.size(); ++i) {
    const bool last_of_tie = (i + 1 == sorted_id.size()) || sorted_id[i + 1] != sorted_id[i];
    if (!last_of_tie) continue;  // count the full tie group at value sorted_id[i]
    const double tpr = static_cast<double>(i + 1) / n;
    if (tpr >= tpr_target) {
      threshold = sorted_id[i];
      break;
    }
  }

  size_t false_positives = 0;
  for (double v : ood_scores) {
    if (v >= threshold) ++false_positives;
  }
  FprResult result;
  result.threshold = threshold;
  result.fpr = static_cast<double>(false_positives) / static_cast<double>(ood_scores.size());
  return result;
}

EvalReport evaluate(std::span<const double> id_scores,
                    std::span<const double> ood_scores) {
  EvalReport report;
  report.auroc = auroc(id_scores, ood_scores);
  const FprResult fpr = fpr_at_tpr(id_scores, ood_scores, 0.95);
  report.fpr95 = fpr.fpr;
  report.threshold_at_tpr95 = fpr.threshold;
  report.n_id = static_cast<std::int64_t>(id_scores.size());
  report.n_ood = static_cast<std::int64_t>(ood_scores.size());
  return report;
}

std::string to_json(const EvalReport& report) {
  std::ostringstream out;
  out << "{\"auroc\": " << format_double(report.auroc)
      << ", \"fpr95\": " << format_double(report.fpr95)
      << ", \"n_id\": " << report.n_id << ", \"n_ood\": " << report.n_ood
      << ", \"threshold_at_tpr95\": " << format_double(report.threshold_at_tpr95)
      << "}";
  return out.str();
}

}  // namespace dcc
