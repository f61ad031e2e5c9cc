#ifndef DCC_DIAGNOSTICS_HPP
#define DCC_DIAGNOSTICS_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dcc/feature_set.hpp"
#include "dcc/gaussian_stats.hpp"
#include "dcc/scoring.hpp"

namespace dcc {

/// Per-sample instrumentation of the dynamic adjustment: the nonnegativity
/// scalars p, q, s evaluated against the regularized within-class precision,
/// the residual-space norm, and the clamp/fallback status of the adjusted
/// score. With f = f_r + f_r' (residual + principal split), q and s use the
/// anchor mean_c - f_r', where mean_c is the class mean with the minimum
/// *unadjusted* Mahalanobis distance to f.
struct SampleDiagnostics {
  double p = 0.0;
  double q = 0.0;
  double s = 0.0;
  double residual_norm = 0.0;
  std::int32_t chosen_class = 0;    // argmin of the unadjusted distance
  std::int32_t adjusted_class = 0;  // argmin of the adjusted distance
  bool condition_holds = false;
  bool clamped = false;
};

/// Requires config.rsp (and a basis); config.normalize is honored the same
/// way score_batch honors it.
std::vector<SampleDiagnostics> diagnose_batch(const FeatureSet& test,
                                              const GaussianStats& stats,
                                              const ResidualBasis& basis,
                                              const ScoreConfig& config,
                                              int threads = 0);

/// CSV columns: index,p,q,s,residual_norm,chosen_class,condition_holds,clamped.
void write_diagnostics_csv(const std::filesystem::path& path,
                           const std::vector<SampleDiagnostics>& diagnostics);

struct LabeledValues {
  std::string label;
  std::vector<double> values;
};

/// Uniform joint binning: edges span [min, max] over all labels together so
/// overlaid distributions share axes. The final bin is closed on the right.
struct Histogram {
  std::vector<std::string> labels;
  std::vector<double> edges;                        // bins + 1
  std::vector<std::vector<std::int64_t>> counts;    // per label, length bins
};

Histogram make_histogram(const std::vector<LabeledValues>& values, int bins);

/// CSV columns: bin_left,bin_right,count_<label>... one row per bin.
void export_histograms(const std::vector<LabeledValues>& values, int bins,
                       const std::filesystem::path& path);

/// Shared-bin intersection mass between two labels' normalized histograms:
/// sum over bins of min(count_a/n_a, count_b/n_b). 1 means identical binned
/// distributions, 0 means disjoint support.
double histogram_overlap(const Histogram& histogram, std::size_t label_a,
                         std::size_t label_b);

}  // namespace dcc

#endif  // DCC_DIAGNOSTICS_HPP
