#include "dcc/diagnostics.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "dcc/dynamic_geometry.hpp"
#include "dcc/error.hpp"
#include "dcc/feature_io.hpp"

namespace dcc {

std::vector<SampleDiagnostics> diagnose_batch(const FeatureSet& test,
                                              const GaussianStats& stats,
                                              const ResidualBasis& basis,
                                              const ScoreConfig& config,
                                              int threads) {
  if (!config.rsp) throw ParamError("diagnose_batch requires residual space projection");
  if (test.cols() != stats.dim) {
    throw ParamError("test dimension does not match fitted dimension");
  }
  if (basis.basis.cols() != stats.dim) {
    throw ParamError("basis dimension does not match fitted dimension");
  }

  Matrix rows = test.data;
  if (config.normalize) l2_normalize_rows(rows);

  // Adjusted scores supply the clamp/fallback status and the adjusted argmin.
  ScoreConfig adjusted_config = config;
  adjusted_config.method = Method::dcc;
  adjusted_config.dme = true;
  adjusted_config.normalize = false;  // rows already normalized above
  FeatureSet prepared;
  prepared.data = rows;
  const ScoredBatch adjusted = score_batch(prepared, stats, &basis, adjusted_config, threads);

  const Matrix& precision = stats.precision_within;
  const Matrix class_gram = stats.means * precision;  // mean_i^T P
  Vector class_quad(stats.means.rows());
  for (Index i = 0; i < stats.means.rows(); ++i) {
    class_quad(i) = class_gram.row(i).dot(stats.means.row(i));
  }

  const Index n = rows.rows();
  std::vector<SampleDiagnostics> out(static_cast<size_t>(n));
  const int n_threads = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(static) num_threads(n_threads)
  for (Index i = 0; i < n; ++i) {
    const Vector f = rows.row(i).transpose();
    const Vector residual = basis.basis.transpose() * (basis.basis * f);
    const Vector principal = f - residual;

    // Unadjusted Mahalanobis argmin picks the anchor class.
    const Vector pf = precision * f;
    const double f_quad = f.dot(pf);
    Index best_class = 0;
    double best = std::numeric_limits<double>::infinity();
    for (Index c = 0; c < stats.means.rows(); ++c) {
      const double dist = f_quad - 2.0 * class_gram.row(c).dot(f) + class_quad(c);
      if (dist < best) {
        best = dist;
        best_class = c;
      }
    }

    const Vector anchor = stats.means.row(best_class).transpose() - principal;
    const Vector p_residual = precision * residual;

    SampleDiagnostics d;
    d.p = residual.dot(p_residual);
    d.q = anchor.dot(precision * anchor);
    d.s = anchor.dot(p_residual);
    d.residual_norm = residual.norm();
    d.chosen_class = static_cast<std::int32_t>(best_class);
    d.adjusted_class = adjusted.argmin_class[static_cast<size_t>(i)];
    d.condition_holds =
        d.p > 1.0 ? (d.s - 1.0) * (d.s - 1.0) <= (d.p - 1.0) * (d.q - 1.0) : true;
    d.clamped = adjusted.clamped[static_cast<size_t>(i)] != 0;
    out[static_cast<size_t>(i)] = d;
  }
  return out;
}

void write_diagnostics_csv(const std::filesystem::path& path,
                           const std::vector<SampleDiagnostics>& diagnostics) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "index,p,q,s,residual_norm,chosen_class,condition_holds,clamped\n";
  for (size_t i = 0; i < diagnostics.size(); ++i) {
    const SampleDiagnostics& d = diagnostics[i];
    out << i << ',' << format_double(d.p) << ',' << format_double(d.q) << ','
        << format_double(d.s) << ',' << format_double(d.residual_norm) << ','
        << d.chosen_class << ',' << int(d.condition_holds) << ',' << int(d.clamped)
        << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

Histogram make_histogram(const std::vector<LabeledValues>& values, int bins) {
  if (bins < 1) throw ParamError("bins must be at least 1");
  if (values.empty()) throw DataError("no labeled value vectors given");
  for (const auto& lv : values) {
    if (lv.values.empty()) {
      throw DataError("empty value vector for label '" + lv.label + "'");
    }
  }

  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& lv : values) {
    for (double v : lv.values) {
      if (!std::isfinite(v)) {
        throw DataError("non-finite value for label '" + lv.label + "'");
      }
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }

  Histogram histogram;
  histogram.edges.resize(static_cast<size_t>(bins) + 1);
  const double width = (hi - lo) / bins;
  for (int b = 0; b <= bins; ++b) {
    histogram.edges[static_cast<size_t>(b)] = lo + width * b;
  }
  histogram.edges.back() = hi;

  for (const auto& lv : values) {
    histogram.labels.push_back(lv.label);
    std::vector<std::int64_t> counts(static_cast<size_t>(bins), 0);
    for (double v : lv.values) {
      int b;
      if (width > 0.0) {
        b = static_cast<int>((v - lo) / width);
        b = std::clamp(b, 0, bins - 1);  // v == hi lands in the last bin
      } else {
        b = 0;  // degenerate range: everything in one bin
      }
      ++counts[static_cast<size_t>(b)];
    }
    histogram.counts.push_back(std::move(counts));
  }
  return histogram;
}

void export_histograms(const std::vector<LabeledValues>& values, int bins,
                       const std::filesystem::path& path) {
  const Histogram histogram = make_histogram(values, bins);
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "bin_left,bin_right";
  for (const auto& label : histogram.labels) out << ",count_" << label;
  out << '\n';
  const size_t n_bins = histogram.edges.size() - 1;
  for (size_t b = 0; b < n_bins; ++b) {
    out << format_double(histogram.edges[b]) << ',' << format_double(histogram.edges[b + 1]);
    for (const auto& counts : histogram.counts) out << ',' << counts[b];
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

double histogram_overlap(const Histogram& histogram, std::size_t label_a,
                         std::size_t label_b) {
  if (label_a >= histogram.counts.size() || label_b >= histogram.counts.size()) {
    throw ParamError("histogram label index out of range");
  }
  double total_a = 0.0, total_b = 0.0;
  for (std::int64_t c : histogram.counts[label_a]) total_a += static_cast<double>(c);
  for (std::int64_t c : histogram.counts[label_b]) total_b += static_cast<double>(c);
  double overlap = 0.0;
  for (size_t b = 0; b < histogram.counts[label_a].size(); ++b) {
    overlap += std::min(static_cast<double>(histogram.counts[label_a][b]) / total_a,
                        static_cast<double>(histogram.counts[label_b][b]) / total_b);
  }
  return overlap;
}

}  // namespace dcc
