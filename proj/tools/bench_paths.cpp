// Benchmark: closed-form rank-1 scoring (parallel) against the per-sample
// dense-inversion reference (serial), on synthetic statistics. Prints a JSON
// line with wall times, speedup, and the largest relative score difference.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <iostream>

#include "dcc/feature_io.hpp"
#include "dcc/gaussian_stats.hpp"
#include "dcc/scoring.hpp"
#include "dcc/synth.hpp"

using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

int main(int argc, char** argv) {
  int dim = 512;
  int n_classes = 100;
  int n_test = 1000;
  int n_per_class = 20;
  int k = 0;
  int threads = 0;
  std::uint64_t seed = 7;

  CLI::App app{"compare fast and dense scoring paths"};
  app.add_option("--dim", dim, "feature dimension");
  app.add_option("--n-classes", n_classes, "number of classes");
  app.add_option("--n-test", n_test, "number of test samples");
  app.add_option("--n-per-class", n_per_class, "training samples per class");
  app.add_option("--k", k, "residual dimension (default round(d/3))");
  app.add_option("--threads", threads, "threads for the fast path (0 = auto)");
  app.add_option("--seed", seed, "scenario seed");
  CLI11_PARSE(app, argc, argv);

  dcc::SynthSpec spec;
  spec.seed = seed;
  spec.dim = dim;
  spec.n_classes = n_classes;
  spec.n_per_class = n_per_class;
  spec.n_ood = n_test;
  const dcc::SynthData data = dcc::generate(spec);

  const dcc::GaussianStats stats = dcc::fit_stats(data.train);
  if (k <= 0) k = std::max(1, static_cast<int>(std::lround(dim / 3.0)));
  const dcc::ResidualBasis basis = dcc::residual_basis(stats, k, dcc::CovSource::within);

  dcc::FeatureSet test;
  test.data = data.ood_test.data.topRows(n_test);

  dcc::ScoreConfig config;

  const auto fast_start = Clock::now();
  const dcc::ScoredBatch fast = dcc::score_batch(test, stats, &basis, config, threads);
  const double fast_seconds = seconds_since(fast_start);

  const auto dense_start = Clock::now();
  const dcc::ScoredBatch dense = dcc::score_batch_reference(test, stats, &basis, config);
  const double dense_seconds = seconds_since(dense_start);

  double max_rel_diff = 0.0;
  for (std::size_t i = 0; i < fast.size(); ++i) {
    const double diff = std::abs(fast.scores[i] - dense.scores[i]) /
                        (1.0 + std::abs(dense.scores[i]));
    max_rel_diff = std::max(max_rel_diff, diff);
  }

  std::cout << "{\"dim\": " << dim << ", \"n_classes\": " << n_classes
            << ", \"n_test\": " << n_test << ", \"k\": " << k
            << ", \"fast_seconds\": " << dcc::format_double(fast_seconds)
            << ", \"dense_seconds\": " << dcc::format_double(dense_seconds)
            << ", \"speedup\": " << dcc::format_double(dense_seconds / fast_seconds)
            << ", \"max_rel_diff\": " << dcc::format_double(max_rel_diff) << "}"
            << std::endl;
  return 0;
}
