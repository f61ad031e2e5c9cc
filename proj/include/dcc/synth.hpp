#ifndef DCC_SYNTH_HPP
#define DCC_SYNTH_HPP

#include <cstdint>

#include "dcc/feature_set.hpp"

namespace dcc {

// ---------------------------------------------------------------------------
// Counter-based PRNG: the SplitMix64 finalizer applied to key + i * gamma.
// Output i depends only on (seed, stream, i), so any block of the generated
// data can be reproduced independently. Bit-exact for a given (seed, stream)
// on any platform; the Gaussian transform below additionally depends on the
// platform's libm (see README).
// ---------------------------------------------------------------------------
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64();
  /// Uniform double strictly inside (0, 1).
  double next_unit();
  /// Standard normal via Box-Muller (pairs generated, second value cached).
  double next_gaussian();

  static std::uint64_t mix(std::uint64_t z);

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

/// Parameters for the synthetic ID/OOD scenario: Gaussian class clusters on
/// the unit sphere, a fraction of training samples pushed along a fixed
/// contamination direction, and OOD clusters shifted along that same
/// direction so the inflated-variance axis is exactly where OOD data lives.
struct SynthSpec {
  std::uint64_t seed = 7;
  int n_classes = 8;
  int dim = 32;
  int n_per_class = 500;
  double within_sigma = 0.1;
  int n_ood = 2000;
  double ood_shift = 3.0;
  double outlier_fraction = 0.1;
  double outlier_magnitude = 5.0;
  std::uint64_t outlier_direction_seed = 1;
};

struct SynthData {
  FeatureSet train;     // labeled, n_classes * n_per_class rows
  FeatureSet id_test;   // unlabeled, n_classes * n_per_class rows
  FeatureSet ood_test;  // unlabeled, n_ood rows
};

/// Deterministic generation: a pure function of the spec. All rows are
/// L2-normalized; labels are attached to the training set only.
/// Throws ParamError for invalid specs.
SynthData generate(const SynthSpec& spec);

/// The unit contamination direction shared by train outliers and the OOD
/// shift, derived from outlier_direction_seed. Exposed for analysis.
Vector outlier_direction(const SynthSpec& spec);

}  // namespace dcc

#endif  // DCC_SYNTH_HPP
