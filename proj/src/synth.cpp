#include "dcc/synth.hpp"

#include <cmath>
#include <numbers>

#include "dcc/error.hpp"

namespace dcc {

namespace {

// Stream ids keep the per-purpose substreams disjoint; per-class substreams
// are offset by the class index, so class blocks could be generated in
// parallel without changing the output.
constexpr std::uint64_t kStreamMeans = 0x10000;
constexpr std::uint64_t kStreamTrain = 0x20000;
constexpr std::uint64_t kStreamIdTest = 0x30000;
constexpr std::uint64_t kStreamOod = 0x40000;
constexpr std::uint64_t kStreamOutlierDir = 0x50000;

Vector gaussian_vector(CounterRng& rng, int dim) {
  Vector v(dim);
  for (int i = 0; i < dim; ++i) v(i) = rng.next_gaussian();
  return v;
}

Vector unit_vector(CounterRng& rng, int dim) {
  Vector v = gaussian_vector(rng, dim);
  const double norm = v.norm();
  if (norm == 0.0) throw NumericalError("degenerate random direction");
  return v / norm;
}

void validate_spec(const SynthSpec& spec) {
  if (spec.n_classes < 1) throw ParamError("n_classes must be positive");
  if (spec.dim < 2) throw ParamError("dim must be at least 2");
  if (spec.n_per_class < 1) throw ParamError("n_per_class must be positive");
  if (spec.n_ood < 1) throw ParamError("n_ood must be positive");
  if (!(spec.within_sigma > 0.0)) throw ParamError("within_sigma must be > 0");
  if (spec.outlier_fraction < 0.0 || spec.outlier_fraction >= 1.0) {
    throw ParamError("outlier_fraction must lie in [0, 1)");
  }
  if (spec.outlier_magnitude < 0.0) throw ParamError("outlier_magnitude must be >= 0");
}

}  // namespace

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream)
    : key_(mix(mix(seed) ^ (stream + 0xD1B54A32D192ED03ULL))) {}

std::uint64_t CounterRng::mix(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t CounterRng::next_u64() {
  return mix(key_ + (counter_++) * 0x9E3779B97F4A7C15ULL);
}

double CounterRng::next_unit() {
  // 53 random bits, offset by half an ulp so the result is never 0 or 1.
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double CounterRng::next_gaussian() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_;
  }
  const double u1 = next_unit();
  const double u2 = next_unit();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  cached_ = radius * std::sin(angle);
  has_cached_ = true;
  return radius * std::cos(angle);
}

Vector outlier_direction(const SynthSpec& spec) {
  CounterRng dir_rng(spec.outlier_direction_seed, kStreamOutlierDir);
  return unit_vector(dir_rng, spec.dim);
}

SynthData generate(const SynthSpec& spec) {
  validate_spec(spec);
  const int d = spec.dim;
  const int n_train = spec.n_classes * spec.n_per_class;

  const Vector outlier_dir = outlier_direction(spec);

  Matrix means(spec.n_classes, d);
  for (int c = 0; c < spec.n_classes; ++c) {
    CounterRng rng(spec.seed, kStreamMeans + static_cast<std::uint64_t>(c));
    means.row(c) = unit_vector(rng, d).transpose();
  }

  SynthData out;
  out.train.data.resize(n_train, d);
  out.train.labels = std::vector<std::int32_t>(static_cast<size_t>(n_train));
  out.id_test.data.resize(n_train, d);
  out.ood_test.data.resize(spec.n_ood, d);

  const int n_outliers =
      static_cast<int>(std::floor(spec.outlier_fraction * spec.n_per_class));

  for (int c = 0; c < spec.n_classes; ++c) {
    CounterRng train_rng(spec.seed, kStreamTrain + static_cast<std::uint64_t>(c));
    CounterRng test_rng(spec.seed, kStreamIdTest + static_cast<std::uint64_t>(c));
    for (int i = 0; i < spec.n_per_class; ++i) {
      const int row = c * spec.n_per_class + i;
      Vector sample =
          means.row(c).transpose() + spec.within_sigma * gaussian_vector(train_rng, d);
      if (i < n_outliers) sample += spec.outlier_magnitude * outlier_dir;
      out.train.data.row(row) = sample.transpose();
      (*out.train.labels)[static_cast<size_t>(row)] = c;

      out.id_test.data.row(row) =
          (means.row(c).transpose() + spec.within_sigma * gaussian_vector(test_rng, d))
              .transpose();
    }
  }

  CounterRng ood_rng(spec.seed, kStreamOod);
  for (int i = 0; i < spec.n_ood; ++i) {
    const int c = i % spec.n_classes;
    Vector sample = means.row(c).transpose() + spec.ood_shift * outlier_dir +
                    spec.within_sigma * gaussian_vector(ood_rng, d);
    out.ood_test.data.row(i) = sample.transpose();
  }

  l2_normalize_rows(out.train.data);
  l2_normalize_rows(out.id_test.data);
  l2_normalize_rows(out.ood_test.data);
  return out;
}

}  // namespace dcc
