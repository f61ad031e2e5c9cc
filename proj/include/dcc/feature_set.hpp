#ifndef DCC_FEATURE_SET_HPP
#define DCC_FEATURE_SET_HPP

#include <cstdint>
#include <optional>
#include <vector>

#include "dcc/types.hpp"

namespace dcc {

/// A batch of feature embeddings: N samples by d dimensions, plus optional
/// integer class labels in [0, n_classes).
struct FeatureSet {
  Matrix data;  // N x d
  std::optional<std::vector<std::int32_t>> labels;

  Index rows() const { return data.rows(); }
  Index cols() const { return data.cols(); }
  bool has_labels() const { return labels.has_value(); }

  /// Number of classes implied by the labels (max label + 1); 0 when unlabeled.
  int num_classes() const;
};

/// Checks the FeatureSet invariants: N >= 1, d >= 2, all entries finite,
/// labels (if any) match N, are non-negative, and cover every class index.
/// Throws DataError / LabelError naming the offending row/column.
void validate(const FeatureSet& set);

/// Returns a copy with every row scaled to unit Euclidean norm.
/// Throws DegenerateFeatureError naming the row if a row has zero norm.
FeatureSet l2_normalize(const FeatureSet& set);

/// In-place row normalization of a bare matrix (same zero-norm policy).
void l2_normalize_rows(Matrix& m);

}  // namespace dcc

#endif  // DCC_FEATURE_SET_HPP
