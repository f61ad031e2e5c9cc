#include "dcc/feature_set.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dcc/error.hpp"

namespace dcc {

int FeatureSet::num_classes() const {
  if (!labels || labels->empty()) return 0;
  return static_cast<int>(*std::max_element(labels->begin(), labels->end())) + 1;
}

void validate(const FeatureSet& set) {
  if (set.rows() < 1) throw DataError("feature set must have at least one row");
  if (set.cols() < 2) throw DataError("feature dimension must be at least 2");
  for (Index i = 0; i < set.rows(); ++i) {
    for (Index j = 0; j < set.cols(); ++j) {
      if (!std::isfinite(set.data(i, j))) {
        throw DataError("non-finite entry at row " + std::to_string(i) +
                        ", column " + std::to_string(j));
      }
    }
  }
  if (!set.labels) return;
  if (static_cast<Index>(set.labels->size()) != set.rows()) {
    throw LabelError("label count " + std::to_string(set.labels->size()) +
                     " does not match row count " + std::to_string(set.rows()));
  }
  const int n_classes = set.num_classes();
  std::vector<bool> seen(static_cast<size_t>(n_classes), false);
  for (size_t i = 0; i < set.labels->size(); ++i) {
    const std::int32_t label = (*set.labels)[i];
    if (label < 0) {
      throw LabelError("negative label " + std::to_string(label) + " at row " +
                       std::to_string(i));
    }
    seen[static_cast<size_t>(label)] = true;
  }
  for (int c = 0; c < n_classes; ++c) {
    if (!seen[static_cast<size_t>(c)]) {
      throw LabelError("class " + std::to_string(c) + " has no samples");
    }
  }
}

void l2_normalize_rows(Matrix& m) {
  for (Index i = 0; i < m.rows(); ++i) {
    const double norm = m.row(i).norm();
    if (norm == 0.0) {
      throw DegenerateFeatureError("zero-norm feature row " + std::to_string(i));
    }
    m.row(i) /= norm;
  }
}

FeatureSet l2_normalize(const FeatureSet& set) {
  FeatureSet out = set;
  l2_normalize_rows(out.data);
  return out;
}

}  // namespace dcc
