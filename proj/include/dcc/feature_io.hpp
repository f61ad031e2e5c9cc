#ifndef DCC_FEATURE_IO_HPP
#define DCC_FEATURE_IO_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "dcc/feature_set.hpp"
#include "dcc/types.hpp"

namespace dcc {

enum class FileFormat { binary, csv };

FileFormat parse_format(const std::string& name);  // "fmat" | "csv"

// ---------------------------------------------------------------------------
// FMAT matrix blocks
//
//   magic "FMAT", version byte 0x01,
//   u32 little-endian rows, u32 little-endian cols,
//   rows*cols IEEE-754 binary32 little-endian values, row-major.
//
// Values are stored at 32-bit precision; in-memory matrices are 64-bit, so a
// write quantizes once and every later round-trip is bitwise stable.
//
// Label files use the same framing:
//   magic "FLAB", version byte 0x01, u32 count, count x i32 little-endian.
// ---------------------------------------------------------------------------

void write_fmat(std::ostream& out, const Matrix& m);
Matrix read_fmat(std::istream& in, const std::string& context);

void write_matrix(const std::filesystem::path& path, const Matrix& m, FileFormat format);
Matrix read_matrix(const std::filesystem::path& path, FileFormat format);

void write_labels(const std::filesystem::path& path, const std::vector<std::int32_t>& labels);
std::vector<std::int32_t> read_labels(const std::filesystem::path& path);

/// Sibling label file for a binary feature file: extension replaced by ".flab".
std::filesystem::path companion_label_path(const std::filesystem::path& feature_path);

// ---------------------------------------------------------------------------
// FeatureSet I/O
//
// binary: FMAT file; labels are attached iff the companion ".flab" file exists
//         (and are written there when present).
// csv:    one row per line, comma separated, 17 significant digits. When the
//         set carries labels a header "f0,...,f{d-1},label" is emitted and the
//         label occupies the last column.
// ---------------------------------------------------------------------------

FeatureSet read_features(const std::filesystem::path& path, FileFormat format);
void write_features(const FeatureSet& set, const std::filesystem::path& path, FileFormat format);

/// Formats a double with up to 17 significant digits ("%.17g"), enough for an
/// exact decimal round-trip of IEEE binary64.
std::string format_double(double value);

}  // namespace dcc

#endif  // DCC_FEATURE_IO_HPP
