#ifndef DCC_STATS_ARCHIVE_HPP
#define DCC_STATS_ARCHIVE_HPP

#include <filesystem>
#include <optional>

#include "dcc/gaussian_stats.hpp"

namespace dcc {

// Fitted-stats archive: a container of named FMAT blocks.
//
//   magic "FARC", version byte 0x01,
//   u64 little-endian manifest offset, u32 little-endian block count,
//   the blocks themselves (each a complete FMAT item),
//   then at the manifest offset one text line per block:
//       "<name> <absolute-byte-offset> <rows> <cols>\n"
//
// Blocks written: means, cov_within, cov_full, precision_within,
// reg_epsilon (1x1), and, when a basis is included, basis,
// basis_eigenvalues (1xk) and basis_source (1x1; 0 = within, 1 = full).

struct StatsArchive {
  GaussianStats stats;
  std::optional<ResidualBasis> basis;
};

void write_stats_archive(const std::filesystem::path& path, const GaussianStats& stats,
                         const ResidualBasis* basis = nullptr);

StatsArchive read_stats_archive(const std::filesystem::path& path);

}  // namespace dcc

#endif  // DCC_STATS_ARCHIVE_HPP
