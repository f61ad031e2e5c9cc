#include "dcc/stats_archive.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

#include "dcc/error.hpp"
#include "dcc/feature_io.hpp"

namespace dcc {

namespace {

constexpr char kArchiveMagic[4] = {'F', 'A', 'R', 'C'};
constexpr std::uint8_t kVersion = 0x01;

void put_u32(std::ostream& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::ostream& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_uint(std::istream& in, int bytes, const std::string& context) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    const int byte = in.get();
    if (byte == std::char_traits<char>::eof()) {
      throw FormatError(context + ": truncated archive header");
    }
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(byte)) << (8 * i);
  }
  return v;
}

}  // namespace

void write_stats_archive(const std::filesystem::path& path, const GaussianStats& stats,
                         const ResidualBasis* basis) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");

  std::vector<std::pair<std::string, const Matrix*>> blocks;
  blocks.emplace_back("means", &stats.means);
  blocks.emplace_back("cov_within", &stats.cov_within);
  blocks.emplace_back("cov_full", &stats.cov_full);
  blocks.emplace_back("precision_within", &stats.precision_within);
  Matrix epsilon(1, 1);
  epsilon(0, 0) = stats.reg_epsilon;
  blocks.emplace_back("reg_epsilon", &epsilon);
  Matrix eigenvalues, source;
  if (basis != nullptr) {
    blocks.emplace_back("basis", &basis->basis);
    eigenvalues = basis->eigenvalues.transpose();
    blocks.emplace_back("basis_eigenvalues", &eigenvalues);
    source = Matrix(1, 1);
    source(0, 0) = basis->source == CovSource::within ? 0.0 : 1.0;
    blocks.emplace_back("basis_source", &source);
  }

  out.write(kArchiveMagic, 4);
  out.put(static_cast<char>(kVersion));
  const std::streampos manifest_offset_pos = out.tellp();
  put_u64(out, 0);  // patched below
  put_u32(out, static_cast<std::uint32_t>(blocks.size()));

  std::ostringstream manifest;
  for (const auto& [name, m] : blocks) {
    manifest << name << ' ' << out.tellp() << ' ' << m->rows() << ' ' << m->cols() << '\n';
    write_fmat(out, *m);
  }

  const std::uint64_t manifest_offset = static_cast<std::uint64_t>(out.tellp());
  out << manifest.str();
  out.seekp(manifest_offset_pos);
  put_u64(out, manifest_offset);
  if (!out) throw IoError("write failed for " + path.string());
}

StatsArchive read_stats_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  const std::string context = path.string();

  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kArchiveMagic, 4) != 0) {
    throw FormatError(context + ": not a stats archive (bad magic)");
  }
  if (in.get() != kVersion) throw FormatError(context + ": unsupported archive version");
  const std::uint64_t manifest_offset = get_uint(in, 8, context);
  const std::uint32_t n_blocks = static_cast<std::uint32_t>(get_uint(in, 4, context));

  in.seekg(static_cast<std::streamoff>(manifest_offset));
  std::map<std::string, std::uint64_t> offsets;
  for (std::uint32_t i = 0; i < n_blocks; ++i) {
    std::string name;
    std::uint64_t offset, rows, cols;
    if (!(in >> name >> offset >> rows >> cols)) {
      throw FormatError(context + ": truncated manifest");
    }
    offsets[name] = offset;
  }

  auto read_block = [&](const std::string& name) -> Matrix {
    auto it = offsets.find(name);
    if (it == offsets.end()) {
      throw FormatError(context + ": missing block '" + name + "'");
    }
    in.clear();
    in.seekg(static_cast<std::streamoff>(it->second));
    return read_fmat(in, context + ":" + name);
  };

  StatsArchive archive;
  archive.stats.means = read_block("means");
  archive.stats.cov_within = read_block("cov_within");
  archive.stats.cov_full = read_block("cov_full");
  archive.stats.precision_within = read_block("precision_within");
  archive.stats.reg_epsilon = read_block("reg_epsilon")(0, 0);
  archive.stats.n_classes = static_cast<int>(archive.stats.means.rows());
  archive.stats.dim = static_cast<int>(archive.stats.means.cols());

  if (offsets.count("basis")) {
    ResidualBasis basis;
    basis.basis = read_block("basis");
    basis.eigenvalues = read_block("basis_eigenvalues").row(0).transpose();
    basis.source =
        read_block("basis_source")(0, 0) == 0.0 ? CovSource::within : CovSource::full;
    archive.basis = std::move(basis);
  }
  return archive;
}

}  // namespace dcc
