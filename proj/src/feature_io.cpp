#include "dcc/feature_io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "dcc/error.hpp"

namespace dcc {

namespace {

constexpr char kMatrixMagic[4] = {'F', 'M', 'A', 'T'};
constexpr char kLabelMagic[4] = {'F', 'L', 'A', 'B'};
constexpr std::uint8_t kVersion = 0x01;

void put_u32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> bytes = {
      static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
      static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  out.write(bytes.data(), 4);
}

std::uint32_t get_u32(std::istream& in, const std::string& context) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4)) {
    throw FormatError(context + ": truncated header");
  }
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f32(std::ostream& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

void put_i32(std::ostream& out, std::int32_t v) {
  put_u32(out, static_cast<std::uint32_t>(v));
}

void check_magic(std::istream& in, const char expected[4], const std::string& context) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, expected, 4) != 0) {
    throw FormatError(context + ": bad magic bytes (expected " +
                      std::string(expected, 4) + ")");
  }
  char version = 0;
  if (!in.get(version) || static_cast<std::uint8_t>(version) != kVersion) {
    throw FormatError(context + ": unsupported version byte");
  }
}

std::ifstream open_input(const std::filesystem::path& path, bool binary) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  return in;
}

std::ofstream open_output(const std::filesystem::path& path, bool binary) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

void write_csv(std::ostream& out, const FeatureSet& set) {
  const Index d = set.cols();
  if (set.has_labels()) {
    for (Index j = 0; j < d; ++j) out << 'f' << j << ',';
    out << "label\n";
  }
  for (Index i = 0; i < set.rows(); ++i) {
    for (Index j = 0; j < d; ++j) {
      if (j > 0) out << ',';
      out << format_double(set.data(i, j));
    }
    if (set.has_labels()) out << ',' << (*set.labels)[static_cast<size_t>(i)];
    out << '\n';
  }
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string::size_type start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  // Trim whitespace and a trailing CR from each field.
  for (auto& f : fields) {
    while (!f.empty() && (f.back() == '\r' || f.back() == ' ' || f.back() == '\t')) f.pop_back();
    std::string::size_type lead = 0;
    while (lead < f.size() && (f[lead] == ' ' || f[lead] == '\t')) ++lead;
    f.erase(0, lead);
  }
  return fields;
}

bool parse_full_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end;
}

FeatureSet read_csv(std::istream& in, const std::string& context) {
  std::string line;
  std::vector<std::string> header;
  bool has_header = false;
  bool label_column = false;

  // Sniff the first non-empty line: if its first field is not a number it is
  // a header row.
  std::streampos first_line_pos = in.tellg();
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") {
      first_line_pos = in.tellg();
      continue;
    }
    auto fields = split_csv_line(line);
    double probe;
    if (!parse_full_double(fields.front(), probe)) {
      has_header = true;
      header = fields;
      label_column = !header.empty() && header.back() == "label";
    } else {
      in.seekg(first_line_pos);
    }
    break;
  }

  std::vector<double> values;
  std::vector<std::int32_t> labels;
  Index cols = -1;
  Index row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto fields = split_csv_line(line);
    const Index n_fields = static_cast<Index>(fields.size());
    const Index n_features = label_column ? n_fields - 1 : n_fields;
    if (cols < 0) {
      cols = n_features;
    } else if (n_features != cols) {
      throw FormatError(context + ": row " + std::to_string(row) + " has " +
                        std::to_string(n_features) + " fields, expected " +
                        std::to_string(cols));
    }
    for (Index j = 0; j < n_features; ++j) {
      double v;
      if (!parse_full_double(fields[static_cast<size_t>(j)], v)) {
        throw FormatError(context + ": unparsable value '" +
                          fields[static_cast<size_t>(j)] + "' at row " +
                          std::to_string(row) + ", column " + std::to_string(j));
      }
      values.push_back(v);
    }
    if (label_column) {
      const std::string& f = fields.back();
      std::int32_t lab = 0;
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), lab);
      if (ec != std::errc() || ptr != f.data() + f.size()) {
        throw LabelError(context + ": unparsable label '" + f + "' at row " +
                         std::to_string(row));
      }
      labels.push_back(lab);
    }
    ++row;
  }
  if (row == 0 || cols <= 0) throw FormatError(context + ": no data rows");

  FeatureSet set;
  set.data = Eigen::Map<const Matrix>(values.data(), row, cols);
  if (label_column) set.labels = std::move(labels);
  return set;
}

}  // namespace

FileFormat parse_format(const std::string& name) {
  if (name == "fmat" || name == "binary") return FileFormat::binary;
  if (name == "csv") return FileFormat::csv;
  throw ParamError("unknown format '" + name + "' (expected fmat or csv)");
}

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

void write_fmat(std::ostream& out, const Matrix& m) {
  out.write(kMatrixMagic, 4);
  out.put(static_cast<char>(kVersion));
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, static_cast<std::uint32_t>(m.cols()));
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      put_f32(out, static_cast<float>(m(i, j)));
    }
  }
  if (!out) throw IoError("write failed while emitting FMAT block");
}

Matrix read_fmat(std::istream& in, const std::string& context) {
  check_magic(in, kMatrixMagic, context);
  const std::uint32_t rows = get_u32(in, context);
  const std::uint32_t cols = get_u32(in, context);
  if (rows == 0 || cols == 0) {
    throw FormatError(context + ": zero-sized matrix in header");
  }
  const std::size_t count = static_cast<std::size_t>(rows) * cols;
  std::vector<std::uint32_t> raw(count);
  if (!in.read(reinterpret_cast<char*>(raw.data()),
               static_cast<std::streamsize>(count * 4))) {
    throw FormatError(context + ": truncated payload (expected " +
                      std::to_string(count) + " values)");
  }
  Matrix m(rows, cols);
  std::size_t idx = 0;
  for (std::uint32_t i = 0; i < rows; ++i) {
    for (std::uint32_t j = 0; j < cols; ++j, ++idx) {
      // Payload is little-endian on disk; this build targets little-endian
      // hosts (static C++20 check below).
      static_assert(std::endian::native == std::endian::little,
                    "big-endian hosts need byte swapping here");
      float f;
      std::memcpy(&f, &raw[idx], 4);
      const double v = static_cast<double>(f);
      if (!std::isfinite(v)) {
        throw DataError(context + ": non-finite entry at row " + std::to_string(i) +
                        ", column " + std::to_string(j));
      }
      m(i, j) = v;
    }
  }
  return m;
}

void write_matrix(const std::filesystem::path& path, const Matrix& m, FileFormat format) {
  if (format == FileFormat::binary) {
    auto out = open_output(path, true);
    write_fmat(out, m);
  } else {
    auto out = open_output(path, false);
    for (Index i = 0; i < m.rows(); ++i) {
      for (Index j = 0; j < m.cols(); ++j) {
        if (j > 0) out << ',';
        out << format_double(m(i, j));
      }
      out << '\n';
    }
    if (!out) throw IoError("write failed for " + path.string());
  }
}

Matrix read_matrix(const std::filesystem::path& path, FileFormat format) {
  auto in = open_input(path, format == FileFormat::binary);
  if (format == FileFormat::binary) return read_fmat(in, path.string());
  FeatureSet set = read_csv(in, path.string());
  return set.data;
}

void write_labels(const std::filesystem::path& path, const std::vector<std::int32_t>& labels) {
  auto out = open_output(path, true);
  out.write(kLabelMagic, 4);
  out.put(static_cast<char>(kVersion));
  put_u32(out, static_cast<std::uint32_t>(labels.size()));
  for (std::int32_t v : labels) put_i32(out, v);
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<std::int32_t> read_labels(const std::filesystem::path& path) {
  auto in = open_input(path, true);
  check_magic(in, kLabelMagic, path.string());
  const std::uint32_t count = get_u32(in, path.string());
  std::vector<std::int32_t> labels(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    labels[i] = static_cast<std::int32_t>(get_u32(in, path.string()));
  }
  return labels;
}

std::filesystem::path companion_label_path(const std::filesystem::path& feature_path) {
  std::filesystem::path p = feature_path;
  p.replace_extension(".flab");
  return p;
}

FeatureSet read_features(const std::filesystem::path& path, FileFormat format) {
  FeatureSet set;
  if (format == FileFormat::binary) {
    auto in = open_input(path, true);
    set.data = read_fmat(in, path.string());
    const auto label_path = companion_label_path(path);
    if (std::filesystem::exists(label_path)) {
      set.labels = read_labels(label_path);
    }
  } else {
    auto in = open_input(path, false);
    set = read_csv(in, path.string());
  }
  validate(set);
  return set;
}

void write_features(const FeatureSet& set, const std::filesystem::path& path, FileFormat format) {
  validate(set);
  if (format == FileFormat::binary) {
    auto out = open_output(path, true);
    write_fmat(out, set.data);
    if (set.has_labels()) write_labels(companion_label_path(path), *set.labels);
  } else {
    auto out = open_output(path, false);
    write_csv(out, set);
    if (!out) throw IoError("write failed for " + path.string());
  }
}

}  // namespace dcc
