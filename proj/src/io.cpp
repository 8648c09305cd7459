#include "mzkernel/io.hpp"

#include "mzkernel/error.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <vector>

namespace mzkernel::io {

namespace fs = std::filesystem;

std::string format_double(double value) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc()) throw Error(ErrorCode::io, "failed to format number");
  return std::string(buf.data(), end);
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string_view> split_whitespace(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

}  // namespace

double parse_double(std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw Error(ErrorCode::io, "not a number: '" + std::string(text) + "'");
  return value;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

nlohmann::json read_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::io, path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const nlohmann::json& doc) { write_text(path, doc.dump(2) + "\n"); }

Matrix read_dense_csv(const fs::path& path) {
  const std::string text = read_text(path);
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<double> row;
    for (auto field : split(line, ',')) row.push_back(parse_double(field));
    if (!rows.empty() && row.size() != rows.front().size())
      throw Error(ErrorCode::shape, path.string() + ": ragged rows in dense CSV");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) return Matrix();
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return m;
}

void write_dense_csv(const fs::path& path, const Matrix& m) {
  std::string out;
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out += ',';
      out += format_double(m(i, j));
    }
    out += '\n';
  }
  write_text(path, out);
}

SparseMatrix read_matrix_market(const fs::path& path) {
  const std::string text = read_text(path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::io, path.string() + ": empty file");
  auto header = split_whitespace(line);
  auto lower = [](std::string_view s) {
    std::string r(s);
    for (auto& c : r) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return r;
  };
  if (header.size() < 5 || lower(header[0]) != "%%matrixmarket" || lower(header[1]) != "matrix")
    throw Error(ErrorCode::io, path.string() + ": missing MatrixMarket banner");
  if (lower(header[2]) != "coordinate" || lower(header[3]) != "real")
    throw Error(ErrorCode::io, path.string() + ": only coordinate/real matrices are supported");
  const std::string symmetry = lower(header[4]);
  if (symmetry != "general" && symmetry != "symmetric")
    throw Error(ErrorCode::io, path.string() + ": unsupported symmetry '" + symmetry + "'");
  const bool symmetric = symmetry == "symmetric";

  while (std::getline(in, line) && (trim(line).empty() || trim(line).front() == '%')) {
  }
  auto size_fields = split_whitespace(line);
  if (size_fields.size() != 3) throw Error(ErrorCode::io, path.string() + ": bad size line");
  const auto rows = static_cast<Index>(parse_double(size_fields[0]));
  const auto cols = static_cast<Index>(parse_double(size_fields[1]));
  const auto nnz = static_cast<Index>(parse_double(size_fields[2]));

  std::vector<Eigen::Triplet<double, Index>> triplets;
  triplets.reserve(static_cast<std::size_t>(symmetric ? 2 * nnz : nnz));
  Index seen = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty() || trim(line).front() == '%') continue;
    auto f = split_whitespace(line);
    if (f.size() != 3) throw Error(ErrorCode::io, path.string() + ": bad entry line '" + line + "'");
    const auto i = static_cast<Index>(parse_double(f[0])) - 1;
    const auto j = static_cast<Index>(parse_double(f[1])) - 1;
    const double v = parse_double(f[2]);
    if (i < 0 || j < 0 || i >= rows || j >= cols)
      throw Error(ErrorCode::io, path.string() + ": entry index out of range");
    triplets.emplace_back(i, j, v);
    if (symmetric && i != j) triplets.emplace_back(j, i, v);
    ++seen;
  }
  if (seen != nnz) throw Error(ErrorCode::io, path.string() + ": entry count does not match header");
  SparseMatrix m(rows, cols);
  m.setFromTriplets(triplets.begin(), triplets.end());
  return m;
}

void write_matrix_market_symmetric(const fs::path& path, const SparseMatrix& m) {
  std::string body;
  Index count = 0;
  for (Index j = 0; j < m.outerSize(); ++j) {
    for (SparseMatrix::InnerIterator it(m, j); it; ++it) {
      if (it.row() < j) continue;
      body += std::to_string(it.row() + 1) + ' ' + std::to_string(j + 1) + ' ' + format_double(it.value()) + '\n';
      ++count;
    }
  }
  std::string out = "%%MatrixMarket matrix coordinate real symmetric\n";
  out += std::to_string(m.rows()) + ' ' + std::to_string(m.cols()) + ' ' + std::to_string(count) + '\n';
  out += body;
  write_text(path, out);
}

std::string fingerprint(std::initializer_list<const Matrix*> parts) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const Matrix* m : parts) {
    const std::int64_t dims[2] = {m->rows(), m->cols()};
    mix(dims, sizeof dims);
    mix(m->data(), static_cast<std::size_t>(m->size()) * sizeof(double));
  }
  std::ostringstream ss;
  ss << std::hex;
  ss.width(16);
  ss.fill('0');
  ss << h;
  return ss.str();
}

}  // namespace mzkernel::io
