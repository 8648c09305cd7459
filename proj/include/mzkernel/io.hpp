#pragma once

#include "mzkernel/linalg.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <string_view>

namespace mzkernel::io {

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);
double parse_double(std::string_view text);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);

/// Dense CSV: one matrix row per line, comma separated, no header. Every row
/// must have the same number of fields.
Matrix read_dense_csv(const std::filesystem::path& path);
void write_dense_csv(const std::filesystem::path& path, const Matrix& m);

/// Matrix Market coordinate/real files with `general` or `symmetric`
/// symmetry. Symmetric files store the lower triangle.
SparseMatrix read_matrix_market(const std::filesystem::path& path);
void write_matrix_market_symmetric(const std::filesystem::path& path, const SparseMatrix& m);

/// FNV-1a over the raw bytes of the matrices, hex encoded.
std::string fingerprint(std::initializer_list<const Matrix*> parts);

}  // namespace mzkernel::io
