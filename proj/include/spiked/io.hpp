#pragma once

// File formats.
//
// Binary matrix (little-endian throughout):
//   bytes 0-7   magic "SPKDMAT1"
//   bytes 8-15  u64 rows
//   bytes 16-23 u64 cols
//   then rows*cols f64 values, column-major
//
// Binary vector:
//   bytes 0-7   magic "SPKDVEC1"
//   bytes 8-15  u64 length
//   then length f64 values
//
// CSV: one matrix row per line, comma separated, no header; a vector is one value per
// line. Numbers use the shortest representation that round-trips, '.' decimal point,
// LF line endings.

#include <filesystem>
#include <string>
#include <string_view>

#include "spiked/core.hpp"

namespace spiked::io {

/// File content does not match the expected format.
class MalformedFile : public IoError {
 public:
  using IoError::IoError;
};

enum class Format { Binary, Csv };

Format format_from_string(const std::string& s);
std::string_view extension(Format f);

/// Shortest round-trip decimal form ("0.1", "1e-05", "nan", "inf").
std::string format_double(double v);

void write_matrix_binary(const std::filesystem::path& path, const Matrix<double>& m);
Matrix<double> read_matrix_binary(const std::filesystem::path& path);
void write_vector_binary(const std::filesystem::path& path, const Vector<double>& v);
Vector<double> read_vector_binary(const std::filesystem::path& path);

void write_matrix_csv(const std::filesystem::path& path, const Matrix<double>& m);
Matrix<double> read_matrix_csv(const std::filesystem::path& path);
void write_vector_csv(const std::filesystem::path& path, const Vector<double>& v);
Vector<double> read_vector_csv(const std::filesystem::path& path);

void write_matrix(const std::filesystem::path& path, const Matrix<double>& m, Format f);
void write_vector(const std::filesystem::path& path, const Vector<double>& v, Format f);

/// Detects the binary magic; anything else is parsed as CSV.
Matrix<double> read_matrix(const std::filesystem::path& path);
Vector<double> read_vector(const std::filesystem::path& path);

/// Writes `content` to `path`, throwing IoError if the file cannot be created.
void write_text(const std::filesystem::path& path, const std::string& content);

}  // namespace spiked::io
