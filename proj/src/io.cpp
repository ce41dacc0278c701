#include "spiked/io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace spiked::io {
namespace {

constexpr std::array<char, 8> kMatrixMagic{'S', 'P', 'K', 'D', 'M', 'A', 'T', '1'};
constexpr std::array<char, 8> kVectorMagic{'S', 'P', 'K', 'D', 'V', 'E', 'C', '1'};

void put_u64(std::ostream& os, std::uint64_t v) {
  std::array<char, 8> b{};
  for (int i = 0; i < 8; ++i) b[static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * i)) & 0xffU);
  os.write(b.data(), 8);
}

std::uint64_t get_u64(std::istream& is, const std::filesystem::path& path) {
  std::array<unsigned char, 8> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), 8)) throw MalformedFile("truncated header in " + path.string());
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
  return v;
}

void put_f64s(std::ostream& os, const double* data, std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) put_u64(os, std::bit_cast<std::uint64_t>(data[i]));
}

void get_f64s(std::istream& is, double* data, std::size_t count, const std::filesystem::path& path) {
  std::vector<unsigned char> raw(count * 8);
  if (count > 0 && !is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size())))
    throw MalformedFile("truncated payload in " + path.string());
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t v = 0;
    for (int b = 7; b >= 0; --b) v = (v << 8) | raw[i * 8 + static_cast<std::size_t>(b)];
    data[i] = std::bit_cast<double>(v);
  }
  if (is.peek() != std::char_traits<char>::eof()) throw MalformedFile("trailing bytes after payload in " + path.string());
}

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode) {
  std::ofstream os(path, mode | std::ios::out | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  return os;
}

std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode) {
  std::ifstream is(path, mode | std::ios::in);
  if (!is) throw IoError("cannot open " + path.string() + " for reading");
  return is;
}

void finish(std::ofstream& os, const std::filesystem::path& path) {
  os.flush();
  if (!os) throw IoError("write failed for " + path.string());
}

bool has_magic(const std::filesystem::path& path, const std::array<char, 8>& magic) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string() + " for reading");
  std::array<char, 8> head{};
  if (!is.read(head.data(), 8)) return false;
  return head == magic;
}

std::vector<std::vector<double>> parse_csv(const std::filesystem::path& path) {
  auto is = open_in(path, {});
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      std::string_view field(line.data() + start, (comma == std::string::npos ? line.size() : comma) - start);
      while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
      while (!field.empty() && field.back() == ' ') field.remove_suffix(1);
      double v = 0;
      const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (ec != std::errc() || ptr != field.data() + field.size() || field.empty())
        throw MalformedFile(path.string() + ":" + std::to_string(lineno) + ": not a number: '" + std::string(field) +
                            "'");
      row.push_back(v);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

Format format_from_string(const std::string& s) {
  if (s == "binary") return Format::Binary;
  if (s == "csv") return Format::Csv;
  throw InvalidArgument("unknown format '" + s + "' (expected binary or csv)");
}

std::string_view extension(Format f) { return f == Format::Binary ? ".bin" : ".csv"; }

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

void write_matrix_binary(const std::filesystem::path& path, const Matrix<double>& m) {
  auto os = open_out(path, std::ios::binary);
  os.write(kMatrixMagic.data(), 8);
  put_u64(os, static_cast<std::uint64_t>(m.rows()));
  put_u64(os, static_cast<std::uint64_t>(m.cols()));
  put_f64s(os, m.data(), static_cast<std::size_t>(m.size()));
  finish(os, path);
}

Matrix<double> read_matrix_binary(const std::filesystem::path& path) {
  auto is = open_in(path, std::ios::binary);
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), 8) || magic != kMatrixMagic) throw MalformedFile("bad matrix magic in " + path.string());
  const std::uint64_t rows = get_u64(is, path);
  const std::uint64_t cols = get_u64(is, path);
  const auto bytes = std::filesystem::file_size(path);
  if (rows != 0 && cols > (bytes / 8) / rows) throw MalformedFile("dimensions exceed file size in " + path.string());
  Matrix<double> m(static_cast<Index>(rows), static_cast<Index>(cols));
  get_f64s(is, m.data(), static_cast<std::size_t>(rows * cols), path);
  return m;
}

void write_vector_binary(const std::filesystem::path& path, const Vector<double>& v) {
  auto os = open_out(path, std::ios::binary);
  os.write(kVectorMagic.data(), 8);
  put_u64(os, static_cast<std::uint64_t>(v.size()));
  put_f64s(os, v.data(), static_cast<std::size_t>(v.size()));
  finish(os, path);
}

Vector<double> read_vector_binary(const std::filesystem::path& path) {
  auto is = open_in(path, std::ios::binary);
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), 8) || magic != kVectorMagic) throw MalformedFile("bad vector magic in " + path.string());
  const std::uint64_t len = get_u64(is, path);
  if (len > std::filesystem::file_size(path) / 8) throw MalformedFile("length exceeds file size in " + path.string());
  Vector<double> v(static_cast<Index>(len));
  get_f64s(is, v.data(), static_cast<std::size_t>(len), path);
  return v;
}

void write_matrix_csv(const std::filesystem::path& path, const Matrix<double>& m) {
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

Matrix<double> read_matrix_csv(const std::filesystem::path& path) {
  const auto rows = parse_csv(path);
  if (rows.empty()) throw MalformedFile("empty matrix file " + path.string());
  const std::size_t cols = rows.front().size();
  Matrix<double> m(static_cast<Index>(rows.size()), static_cast<Index>(cols));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols)
      throw MalformedFile(path.string() + ": row " + std::to_string(i + 1) + " has " + std::to_string(rows[i].size()) +
                          " fields, expected " + std::to_string(cols));
    for (std::size_t j = 0; j < cols; ++j) m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  }
  return m;
}

void write_vector_csv(const std::filesystem::path& path, const Vector<double>& v) {
  std::string out;
  for (Index i = 0; i < v.size(); ++i) {
    out += format_double(v[i]);
    out += '\n';
  }
  write_text(path, out);
}

Vector<double> read_vector_csv(const std::filesystem::path& path) {
  const auto rows = parse_csv(path);
  if (rows.empty()) throw MalformedFile("empty vector file " + path.string());
  Vector<double> v(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != 1) throw MalformedFile(path.string() + ": vector file must have one value per line");
    v[static_cast<Index>(i)] = rows[i][0];
  }
  return v;
}

void write_matrix(const std::filesystem::path& path, const Matrix<double>& m, Format f) {
  f == Format::Binary ? write_matrix_binary(path, m) : write_matrix_csv(path, m);
}

void write_vector(const std::filesystem::path& path, const Vector<double>& v, Format f) {
  f == Format::Binary ? write_vector_binary(path, v) : write_vector_csv(path, v);
}

Matrix<double> read_matrix(const std::filesystem::path& path) {
  return has_magic(path, kMatrixMagic) ? read_matrix_binary(path) : read_matrix_csv(path);
}

Vector<double> read_vector(const std::filesystem::path& path) {
  return has_magic(path, kVectorMagic) ? read_vector_binary(path) : read_vector_csv(path);
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  auto os = open_out(path, std::ios::binary);
  os.write(content.data(), static_cast<std::streamsize>(content.size()));
  finish(os, path);
}

}  // namespace spiked::io
