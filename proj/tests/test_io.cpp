#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "spiked/io.hpp"
#include "spiked/matgen.hpp"

using namespace spiked;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("spiked_io_" + std::to_string(::getpid()))) {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

}  // namespace

TEST_CASE("format_double round-trips") {
  for (double v : {0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, 0.0, -0.0}) {
    const std::string s = io::format_double(v);
    CHECK(std::stod(s) == v);
  }
  CHECK(io::format_double(std::nan("")) == "nan");
  CHECK(io::format_double(-INFINITY) == "-inf");
  CHECK(io::format_double(4.25) == "4.25");
}

TEST_CASE("binary matrix and vector round trip bit-exactly") {
  TempDir dir;
  const auto g = sample_goe<double>(17, Seed{1});
  io::write_matrix_binary(dir.path / "m.bin", g.matrix());
  CHECK(io::read_matrix(dir.path / "m.bin") == g.matrix());
  CHECK(fs::file_size(dir.path / "m.bin") == 8 + 16 + 17 * 17 * 8);
  const std::string bytes = slurp(dir.path / "m.bin");
  CHECK(bytes.substr(0, 8) == "SPKDMAT1");
  CHECK(static_cast<unsigned char>(bytes[8]) == 17);
  CHECK(bytes[9] == 0);

  const Vector<double> v = make_signal_block<double>(50, 0.1).entries();
  io::write_vector_binary(dir.path / "v.bin", v);
  CHECK(io::read_vector(dir.path / "v.bin") == v);
  CHECK(slurp(dir.path / "v.bin").substr(0, 8) == "SPKDVEC1");
}

TEST_CASE("little-endian payload layout") {
  TempDir dir;
  Vector<double> v(1);
  v << 1.0;
  io::write_vector_binary(dir.path / "one.bin", v);
  const std::string b = slurp(dir.path / "one.bin");
  // 1.0 is 0x3FF0000000000000.
  CHECK(static_cast<unsigned char>(b[16 + 6]) == 0xF0);
  CHECK(static_cast<unsigned char>(b[16 + 7]) == 0x3F);
}

TEST_CASE("CSV matrix and vector round trip exactly") {
  TempDir dir;
  const auto g = sample_goe<double>(9, Seed{2});
  io::write_matrix_csv(dir.path / "m.csv", g.matrix());
  CHECK(io::read_matrix(dir.path / "m.csv") == g.matrix());
  const std::string text = slurp(dir.path / "m.csv");
  CHECK(text.find('\r') == std::string::npos);
  CHECK(std::count(text.begin(), text.end(), '\n') == 9);
  const Vector<double> v = Vector<double>::LinSpaced(5, -1.0, 1.0);
  io::write_vector(dir.path / "v.csv", v, io::Format::Csv);
  CHECK(io::read_vector(dir.path / "v.csv") == v);
}

TEST_CASE("malformed inputs") {
  TempDir dir;
  io::write_text(dir.path / "bad.csv", "1,2\n3,x\n");
  CHECK_THROWS_AS(io::read_matrix(dir.path / "bad.csv"), io::MalformedFile);
  io::write_text(dir.path / "ragged.csv", "1,2\n3\n");
  CHECK_THROWS_AS(io::read_matrix(dir.path / "ragged.csv"), io::MalformedFile);
  io::write_text(dir.path / "empty.csv", "");
  CHECK_THROWS_AS(io::read_matrix(dir.path / "empty.csv"), io::MalformedFile);

  io::write_matrix_binary(dir.path / "m.bin", Matrix<double>::Ones(3, 3));
  std::string bytes = slurp(dir.path / "m.bin");
  io::write_text(dir.path / "trunc.bin", bytes.substr(0, bytes.size() - 4));
  CHECK_THROWS_AS(io::read_matrix(dir.path / "trunc.bin"), io::MalformedFile);
  io::write_text(dir.path / "long.bin", bytes + "x");
  CHECK_THROWS_AS(io::read_matrix(dir.path / "long.bin"), io::MalformedFile);
  bytes[8] = '\x7f';
  bytes[15] = '\x7f';
  io::write_text(dir.path / "huge.bin", bytes);
  CHECK_THROWS_AS(io::read_matrix(dir.path / "huge.bin"), io::MalformedFile);
}

TEST_CASE("I/O errors") {
  CHECK_THROWS_AS(io::read_matrix("/nonexistent/m.bin"), IoError);
  CHECK_THROWS_AS(io::write_text("/nonexistent/dir/x.csv", "1\n"), IoError);
  CHECK_THROWS_AS(io::format_from_string("hdf5"), InvalidArgument);
  CHECK(io::extension(io::Format::Binary) == ".bin");
}
