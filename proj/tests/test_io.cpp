#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <random>
#include <string>

#include "erm/common.hpp"
#include "erm/io.hpp"

using namespace erm;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const char* name) {
  fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("format_number round-trips through strtod") {
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::uniform_int_distribution<int> exp10(-12, 12);
  for (int i = 0; i < 2000; ++i) {
    double v = unif(rng) * std::pow(10.0, exp10(rng));
    std::string s = format_number(v);
    CHECK(std::strtod(s.c_str(), nullptr) == v);
  }
  CHECK(format_number(0.0) == "0");
  CHECK(format_number(1.0) == "1");
  CHECK(format_number(0.5) == "0.5");
  CHECK(std::strtod(format_number(0.1).c_str(), nullptr) == 0.1);
  CHECK(std::strtod(format_number(std::numeric_limits<double>::min()).c_str(), nullptr) ==
        std::numeric_limits<double>::min());
}

TEST_CASE("csv assembly is deterministic") {
  CsvTable table;
  table.header = {"t", "bound", "freq"};
  table.rows = {{"1", "0.5", "0.25"}, {"2", "0.25", "0.125"}};
  CHECK(to_csv(table) == "t,bound,freq\n1,0.5,0.25\n2,0.25,0.125\n");
}

TEST_CASE("sha256 matches the reference vectors") {
  CHECK(sha256_hex("") ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");

  fs::path dir = fresh_dir("erm-io-sha");
  write_text_file(dir / "abc.txt", "abc");
  CHECK(sha256_file(dir / "abc.txt") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(read_text_file(dir / "abc.txt") == "abc");
  CHECK_THROWS(read_text_file(dir / "missing.txt"));
  fs::remove_all(dir);
}

TEST_CASE("manifest round-trips entries in file order") {
  fs::path dir = fresh_dir("erm-io-manifest");
  std::vector<ManifestEntry> entries(3);
  entries[0].file = "b.csv";
  entries[0].scenario = "tail";
  entries[0].seed = (1ULL << 63) + 5ULL;
  entries[0].sha256 = sha256_hex("b");
  entries[1].file = "a.csv";
  entries[1].scenario = "curve";
  entries[1].seed = 1;
  entries[1].sha256 = sha256_hex("a");
  entries[2].file = "c.csv";
  entries[2].scenario = "margin";
  entries[2].seed = 20260813;
  entries[2].sha256 = sha256_hex("c");

  fs::path manifest = write_manifest(dir, entries);
  CHECK(manifest.filename() == "manifest.json");
  std::vector<ManifestEntry> back = read_manifest(manifest);
  REQUIRE(back.size() == 3);
  CHECK(back[0].file == "a.csv");
  CHECK(back[1].file == "b.csv");
  CHECK(back[2].file == "c.csv");
  CHECK(back[1].seed == (1ULL << 63) + 5ULL);
  CHECK(back[0].scenario == "curve");
  CHECK(back[2].sha256 == sha256_hex("c"));

  // Byte-identical on rewrite regardless of input order.
  std::string first = read_text_file(manifest);
  std::rotate(entries.begin(), entries.begin() + 1, entries.end());
  write_manifest(dir, entries);
  CHECK(read_text_file(manifest) == first);

  CHECK_THROWS(read_manifest(dir / "nope.json"));
  write_text_file(dir / "bad.json", "{ not json");
  CHECK_THROWS(read_manifest(dir / "bad.json"));
  fs::remove_all(dir);
}

TEST_CASE("seed derivation separates streams and indices") {
  CHECK(derive_seed(1, 0, 0) != derive_seed(1, 0, 1));
  CHECK(derive_seed(1, 0, 0) != derive_seed(1, 1, 0));
  CHECK(derive_seed(1, 0, 0) != derive_seed(2, 0, 0));
  CHECK(derive_seed(20260813, 3, 17) == derive_seed(20260813, 3, 17));
}
