#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace erm {

// Shortest decimal string that parses back to exactly the same double.
// Keeps CSV hashes stable across platforms.
std::string format_number(double value);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

std::string to_csv(const CsvTable& table);
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

struct ManifestEntry {
  std::string file;  // path relative to the manifest's directory
  std::string scenario;
  std::uint64_t seed = 0;
  std::string sha256;
};

// Writes entries in file-name order as manifest.json next to the outputs.
std::filesystem::path write_manifest(const std::filesystem::path& out_dir,
                                     std::vector<ManifestEntry> entries);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

}  // namespace erm
