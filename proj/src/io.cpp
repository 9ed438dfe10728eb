#include "erm/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

#include <nlohmann/json.hpp>

#include "erm/common.hpp"

namespace erm {

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::string to_csv(const CsvTable& table) {
  std::string out;
  auto append_row = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i > 0) out.push_back(',');
      out += cells[i];
    }
    out.push_back('\n');
  };
  append_row(table.header);
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size())
      throw ArgumentError("csv: row width does not match header");
    append_row(row);
  }
  return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ArgumentError("cannot open for writing: " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw ArgumentError("write failed: " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open for reading: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

namespace {

std::string digest_hex(const unsigned char* digest, unsigned len) {
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

}  // namespace

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  if (!EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr))
    throw ArgumentError("sha256 digest failed");
  return digest_hex(digest, len);
}

std::string sha256_file(const std::filesystem::path& path) {
  return sha256_hex(read_text_file(path));
}

std::filesystem::path write_manifest(const std::filesystem::path& out_dir,
                                     std::vector<ManifestEntry> entries) {
  std::sort(entries.begin(), entries.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) { return a.file < b.file; });
  nlohmann::ordered_json doc = nlohmann::ordered_json::array();
  for (const auto& e : entries) {
    doc.push_back({{"file", e.file},
                   {"scenario", e.scenario},
                   {"seed", e.seed},
                   {"sha256", e.sha256}});
  }
  auto path = out_dir / "manifest.json";
  write_text_file(path, doc.dump(2) + "\n");
  return path;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& ex) {
    throw ArgumentError("manifest " + path.string() + ": " + ex.what());
  }
  if (!doc.is_array()) throw ArgumentError("manifest " + path.string() + ": expected an array");
  std::vector<ManifestEntry> entries;
  entries.reserve(doc.size());
  for (const auto& item : doc) {
    ManifestEntry e;
    try {
      e.file = item.at("file").get<std::string>();
      e.scenario = item.at("scenario").get<std::string>();
      e.seed = item.at("seed").get<std::uint64_t>();
      e.sha256 = item.at("sha256").get<std::string>();
    } catch (const nlohmann::json::exception& ex) {
      throw ArgumentError("manifest " + path.string() + ": " + ex.what());
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

}  // namespace erm
