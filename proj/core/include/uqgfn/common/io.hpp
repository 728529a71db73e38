#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace uqgfn::io {

using Json = nlohmann::json;

Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& doc);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// Simple comma-separated table: header plus rows of cells.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

/// Round-trip decimal form of a double (shortest representation that parses back exactly).
std::string format_double(double value);
double parse_double(const std::string& text);

/// FNV-1a 64-bit digest rendered as 16 lowercase hex characters.
std::string fnv1a_hex(const std::string& data);

}  // namespace uqgfn::io
