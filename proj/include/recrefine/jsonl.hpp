#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace recrefine {

using json = nlohmann::json;

/// Reads one JSON object per non-empty line. Throws ValidationError naming the
/// file and line on malformed input.
std::vector<json> read_jsonl(const std::filesystem::path& path);

/// Writes one compact JSON value per line, creating parent directories.
void write_jsonl(const std::filesystem::path& path, const std::vector<json>& rows);

json read_json_file(const std::filesystem::path& path, bool allow_comments = false);
void write_json_file(const std::filesystem::path& path, const json& value);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace recrefine
