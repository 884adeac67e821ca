#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"

namespace dclnas::io {

using nlohmann::json;
// Keys in insertion order, so emitted files diff cleanly.
using ojson = nlohmann::ordered_json;

std::string read_file(const std::filesystem::path& path);
// Creates parent directories. Throws IoError on failure.
void write_file(const std::filesystem::path& path, std::string_view contents);

json parse(std::string_view text, std::string_view what);

}  // namespace dclnas::io
