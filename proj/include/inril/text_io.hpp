#pragma once

#include <filesystem>
#include <string>

namespace inril {

/// %.17g: shortest fixed recipe that round-trips every double.
std::string format_double(double v);

/// Strict strtod wrapper; throws ParseError naming `context` on junk.
double parse_double(const std::string& token, const std::string& context);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace inril
