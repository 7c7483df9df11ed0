#pragma once

#include <string>
#include <string_view>
#include <vector>

// Small ASCII string helpers shared across modules.
namespace selfcheck::text {

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);
// Replaces every whitespace run (including newlines) with a single space and
// trims both ends.
std::string collapse_whitespace(std::string_view s);
std::vector<std::string_view> split_lines(std::string_view s);
bool is_space(char c);
bool is_digit(char c);
bool is_upper(char c);
bool is_alpha(char c);

}  // namespace selfcheck::text
