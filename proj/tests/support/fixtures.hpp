#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace testing_support {

// Parsing fixtures: one JSON object per line of tests/data/parsing_fixtures.jsonl.
std::vector<nlohmann::json> load_parsing_fixtures(const std::filesystem::path& path);

// Runs one fixture; returns a description of the mismatch, or nullopt.
std::optional<std::string> run_parsing_fixture(const nlohmann::json& fixture);

// Every template rendered on a context made of placeholders ([Q], [S0], [I0],
// ...), keyed by golden file stem.
std::map<std::string, std::string> render_placeholder_prompts();

}  // namespace testing_support
