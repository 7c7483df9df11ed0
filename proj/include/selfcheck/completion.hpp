#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace selfcheck {

// Which pipeline role issued a completion; recorded for auditing only.
enum class RoleTag {
  generate,
  check_target,
  check_collect,
  check_regen,
  check_compare,
  check_variant,
};

std::string_view to_string(RoleTag tag);
RoleTag role_tag_from_string(std::string_view name);

struct CompletionRequest {
  std::string model;
  std::string prompt;
  double temperature = 0.0;
  int max_tokens = 512;
  std::optional<std::int64_t> seed;
  RoleTag role_tag = RoleTag::generate;

  bool operator==(const CompletionRequest&) const = default;
};

struct CompletionRecord {
  CompletionRequest request;
  std::string response_text;
  std::int64_t latency_ms = 0;
  int retries = 0;
  std::string cache_key;

  bool operator==(const CompletionRecord&) const = default;
};

// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

// SHA-256 (lowercase hex) over the fields that determine a completion:
// model, prompt, temperature and seed. max_tokens and role_tag are excluded.
std::string cache_key(const CompletionRequest& request);

}  // namespace selfcheck
