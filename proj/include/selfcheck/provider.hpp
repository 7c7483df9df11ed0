#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "selfcheck/completion.hpp"

namespace selfcheck {

struct ProviderConfig {
  std::string endpoint_url = "https://api.openai.com/v1/chat/completions";
  std::string api_key_env_var_name = "OPENAI_API_KEY";
  int max_retries = 3;
  int backoff_base_ms = 500;
  int requests_per_minute_cap = 60;
  bool jitter = true;  // disabled in tests so the retry schedule is exact
  int timeout_seconds = 120;
};

// Anything that turns a request into a record. Implementations must be safe
// to call from several threads at once.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual CompletionRecord complete(const CompletionRequest& request) = 0;
};

// --- on-disk record format -------------------------------------------------

nlohmann::ordered_json record_to_json(const CompletionRecord& record);
CompletionRecord record_from_json(const nlohmann::json& j);
// The exact bytes stored in a cache/replay file.
std::string serialize_record(const CompletionRecord& record);
// Throws CacheCorrupt when the text is not a well-formed record or its stored
// cache_key does not match the request it holds.
CompletionRecord parse_record(std::string_view bytes);

// --- retry / rate limiting --------------------------------------------------

// Delay before retry k (0-based) is backoff_base_ms * 2^k.
std::vector<std::chrono::milliseconds> backoff_schedule(int max_retries,
                                                        int backoff_base_ms);

// Token bucket holding up to `requests_per_minute` tokens, refilled
// continuously at requests_per_minute / 60 per second.
class RateLimiter {
 public:
  explicit RateLimiter(int requests_per_minute);
  void acquire();

 private:
  using Clock = std::chrono::steady_clock;
  std::mutex mutex_;
  double capacity_;
  double tokens_;
  double refill_per_second_;
  Clock::time_point last_refill_;
};

// --- backends ---------------------------------------------------------------

// OpenAI-compatible chat-completions endpoint.
class HttpBackend : public Backend {
 public:
  explicit HttpBackend(ProviderConfig config);
  CompletionRecord complete(const CompletionRequest& request) override;

  std::int64_t network_calls() const { return network_calls_.load(); }

 private:
  ProviderConfig config_;
  std::string scheme_host_port_;
  std::string path_;
  RateLimiter limiter_;
  std::atomic<std::int64_t> network_calls_{0};
};

nlohmann::json build_chat_request_body(const CompletionRequest& request);
std::string parse_chat_response_body(std::string_view body);

// Serves recorded completions by cache key and never touches the network.
class ReplayBackend : public Backend {
 public:
  explicit ReplayBackend(const std::filesystem::path& directory);
  CompletionRecord complete(const CompletionRequest& request) override;

  std::size_t size() const { return records_.size(); }

 private:
  std::map<std::string, CompletionRecord, std::less<>> records_;
};

// Content-addressed cache in front of another backend: one file per record,
// named by its cache key. Writes go through a temporary file and a rename.
class CachingBackend : public Backend {
 public:
  CachingBackend(Backend& inner, std::filesystem::path directory);
  CompletionRecord complete(const CompletionRequest& request) override;

  std::optional<CompletionRecord> load(const std::string& key) const;
  std::vector<std::string> keys() const;

  std::int64_t hits() const { return hits_.load(); }
  std::int64_t misses() const { return misses_.load(); }

 private:
  void store(const CompletionRecord& record);

  Backend& inner_;
  std::filesystem::path directory_;
  std::mutex write_mutex_;
  std::atomic<std::int64_t> hits_{0};
  std::atomic<std::int64_t> misses_{0};
  std::atomic<std::uint64_t> temp_counter_{0};
};

bool is_cache_key(std::string_view name);

}  // namespace selfcheck
