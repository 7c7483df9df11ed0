#include "selfcheck/provider.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include "selfcheck/errors.hpp"

namespace selfcheck {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

// --- record format -----------------------------------------------------------

ordered_json record_to_json(const CompletionRecord& record) {
  const CompletionRequest& req = record.request;
  ordered_json request;
  request["model"] = req.model;
  request["prompt"] = req.prompt;
  request["temperature"] = req.temperature;
  request["max_tokens"] = req.max_tokens;
  request["seed"] = req.seed ? ordered_json(*req.seed) : ordered_json(nullptr);
  request["role_tag"] = std::string(to_string(req.role_tag));

  ordered_json out;
  out["cache_key"] = record.cache_key;
  out["request"] = std::move(request);
  out["response_text"] = record.response_text;
  out["latency_ms"] = record.latency_ms;
  out["retries"] = record.retries;
  return out;
}

CompletionRecord record_from_json(const json& j) {
  CompletionRecord record;
  const json& req = j.at("request");
  record.request.model = req.at("model").get<std::string>();
  record.request.prompt = req.at("prompt").get<std::string>();
  record.request.temperature = req.at("temperature").get<double>();
  record.request.max_tokens = req.at("max_tokens").get<int>();
  if (!req.at("seed").is_null()) {
    record.request.seed = req.at("seed").get<std::int64_t>();
  }
  record.request.role_tag =
      role_tag_from_string(req.at("role_tag").get<std::string>());
  record.response_text = j.at("response_text").get<std::string>();
  record.latency_ms = j.at("latency_ms").get<std::int64_t>();
  record.retries = j.value("retries", 0);
  record.cache_key = j.at("cache_key").get<std::string>();
  return record;
}

std::string serialize_record(const CompletionRecord& record) {
  return record_to_json(record).dump(2) + "\n";
}

CompletionRecord parse_record(std::string_view bytes) {
  CompletionRecord record;
  try {
    record = record_from_json(json::parse(bytes));
  } catch (const std::exception& e) {
    throw CacheCorrupt(std::string("malformed completion record: ") +
                       e.what());
  }
  if (record.cache_key != cache_key(record.request)) {
    throw CacheCorrupt("completion record key does not match its request");
  }
  return record;
}

bool is_cache_key(std::string_view name) {
  return name.size() == 64 &&
         std::all_of(name.begin(), name.end(), [](char c) {
           return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
         });
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace

// --- retry / rate limiting -----------------------------------------------------

std::vector<std::chrono::milliseconds> backoff_schedule(int max_retries,
                                                        int backoff_base_ms) {
  std::vector<std::chrono::milliseconds> delays;
  std::int64_t delay = std::max(0, backoff_base_ms);
  for (int k = 0; k < max_retries; ++k) {
    delays.emplace_back(delay);
    delay *= 2;
  }
  return delays;
}

RateLimiter::RateLimiter(int requests_per_minute)
    : capacity_(std::max(1, requests_per_minute)),
      tokens_(capacity_),
      refill_per_second_(capacity_ / 60.0),
      last_refill_(Clock::now()) {}

void RateLimiter::acquire() {
  std::unique_lock lock(mutex_);
  for (;;) {
    const auto now = Clock::now();
    const double elapsed =
        std::chrono::duration<double>(now - last_refill_).count();
    tokens_ = std::min(capacity_, tokens_ + elapsed * refill_per_second_);
    last_refill_ = now;
    if (tokens_ >= 1.0) {
      tokens_ -= 1.0;
      return;
    }
    const double wait_s = (1.0 - tokens_) / refill_per_second_;
    lock.unlock();
    std::this_thread::sleep_for(std::chrono::duration<double>(wait_s));
    lock.lock();
  }
}

// --- HTTP -----------------------------------------------------------------------

json build_chat_request_body(const CompletionRequest& request) {
  json body;
  body["model"] = request.model;
  body["messages"] =
      json::array({json{{"role", "user"}, {"content", request.prompt}}});
  body["temperature"] = request.temperature;
  body["max_tokens"] = request.max_tokens;
  if (request.seed) body["seed"] = *request.seed;
  return body;
}

std::string parse_chat_response_body(std::string_view body) {
  try {
    const json j = json::parse(body);
    const json& content = j.at("choices").at(0).at("message").at("content");
    if (content.is_null()) return "";
    return content.get<std::string>();
  } catch (const std::exception& e) {
    throw TransportError(std::string("malformed chat completion response: ") +
                         e.what());
  }
}

HttpBackend::HttpBackend(ProviderConfig config)
    : config_(std::move(config)), limiter_(config_.requests_per_minute_cap) {
  const std::string& url = config_.endpoint_url;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("endpoint_url needs a scheme: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
}

CompletionRecord HttpBackend::complete(const CompletionRequest& request) {
  const char* api_key = std::getenv(config_.api_key_env_var_name.c_str());
  if (api_key == nullptr || *api_key == '\0') {
    throw ConfigError("API key environment variable " +
                      config_.api_key_env_var_name + " is not set");
  }
  const std::string body = build_chat_request_body(request).dump();
  const httplib::Headers headers = {
      {"Authorization", std::string("Bearer ") + api_key}};
  const auto delays =
      backoff_schedule(config_.max_retries, config_.backoff_base_ms);

  thread_local std::mt19937_64 jitter_rng{std::random_device{}()};
  std::uniform_real_distribution<double> jitter(0.5, 1.5);

  const auto started = std::chrono::steady_clock::now();
  bool rate_limited = false;
  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      auto delay = delays[attempt - 1];
      if (config_.jitter) {
        delay = std::chrono::milliseconds(
            static_cast<std::int64_t>(delay.count() * jitter(jitter_rng)));
      }
      spdlog::debug("retry {} after {} ms ({})", attempt, delay.count(),
                    last_error);
      std::this_thread::sleep_for(delay);
    }
    limiter_.acquire();
    network_calls_.fetch_add(1);

    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(config_.timeout_seconds);
    client.set_read_timeout(config_.timeout_seconds);
    auto result = client.Post(path_, headers, body, "application/json");
    if (!result) {
      rate_limited = false;
      last_error = "connection failed: " + httplib::to_string(result.error());
      continue;
    }
    const int status = result->status;
    if (status == 200) {
      CompletionRecord record;
      record.request = request;
      record.response_text = parse_chat_response_body(result->body);
      record.latency_ms =
          std::chrono::duration_cast<std::chrono::milliseconds>(
              std::chrono::steady_clock::now() - started)
              .count();
      record.retries = attempt;
      record.cache_key = cache_key(request);
      return record;
    }
    last_error = "HTTP " + std::to_string(status);
    rate_limited = status == 429;
    if (status != 429 && status < 500) {
      throw TransportError(last_error + ": " + result->body);
    }
  }
  if (rate_limited) {
    throw RateLimited("rate limited after " +
                      std::to_string(config_.max_retries) + " retries");
  }
  throw TransportError(last_error + " after " +
                       std::to_string(config_.max_retries) + " retries");
}

// --- replay ---------------------------------------------------------------------

ReplayBackend::ReplayBackend(const fs::path& directory) {
  if (!fs::is_directory(directory)) {
    throw MissingInput("replay directory not found: " + directory.string());
  }
  for (const auto& entry : fs::directory_iterator(directory)) {
    const std::string name = entry.path().filename().string();
    if (!entry.is_regular_file() || !is_cache_key(name)) continue;
    try {
      CompletionRecord record = parse_record(read_file(entry.path()));
      if (record.cache_key != name) {
        throw CacheCorrupt("file name does not match record key");
      }
      records_.emplace(name, std::move(record));
    } catch (const CacheCorrupt& e) {
      spdlog::warn("skipping replay record {}: {}", name, e.what());
    }
  }
}

CompletionRecord ReplayBackend::complete(const CompletionRequest& request) {
  const std::string key = cache_key(request);
  const auto it = records_.find(key);
  if (it == records_.end()) {
    throw ReplayMiss("no replay record for key " + key + " (role " +
                     std::string(to_string(request.role_tag)) + ")");
  }
  CompletionRecord record = it->second;
  record.latency_ms = 0;
  return record;
}

// --- cache ----------------------------------------------------------------------

CachingBackend::CachingBackend(Backend& inner, fs::path directory)
    : inner_(inner), directory_(std::move(directory)) {
  fs::create_directories(directory_);
}

std::optional<CompletionRecord> CachingBackend::load(
    const std::string& key) const {
  const fs::path path = directory_ / key;
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) return std::nullopt;
  try {
    CompletionRecord record = parse_record(read_file(path));
    if (record.cache_key != key) {
      throw CacheCorrupt("file name does not match record key");
    }
    return record;
  } catch (const CacheCorrupt& e) {
    spdlog::warn("cache record {} is corrupt, treating as miss: {}", key,
                 e.what());
    return std::nullopt;
  }
}

std::vector<std::string> CachingBackend::keys() const {
  std::vector<std::string> out;
  for (const auto& entry : fs::directory_iterator(directory_)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && is_cache_key(name)) out.push_back(name);
  }
  std::sort(out.begin(), out.end());
  return out;
}

void CachingBackend::store(const CompletionRecord& record) {
  const std::string bytes = serialize_record(record);
  std::lock_guard lock(write_mutex_);
  const fs::path temp =
      directory_ / (".tmp-" + record.cache_key + "-" +
                    std::to_string(temp_counter_.fetch_add(1)));
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    out << bytes;
    if (!out) throw Error("failed to write cache file " + temp.string());
  }
  fs::rename(temp, directory_ / record.cache_key);
}

CompletionRecord CachingBackend::complete(const CompletionRequest& request) {
  const std::string key = cache_key(request);
  if (auto cached = load(key)) {
    hits_.fetch_add(1);
    return *cached;
  }
  misses_.fetch_add(1);
  CompletionRecord record = inner_.complete(request);
  record.cache_key = key;
  store(record);
  return record;
}

}  // namespace selfcheck
