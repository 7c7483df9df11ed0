#include <doctest.h>

// Must match the library build, which talks TLS to real endpoints.
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <thread>

#include "selfcheck/errors.hpp"
#include "selfcheck/provider.hpp"
#include "test_support.hpp"

using namespace selfcheck;
using testing_support::FunctionBackend;
using testing_support::TempDir;

namespace {

// Local chat-completions server answering with a scripted list of statuses;
// the last entry repeats once the script runs out.
class StubServer {
 public:
  explicit StubServer(std::vector<int> statuses) : statuses_(std::move(statuses)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      const int i = hits_.fetch_add(1);
      const int status = statuses_[std::min<std::size_t>(i, statuses_.size() - 1)];
      last_body_ = req.body;
      last_auth_ = req.get_header_value("Authorization");
      res.status = status;
      if (status == 200) {
        res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"Step 1: 2 + 2 = 4"}}]})",
                        "application/json");
      } else {
        res.set_content(R"({"error":"busy"})", "application/json");
      }
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions"; }
  int hits() const { return hits_.load(); }
  const std::string& last_body() const { return last_body_; }
  const std::string& last_auth() const { return last_auth_; }

 private:
  httplib::Server server_;
  std::vector<int> statuses_;
  std::atomic<int> hits_{0};
  std::string last_body_;
  std::string last_auth_;
  int port_ = 0;
  std::thread thread_;
};

ProviderConfig stub_config(const StubServer& server) {
  ::setenv("SELFCHECK_TEST_KEY", "sk-test", 1);
  ProviderConfig config;
  config.endpoint_url = server.url();
  config.api_key_env_var_name = "SELFCHECK_TEST_KEY";
  config.max_retries = 3;
  config.backoff_base_ms = 20;
  config.requests_per_minute_cap = 6000;
  config.jitter = false;
  config.timeout_seconds = 5;
  return config;
}

CompletionRequest request(const std::string& prompt, double temperature = 0.0) {
  CompletionRequest r;
  r.model = "gpt-3.5-turbo";
  r.prompt = prompt;
  r.temperature = temperature;
  return r;
}

}  // namespace

TEST_CASE("http backend retries 429 with exponential backoff") {
  StubServer server({429, 429, 200});
  HttpBackend backend(stub_config(server));
  const auto started = std::chrono::steady_clock::now();
  const CompletionRecord record = backend.complete(request("What is 2 + 2?"));
  const auto elapsed = std::chrono::steady_clock::now() - started;

  CHECK(server.hits() == 3);
  CHECK(backend.network_calls() == 3);
  CHECK(record.retries == 2);
  CHECK(record.response_text == "Step 1: 2 + 2 = 4");
  CHECK(record.cache_key == cache_key(record.request));
  // 20 ms then 40 ms of backoff.
  CHECK(elapsed >= std::chrono::milliseconds(60));
  CHECK(server.last_auth() == "Bearer sk-test");
  const auto body = nlohmann::json::parse(server.last_body());
  CHECK(body.at("model") == "gpt-3.5-turbo");
  CHECK(body.at("messages").at(0).at("content") == "What is 2 + 2?");
}

TEST_CASE("http backend gives up after max retries") {
  StubServer server({429});
  HttpBackend backend(stub_config(server));
  CHECK_THROWS_AS(backend.complete(request("q")), RateLimited);
  CHECK(server.hits() == 4);
}

TEST_CASE("http backend retries server errors but not client errors") {
  {
    StubServer server({503, 200});
    HttpBackend backend(stub_config(server));
    CHECK(backend.complete(request("q")).retries == 1);
  }
  {
    StubServer server({400});
    HttpBackend backend(stub_config(server));
    CHECK_THROWS_AS(backend.complete(request("q")), TransportError);
    CHECK(server.hits() == 1);
  }
}

TEST_CASE("missing api key is a configuration error") {
  StubServer server({200});
  ProviderConfig config = stub_config(server);
  config.api_key_env_var_name = "SELFCHECK_TEST_KEY_UNSET";
  ::unsetenv("SELFCHECK_TEST_KEY_UNSET");
  HttpBackend backend(config);
  CHECK_THROWS_AS(backend.complete(request("q")), ConfigError);
  CHECK(server.hits() == 0);
}

TEST_CASE("backoff schedule doubles") {
  const auto delays = backoff_schedule(4, 500);
  REQUIRE(delays.size() == 4);
  CHECK(delays[0].count() == 500);
  CHECK(delays[1].count() == 1000);
  CHECK(delays[2].count() == 2000);
  CHECK(delays[3].count() == 4000);
}

TEST_CASE("rate limiter spaces requests beyond the burst") {
  RateLimiter limiter(600);  // 10 per second, burst of 600
  const auto started = std::chrono::steady_clock::now();
  for (int i = 0; i < 600; ++i) limiter.acquire();
  CHECK(std::chrono::steady_clock::now() - started < std::chrono::milliseconds(50));
  limiter.acquire();
  limiter.acquire();
  CHECK(std::chrono::steady_clock::now() - started >= std::chrono::milliseconds(150));
}

TEST_CASE("cache key covers model, prompt, temperature and seed only") {
  CompletionRequest a = request("p");
  CompletionRequest b = a;
  b.max_tokens = 99;
  b.role_tag = RoleTag::check_compare;
  CHECK(cache_key(a) == cache_key(b));
  b.seed = 3;
  CHECK(cache_key(a) != cache_key(b));
  CHECK(cache_key(a) != cache_key(request("p", 0.7)));
  CHECK(is_cache_key(cache_key(a)));
  CHECK_FALSE(is_cache_key("not-a-key"));
}

TEST_CASE("record serialization round trips") {
  CompletionRecord record;
  record.request = request("Solve \"x\"\n\tnow", 0.5);
  record.request.seed = 17;
  record.request.role_tag = RoleTag::check_regen;
  record.response_text = "Step 1: x = 1";
  record.latency_ms = 12;
  record.retries = 1;
  record.cache_key = cache_key(record.request);
  CHECK(parse_record(serialize_record(record)) == record);
  CHECK_THROWS_AS(parse_record("{not json"), CacheCorrupt);
  auto j = record_to_json(record);
  j["cache_key"] = std::string(64, '0');
  CHECK_THROWS_AS(parse_record(j.dump()), CacheCorrupt);
}

TEST_CASE("cache stores 10000 records and serves them back without calls") {
  TempDir dir("cache");
  FunctionBackend inner([](const CompletionRequest& r) { return "echo " + r.prompt; });
  CachingBackend cache(inner, dir.path());
  constexpr int kRecords = 10000;
  for (int i = 0; i < kRecords; ++i) cache.complete(request("prompt " + std::to_string(i)));
  CHECK(inner.calls() == kRecords);
  CHECK(cache.keys().size() == kRecords);

  FunctionBackend fresh([](const CompletionRequest&) -> std::string { throw TransportError("offline"); });
  CachingBackend warm(fresh, dir.path());
  for (int i = 0; i < kRecords; ++i) {
    const auto record = warm.complete(request("prompt " + std::to_string(i)));
    REQUIRE(record.response_text == "echo prompt " + std::to_string(i));
  }
  CHECK(fresh.calls() == 0);
  CHECK(warm.hits() == kRecords);
}

TEST_CASE("corrupt cache file is a miss and gets overwritten") {
  TempDir dir("corrupt");
  FunctionBackend inner([](const CompletionRequest&) { return "fresh"; });
  CachingBackend cache(inner, dir.path());
  const CompletionRequest r = request("q");
  const std::string key = cache_key(r);
  testing_support::write_file(dir / key, "{\"truncated\": ");
  CHECK(cache.complete(r).response_text == "fresh");
  CHECK(inner.calls() == 1);
  CHECK(cache.misses() == 1);
  CHECK(parse_record(testing_support::read_file(dir / key)).response_text == "fresh");
  CHECK(cache.complete(r).response_text == "fresh");
  CHECK(inner.calls() == 1);
}

TEST_CASE("replay serves recorded keys and fails loudly on misses") {
  TempDir dir("replay");
  FunctionBackend inner([](const CompletionRequest&) { return "recorded"; });
  {
    CachingBackend cache(inner, dir.path());
    cache.complete(request("known"));
  }
  ReplayBackend replay(dir.path());
  CHECK(replay.size() == 1);
  CHECK(replay.complete(request("known")).response_text == "recorded");
  CHECK_THROWS_AS(replay.complete(request("unknown")), ReplayMiss);
  CHECK_THROWS_AS(ReplayBackend(dir / "absent"), MissingInput);
}
