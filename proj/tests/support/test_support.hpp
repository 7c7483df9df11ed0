#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <random>
#include <sstream>
#include <string>

#include "selfcheck/completion.hpp"
#include "selfcheck/errors.hpp"
#include "selfcheck/provider.hpp"

namespace testing_support {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("selfcheck_" + tag + "_" + std::to_string(rd()) + "_" +
             std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
}

// Answers every request with a caller-supplied function. Thread safe as long
// as the function is.
class FunctionBackend : public selfcheck::Backend {
 public:
  using Responder = std::function<std::string(const selfcheck::CompletionRequest&)>;

  explicit FunctionBackend(Responder responder) : responder_(std::move(responder)) {}

  selfcheck::CompletionRecord complete(const selfcheck::CompletionRequest& request) override {
    calls_.fetch_add(1);
    selfcheck::CompletionRecord record;
    record.request = request;
    record.response_text = responder_(request);
    record.cache_key = selfcheck::cache_key(request);
    return record;
  }

  int calls() const { return calls_.load(); }

 private:
  Responder responder_;
  std::atomic<int> calls_{0};
};

}  // namespace testing_support
