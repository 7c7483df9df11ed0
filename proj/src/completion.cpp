#include "selfcheck/completion.hpp"

#include <array>
#include <cstdio>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "selfcheck/errors.hpp"

namespace selfcheck {

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest.data(), &length,
                 EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * length);
  for (unsigned int i = 0; i < length; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0x0f]);
  }
  return out;
}

std::string cache_key(const CompletionRequest& request) {
  nlohmann::json seed = nullptr;
  if (request.seed) seed = *request.seed;
  const nlohmann::json material = nlohmann::json::array(
      {request.model, request.prompt, request.temperature, seed});
  return sha256_hex(material.dump());
}

}  // namespace selfcheck
