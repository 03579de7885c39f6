#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

namespace evontree {

struct GenerateRequest {
  std::string prompt;
  int max_tokens = 256;
  double temperature = 0.7;
  std::vector<std::string> stop;
};

// Scores `completion` teacher-forced after `prefix`.
struct ScoreRequest {
  std::string prefix;
  std::string completion;
};

struct ScoreResponse {
  std::vector<double> token_logprobs;  // natural log, one per completion token
};

inline constexpr const char* kGeneratePath = "/v1/generate";
inline constexpr const char* kScorePath = "/v1/score";

// Wire bodies, bit-exact:
//   /v1/generate  {"model","prompt","max_tokens","temperature","stop"} -> {"text"}
//   /v1/score     {"model","prompt","completion"} -> {"token_logprobs"}
std::string generate_body(const std::string& model, const GenerateRequest& req);
std::string score_body(const std::string& model, const ScoreRequest& req);

// Something that accepts a wire request body and returns the response body.
// Implementations throw Error(Transport) for connection-level failures and
// Error(Protocol) for responses the service rejected.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual std::string identity() const = 0;
  virtual std::string post(const std::string& path, const std::string& body) = 0;
};

class HttpTransport final : public Transport {
 public:
  explicit HttpTransport(std::string endpoint, std::chrono::seconds timeout = std::chrono::seconds(120));
  std::string identity() const override { return endpoint_; }
  std::string post(const std::string& path, const std::string& body) override;

 private:
  std::string endpoint_;
  std::chrono::seconds timeout_;
};

struct GatewayOptions {
  std::string model = "default";
  std::filesystem::path cache_dir;  // empty disables the cache
  bool read_cache = true;           // --no-cache turns reads off; writes continue
  int max_attempts = 3;
  std::chrono::milliseconds backoff{1000};  // doubles after each failed attempt
  int max_in_flight = 8;
};

struct GatewayStats {
  std::size_t requests = 0;
  std::size_t cache_hits = 0;
  std::size_t transport_calls = 0;
  std::size_t retries = 0;
};

enum class CacheRead { Allow, Bypass };

// Every model interaction goes through here: bounded concurrency,
// content-addressed caching of response bodies, retry on transport errors.
class Gateway {
 public:
  Gateway(std::shared_ptr<Transport> transport, GatewayOptions options);

  std::string generate(const GenerateRequest& req, CacheRead cache = CacheRead::Allow);
  ScoreResponse score_completion(const ScoreRequest& req);

  // Raw access used by generate/score_completion; returns the response body.
  std::string call(const std::string& path, const std::string& body, CacheRead cache = CacheRead::Allow);

  std::string cache_key(const std::string& path, const std::string& body) const;
  std::filesystem::path cache_path(const std::string& key) const;

  std::string identity() const { return transport_->identity(); }
  const GatewayOptions& options() const noexcept { return options_; }
  GatewayStats stats() const;

 private:
  std::optional<std::string> cache_lookup(const std::string& key) const;
  void cache_store(const std::string& key, const std::string& path, const std::string& body,
                   const std::string& response) const;

  std::shared_ptr<Transport> transport_;
  GatewayOptions options_;
  std::unique_ptr<std::counting_semaphore<>> in_flight_;
  std::atomic<std::size_t> requests_{0};
  std::atomic<std::size_t> cache_hits_{0};
  std::atomic<std::size_t> transport_calls_{0};
  std::atomic<std::size_t> retries_{0};
};

}  // namespace evontree
