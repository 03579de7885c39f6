#include "evontree/gateway.hpp"

#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "evontree/error.hpp"
#include "evontree/hashing.hpp"
#include "evontree/triple_io.hpp"

namespace evontree {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string generate_body(const std::string& model, const GenerateRequest& req) {
  ordered_json j;
  j["model"] = model;
  j["prompt"] = req.prompt;
  j["max_tokens"] = req.max_tokens;
  j["temperature"] = req.temperature;
  j["stop"] = req.stop;
  return j.dump();
}

std::string score_body(const std::string& model, const ScoreRequest& req) {
  ordered_json j;
  j["model"] = model;
  j["prompt"] = req.prefix;
  j["completion"] = req.completion;
  return j.dump();
}

HttpTransport::HttpTransport(std::string endpoint, std::chrono::seconds timeout)
    : endpoint_(std::move(endpoint)), timeout_(timeout) {
  while (!endpoint_.empty() && endpoint_.back() == '/') endpoint_.pop_back();
}

std::string HttpTransport::post(const std::string& path, const std::string& body) {
  // A client per call keeps concurrent callers independent.
  httplib::Client client(endpoint_);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);
  auto res = client.Post(path, body, "application/json");
  if (!res) throw Error(ErrorCode::Transport, endpoint_ + path + ": " + httplib::to_string(res.error()));
  if (res->status >= 500)
    throw Error(ErrorCode::Transport, endpoint_ + path + ": HTTP " + std::to_string(res->status));
  if (res->status != 200)
    throw Error(ErrorCode::Protocol, endpoint_ + path + ": HTTP " + std::to_string(res->status) + " " + res->body);
  return res->body;
}

Gateway::Gateway(std::shared_ptr<Transport> transport, GatewayOptions options)
    : transport_(std::move(transport)), options_(std::move(options)) {
  if (!transport_) throw Error(ErrorCode::InvalidParams, "gateway needs a transport");
  if (options_.max_in_flight < 1) throw Error(ErrorCode::InvalidParams, "max_in_flight must be >= 1");
  if (options_.max_attempts < 1) throw Error(ErrorCode::InvalidParams, "max_attempts must be >= 1");
  in_flight_ = std::make_unique<std::counting_semaphore<>>(options_.max_in_flight);
}

std::string Gateway::cache_key(const std::string& path, const std::string& body) const {
  // json (not ordered_json) sorts keys, which canonicalizes the request.
  json canonical;
  canonical["endpoint"] = transport_->identity();
  canonical["path"] = path;
  canonical["body"] = json::parse(body);
  return sha256_hex(canonical.dump());
}

std::filesystem::path Gateway::cache_path(const std::string& key) const {
  return options_.cache_dir / key.substr(0, 2) / (key + ".json");
}

std::optional<std::string> Gateway::cache_lookup(const std::string& key) const {
  if (options_.cache_dir.empty()) return std::nullopt;
  auto p = cache_path(key);
  std::error_code ec;
  if (!std::filesystem::exists(p, ec)) return std::nullopt;
  try {
    auto j = json::parse(read_file(p));
    return j.at("response").get<std::string>();
  } catch (const std::exception&) {
    return std::nullopt;  // torn or foreign file: treat as a miss and overwrite
  }
}

void Gateway::cache_store(const std::string& key, const std::string& path, const std::string& body,
                          const std::string& response) const {
  if (options_.cache_dir.empty()) return;
  ordered_json j;
  j["key"] = key;
  j["endpoint"] = transport_->identity();
  j["path"] = path;
  j["request"] = body;
  j["response"] = response;
  atomic_write(cache_path(key), j.dump());
}

std::string Gateway::call(const std::string& path, const std::string& body, CacheRead cache) {
  ++requests_;
  const auto key = cache_key(path, body);
  if (options_.read_cache && cache == CacheRead::Allow) {
    if (auto hit = cache_lookup(key)) {
      ++cache_hits_;
      return *hit;
    }
  }

  std::string response;
  {
    in_flight_->acquire();
    struct Release {
      std::counting_semaphore<>* s;
      ~Release() { s->release(); }
    } release{in_flight_.get()};

    auto delay = options_.backoff;
    for (int attempt = 1;; ++attempt) {
      try {
        ++transport_calls_;
        response = transport_->post(path, body);
        break;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::Transport) throw;
        if (attempt >= options_.max_attempts) throw TransportError(e.what(), attempt);
        ++retries_;
        std::this_thread::sleep_for(delay);
        delay *= 2;
      }
    }
  }
  cache_store(key, path, body, response);
  return response;
}

std::string Gateway::generate(const GenerateRequest& req, CacheRead cache) {
  if (req.prompt.empty()) throw Error(ErrorCode::InvalidParams, "generate prompt must be non-empty");
  if (req.max_tokens < 1) throw Error(ErrorCode::InvalidParams, "max_tokens must be positive");
  if (!(req.temperature >= 0.0)) throw Error(ErrorCode::InvalidParams, "temperature must be non-negative");
  const auto body = call(kGeneratePath, generate_body(options_.model, req), cache);
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Protocol, std::string("generate response is not JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("text") || !j["text"].is_string())
    throw Error(ErrorCode::Protocol, "generate response lacks a string \"text\" field");
  return j["text"].get<std::string>();
}

ScoreResponse Gateway::score_completion(const ScoreRequest& req) {
  if (req.completion.empty()) throw Error(ErrorCode::InvalidParams, "score completion must be non-empty");
  const auto body = call(kScorePath, score_body(options_.model, req));
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Protocol, std::string("score response is not JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("token_logprobs") || !j["token_logprobs"].is_array())
    throw Error(ErrorCode::Protocol, "score response lacks a \"token_logprobs\" array");
  ScoreResponse out;
  for (const auto& v : j["token_logprobs"]) {
    if (!v.is_number()) throw Error(ErrorCode::Protocol, "non-numeric token logprob");
    const double lp = v.get<double>();
    if (!(lp <= 0.0)) throw Error(ErrorCode::Protocol, "token logprob is positive or NaN");
    out.token_logprobs.push_back(lp);
  }
  if (out.token_logprobs.empty()) throw Error(ErrorCode::EmptySpan, "completion tokenized to zero tokens");
  return out;
}

GatewayStats Gateway::stats() const {
  return {requests_.load(), cache_hits_.load(), transport_calls_.load(), retries_.load()};
}

}  // namespace evontree
