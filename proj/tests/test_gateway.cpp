#include <doctest.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "evontree/error.hpp"
#include "evontree/gateway.hpp"
#include "evontree/synthetic.hpp"
#include "evontree/triple_io.hpp"
#include "support.hpp"

using namespace evontree;
namespace fs = std::filesystem;

namespace {

// Scripted transport: fails the first `transport_failures` calls, then echoes.
class FakeTransport final : public Transport {
 public:
  int transport_failures = 0;
  bool protocol_failure = false;
  std::string reply = R"({"text":"ok"})";
  std::atomic<int> calls{0};
  std::atomic<int> active{0};
  std::atomic<int> peak{0};
  std::chrono::milliseconds hold{0};
  std::mutex m;
  std::vector<std::string> bodies;

  std::string identity() const override { return "fake://1"; }
  std::string post(const std::string&, const std::string& body) override {
    const int now = ++active;
    int prev = peak.load();
    while (now > prev && !peak.compare_exchange_weak(prev, now)) {
    }
    if (hold.count() > 0) std::this_thread::sleep_for(hold);
    --active;
    {
      std::lock_guard<std::mutex> lock(m);
      bodies.push_back(body);
    }
    const int n = ++calls;
    if (protocol_failure) throw Error(ErrorCode::Protocol, "bad request");
    if (n <= transport_failures) throw Error(ErrorCode::Transport, "connection refused");
    return reply;
  }
};

GatewayOptions fast(const fs::path& cache = {}) {
  GatewayOptions o;
  o.cache_dir = cache;
  o.backoff = std::chrono::milliseconds(1);
  return o;
}

}  // namespace

TEST_CASE("wire bodies are bit-exact") {
  GenerateRequest g{"Q?", 16, 0.5, {"\n"}};
  CHECK(generate_body("m", g) == R"({"model":"m","prompt":"Q?","max_tokens":16,"temperature":0.5,"stop":["\n"]})");
  CHECK(score_body("m", {"P Answer:", " True"}) == R"({"model":"m","prompt":"P Answer:","completion":" True"})");
}

TEST_CASE("the gateway sends exactly the bytes built by the caller") {
  auto t = std::make_shared<FakeTransport>();
  Gateway gw(t, fast());
  GenerateRequest g{"Line one\n  \"quoted\" \t tail ", 8, 0.0, {}};
  CHECK(gw.generate(g) == "ok");
  REQUIRE(t->bodies.size() == 1);
  CHECK(t->bodies[0] == generate_body("default", g));
}

TEST_CASE("cached requests return identical bytes without transport calls") {
  const auto dir = test::scratch_dir("gw-cache");
  auto t = std::make_shared<FakeTransport>();
  Gateway gw(t, fast(dir));
  const auto first = gw.call(kGeneratePath, generate_body("m", {"hello", 4, 0.7, {}}));
  const auto second = gw.call(kGeneratePath, generate_body("m", {"hello", 4, 0.7, {}}));
  CHECK(first == second);
  CHECK(t->calls == 1);
  CHECK(gw.stats().cache_hits == 1);

  const auto key = gw.cache_key(kGeneratePath, generate_body("m", {"hello", 4, 0.7, {}}));
  CHECK(key.size() == 64);
  const auto file = dir / key.substr(0, 2) / (key + ".json");
  CHECK(gw.cache_path(key) == file);
  REQUIRE(fs::exists(file));
  auto j = nlohmann::json::parse(read_file(file));
  CHECK(j["response"] == first);
  CHECK(j["endpoint"] == "fake://1");

  // A new gateway over the same directory and identity hits the same file.
  auto t2 = std::make_shared<FakeTransport>();
  t2->reply = R"({"text":"different"})";
  Gateway again(t2, fast(dir));
  CHECK(again.call(kGeneratePath, generate_body("m", {"hello", 4, 0.7, {}})) == first);
  CHECK(t2->calls == 0);
}

TEST_CASE("cache keys separate endpoint, path and body but ignore key order") {
  auto t = std::make_shared<FakeTransport>();
  Gateway gw(t, fast());
  const auto a = gw.cache_key(kScorePath, R"({"model":"m","prompt":"p","completion":" True"})");
  const auto b = gw.cache_key(kScorePath, R"({"completion":" True","prompt":"p","model":"m"})");
  CHECK(a == b);
  CHECK(a != gw.cache_key(kScorePath, R"({"model":"m","prompt":"p","completion":" False"})"));
  CHECK(a != gw.cache_key(kGeneratePath, R"({"model":"m","prompt":"p","completion":" True"})"));
}

TEST_CASE("no-cache bypasses reads but still writes") {
  const auto dir = test::scratch_dir("gw-nocache");
  auto t = std::make_shared<FakeTransport>();
  auto opts = fast(dir);
  opts.read_cache = false;
  Gateway gw(t, opts);
  gw.generate({"x", 4, 0.7, {}});
  gw.generate({"x", 4, 0.7, {}});
  CHECK(t->calls == 2);
  CHECK(fs::exists(gw.cache_path(gw.cache_key(kGeneratePath, generate_body("default", {"x", 4, 0.7, {}})))));
  gw.generate({"x", 4, 0.7, {}}, CacheRead::Bypass);
  CHECK(t->calls == 3);
}

TEST_CASE("transport errors are retried and then reported with the attempt count") {
  auto t = std::make_shared<FakeTransport>();
  t->transport_failures = 2;
  Gateway gw(t, fast());
  CHECK(gw.generate({"x", 4, 0.7, {}}) == "ok");
  CHECK(t->calls == 3);
  CHECK(gw.stats().retries == 2);

  auto dead = std::make_shared<FakeTransport>();
  dead->transport_failures = 100;
  Gateway gw2(dead, fast());
  try {
    gw2.generate({"x", 4, 0.7, {}});
    FAIL("expected a transport error");
  } catch (const TransportError& e) {
    CHECK(e.attempts() == 3);
    CHECK(e.code() == ErrorCode::Transport);
  }
  CHECK(dead->calls == 3);
}

TEST_CASE("protocol errors surface immediately") {
  auto t = std::make_shared<FakeTransport>();
  t->protocol_failure = true;
  Gateway gw(t, fast());
  try {
    gw.generate({"x", 4, 0.7, {}});
    FAIL("expected a protocol error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Protocol);
  }
  CHECK(t->calls == 1);

  auto bad = std::make_shared<FakeTransport>();
  bad->reply = R"({"token_logprobs":[-0.1, 0.2]})";
  Gateway g2(bad, fast());
  CHECK_THROWS_AS(g2.score_completion({"p", " True"}), Error);
  bad->reply = R"({"token_logprobs":[]})";
  try {
    Gateway g3(bad, fast());
    g3.score_completion({"p", " True"});
    FAIL("expected EmptySpan");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptySpan);
  }
  bad->reply = "not json";
  Gateway g4(bad, fast());
  CHECK_THROWS_AS(g4.generate({"x", 4, 0.7, {}}), Error);
}

TEST_CASE("request invariants are enforced before any call") {
  auto t = std::make_shared<FakeTransport>();
  Gateway gw(t, fast());
  CHECK_THROWS_AS(gw.generate({"", 4, 0.7, {}}), Error);
  CHECK_THROWS_AS(gw.generate({"x", 0, 0.7, {}}), Error);
  CHECK_THROWS_AS(gw.generate({"x", 4, -1.0, {}}), Error);
  CHECK_THROWS_AS(gw.score_completion({"p", ""}), Error);
  CHECK(t->calls == 0);
}

TEST_CASE("concurrent calls stay within max_in_flight") {
  auto t = std::make_shared<FakeTransport>();
  t->hold = std::chrono::milliseconds(5);
  auto opts = fast();
  opts.max_in_flight = 3;
  Gateway gw(t, opts);
  std::vector<std::thread> threads;
  for (int i = 0; i < 12; ++i)
    threads.emplace_back([&, i] { gw.generate({"p" + std::to_string(i), 4, 0.7, {}}); });
  for (auto& th : threads) th.join();
  CHECK(t->calls == 12);
  CHECK(t->peak <= 3);
  CHECK(t->peak >= 1);
}

TEST_CASE("concurrent writers of one key leave a readable cache file") {
  const auto dir = test::scratch_dir("gw-race");
  auto t = std::make_shared<FakeTransport>();
  auto opts = fast(dir);
  opts.read_cache = false;
  Gateway gw(t, opts);
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) threads.emplace_back([&] { gw.generate({"same", 4, 0.7, {}}); });
  for (auto& th : threads) th.join();
  const auto key = gw.cache_key(kGeneratePath, generate_body("default", {"same", 4, 0.7, {}}));
  CHECK(nlohmann::json::parse(read_file(gw.cache_path(key)))["response"] == R"({"text":"ok"})");
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir)) files += e.is_regular_file() ? 1 : 0;
  CHECK(files == 1);
}

TEST_CASE("HTTP transport speaks the wire contract to a live server") {
  auto truth = std::make_shared<GroundTruth>(sample_ground_truth(2, 2, 0.5, 7, 1));
  auto model = std::make_shared<SyntheticModel>(truth, NoiseProfile{}, GenerationProfile{}, 7);
  httplib::Server server;
  std::atomic<int> hits{0};
  for (const char* path : {kGeneratePath, kScorePath}) {
    server.Post(path, [&, path = std::string(path)](const httplib::Request& req, httplib::Response& res) {
      ++hits;
      try {
        res.set_content(model->post(path, req.body), "application/json");
      } catch (const Error& e) {
        res.status = 400;
        res.set_content(e.what(), "text/plain");
      }
    });
  }
  server.Post("/down/v1/generate", [](const httplib::Request&, httplib::Response& res) { res.status = 503; });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  const std::string endpoint = "http://127.0.0.1:" + std::to_string(port);
  auto http = std::make_shared<HttpTransport>(endpoint, std::chrono::seconds(5));
  Gateway gw(http, fast());
  const auto root = ConceptLabel::normalize(truth->roots().front());
  const std::string prompt = "Please determine if the statement is true or false, then answer with True or False: '" +
                             truth->children_of(root.key()).front() + "' is a subclass of '" + root.text() +
                             "'. Answer:";
  const auto direct = model->post(kScorePath, score_body("default", {prompt, " True"}));
  const auto over_http = gw.call(kScorePath, score_body("default", {prompt, " True"}));
  CHECK(direct == over_http);
  CHECK(gw.generate({prompt, 8, 0.0, {}}) == nlohmann::json::parse(model->post(kGeneratePath, generate_body("default", {prompt, 8, 0.0, {}})))["text"]);

  // 4xx is a protocol error, 5xx a transport error.
  try {
    gw.generate({"gibberish", 8, 0.0, {}});
    FAIL("expected protocol error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Protocol);
  }
  auto down = std::make_shared<HttpTransport>(endpoint + "/down", std::chrono::seconds(5));
  CHECK_THROWS_AS(down->post(kGeneratePath, "{}"), Error);
  try {
    down->post(kGeneratePath, "{}");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Transport);
  }
  server.stop();
  th.join();

  // Nothing is listening any more.
  Gateway gone(http, fast());
  try {
    gone.generate({"x", 4, 0.7, {}});
    FAIL("expected transport error");
  } catch (const TransportError& e) {
    CHECK(e.attempts() == 3);
  }
}
