#include "evontree/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include "evontree/error.hpp"
#include "evontree/hashing.hpp"
#include "evontree/triple_io.hpp"

namespace evontree {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

[[noreturn]] void invalid(const std::string& msg) { throw Error(ErrorCode::ConfigInvalid, msg); }

// Reads one config object; keys never asked for are reported by finish().
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) invalid(path_ + " must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      invalid(path_ + "." + key + " has the wrong type");
    }
  }

  bool has(const char* key) const { return j_.contains(key); }

  std::optional<Section> sub(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return std::nullopt;
    return Section(*it, path_ + "." + key);
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) invalid("unknown key " + path_ + "." + k);
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  std::filesystem::path path(p);
  return (path.is_absolute() || base.empty() ? path : base / path).lexically_normal();
}

EndpointConfig read_endpoint(Section& s, EndpointConfig e) {
  s.get("kind", e.kind);
  s.get("endpoint", e.endpoint);
  s.get("name", e.name);
  if (e.kind != "synthetic" && e.kind != "http") invalid("model kind must be synthetic or http, got '" + e.kind + "'");
  return e;
}

template <typename F>
void rethrow_invalid(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigInvalid) throw;
    invalid(e.what());
  }
}

}  // namespace

Config Config::from_json(const json& j, const std::filesystem::path& base_dir) {
  Config cfg;
  Section top(j, "config");

  auto model = top.sub("model");
  if (!model) invalid("config.model is required");
  {
    auto& m = *model;
    if (!m.has("kind")) invalid("config.model.kind is required");
    cfg.model.primary = read_endpoint(m, cfg.model.primary);
    m.get("timeout_s", cfg.model.timeout_s);
    m.get("max_in_flight", cfg.model.max_in_flight);
    m.get("max_attempts", cfg.model.max_attempts);
    m.get("backoff_ms", cfg.model.backoff_ms);
    std::string cache_dir;
    m.get("cache_dir", cache_dir);
    cfg.model.cache_dir = resolve(base_dir, cache_dir);
    if (auto syn = m.sub("synthetic")) {
      auto& sc = cfg.model.synthetic;
      syn->get("seed", sc.seed);
      syn->get("depth", sc.depth);
      syn->get("branching", sc.branching);
      syn->get("roots", sc.roots);
      syn->get("synonym_rate", sc.synonym_rate);
      std::string gt;
      syn->get("ground_truth", gt);
      sc.ground_truth = resolve(base_dir, gt);
      if (auto n = syn->sub("noise")) {
        n->get("p_true_known", sc.noise.p_true_known);
        n->get("p_true_unfamiliar", sc.noise.p_true_unfamiliar);
        n->get("p_true_false", sc.noise.p_true_false);
        n->get("familiarity_rate", sc.noise.familiarity_rate);
        n->get("jitter", sc.noise.jitter);
        n->finish();
      }
      if (auto g = syn->sub("generation")) {
        g->get("hallucination_rate", sc.generation.hallucination_rate);
        g->get("alias_sibling_rate", sc.generation.alias_sibling_rate);
        g->get("misbelief_rate", sc.generation.misbelief_rate);
        g->get("fence_rate", sc.generation.fence_rate);
        g->finish();
      }
      syn->finish();
      rethrow_invalid([&] {
        sc.noise.validate();
        sc.generation.validate();
      });
      if (sc.depth < 1 || sc.branching < 1 || sc.roots < 1) invalid("model.synthetic depth/branching/roots must be >= 1");
      if (!(sc.synonym_rate >= 0.0 && sc.synonym_rate <= 1.0)) invalid("model.synthetic.synonym_rate must lie in [0, 1]");
    }
    if (auto judge = m.sub("judge")) {
      cfg.model.judge = read_endpoint(*judge, EndpointConfig{});
      judge->finish();
    }
    m.finish();
    if (cfg.model.max_in_flight < 1) invalid("model.max_in_flight must be >= 1");
    if (cfg.model.max_attempts < 1) invalid("model.max_attempts must be >= 1");
    if (cfg.model.backoff_ms < 0) invalid("model.backoff_ms must be >= 0");
    if (cfg.model.timeout_s < 1) invalid("model.timeout_s must be >= 1");
  }

  if (auto ex = top.sub("extraction")) {
    std::vector<std::string> roots;
    if (ex->has("roots")) {
      ex->get("roots", roots);
      cfg.extraction.roots.clear();
      rethrow_invalid([&] {
        for (const auto& r : roots) cfg.extraction.roots.push_back(ConceptLabel::normalize(r));
      });
      cfg.roots_given = true;
    }
    ex->get("max_depth", cfg.extraction.max_depth);
    ex->get("parse_retries", cfg.extraction.parse_retries);
    ex->get("frontier_budget", cfg.extraction.frontier_budget);
    ex->get("temperature", cfg.extraction.temperature);
    ex->get("max_tokens", cfg.extraction.max_tokens);
    ex->finish();
  }
  cfg.extraction.validate();

  if (auto sc = top.sub("scoring")) {
    sc->get("threads", cfg.threads);
    sc->finish();
  }

  if (auto cal = top.sub("calibration")) {
    cal->get("lo", cfg.calibration.lo);
    cal->get("hi", cfg.calibration.hi);
    std::string tie = "largest";
    cal->get("tie_break", tie);
    if (tie == "largest") cfg.calibration.tie_break = TieBreak::Largest;
    else if (tie == "smallest") cfg.calibration.tie_break = TieBreak::Smallest;
    else invalid("calibration.tie_break must be largest or smallest");
    cal->finish();
    if (!(cfg.calibration.lo < cfg.calibration.hi)) invalid("calibration.lo must be below calibration.hi");
  }

  if (auto rules = top.sub("rules")) {
    rules->get("hops", cfg.hops);
    rules->finish();
    if (cfg.hops != 1) invalid("rules.hops: only 1 is supported");
  }

  if (auto gap = top.sub("gap")) {
    std::string mode = "all_below";
    gap->get("mode", mode);
    cfg.gap_mode = gap_mode_from_string(mode);
    gap->get("sweep_offsets", cfg.sweep_offsets);
    gap->finish();
  }

  if (auto syn = top.sub("synthesis")) {
    std::string mode = "mix";
    syn->get("mode", mode);
    cfg.synthesis.mode = corpus_mode_from_string(mode);
    syn->get("strip_hint", cfg.synthesis.strip_hint);
    syn->get("temperature", cfg.synthesis.temperature);
    syn->get("max_tokens", cfg.synthesis.max_tokens);
    syn->get("empty_retries", cfg.synthesis.empty_retries);
    syn->finish();
  }
  cfg.synthesis.validate();

  std::string dir = cfg.stage_dir.string();
  if (auto out = top.sub("output")) {
    out->get("stage_dir", dir);
    out->finish();
  }
  if (dir.empty()) invalid("output.stage_dir must be non-empty");
  cfg.stage_dir = resolve(base_dir, dir);
  top.finish();
  return cfg;
}

Config Config::load(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    invalid(e.what());
  }
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    invalid(path.string() + ": " + e.what());
  }
  return from_json(j, path.parent_path());
}

namespace {

ordered_json endpoint_json(const EndpointConfig& e) {
  ordered_json j;
  j["kind"] = e.kind;
  j["endpoint"] = e.endpoint;
  j["name"] = e.name;
  return j;
}

}  // namespace

ordered_json Config::to_json() const {
  ordered_json j;
  auto& m = j["model"];
  m = endpoint_json(model.primary);
  m["timeout_s"] = model.timeout_s;
  m["max_in_flight"] = model.max_in_flight;
  m["max_attempts"] = model.max_attempts;
  m["backoff_ms"] = model.backoff_ms;
  m["cache_dir"] = model.cache_dir.string();
  if (model.primary.kind == "synthetic") {
    const auto& sc = model.synthetic;
    auto& s = m["synthetic"];
    s["seed"] = sc.seed;
    s["depth"] = sc.depth;
    s["branching"] = sc.branching;
    s["roots"] = sc.roots;
    s["synonym_rate"] = sc.synonym_rate;
    s["ground_truth"] = sc.ground_truth.string();
    s["noise"] = {{"p_true_known", sc.noise.p_true_known},
                  {"p_true_unfamiliar", sc.noise.p_true_unfamiliar},
                  {"p_true_false", sc.noise.p_true_false},
                  {"familiarity_rate", sc.noise.familiarity_rate},
                  {"jitter", sc.noise.jitter}};
    s["generation"] = {{"hallucination_rate", sc.generation.hallucination_rate},
                       {"alias_sibling_rate", sc.generation.alias_sibling_rate},
                       {"misbelief_rate", sc.generation.misbelief_rate},
                       {"fence_rate", sc.generation.fence_rate}};
  }
  if (model.judge) m["judge"] = endpoint_json(*model.judge);

  auto& ex = j["extraction"];
  std::vector<std::string> roots;
  for (const auto& r : extraction.roots) roots.push_back(r.text());
  ex["roots"] = roots;
  ex["max_depth"] = extraction.max_depth;
  ex["parse_retries"] = extraction.parse_retries;
  ex["frontier_budget"] = extraction.frontier_budget;
  ex["temperature"] = extraction.temperature;
  ex["max_tokens"] = extraction.max_tokens;

  j["scoring"]["threads"] = threads;
  j["calibration"]["lo"] = calibration.lo;
  j["calibration"]["hi"] = calibration.hi;
  j["calibration"]["tie_break"] = calibration.tie_break == TieBreak::Largest ? "largest" : "smallest";
  j["rules"]["hops"] = hops;
  j["gap"]["mode"] = to_string(gap_mode);
  j["gap"]["sweep_offsets"] = sweep_offsets;
  auto& syn = j["synthesis"];
  syn["mode"] = to_string(synthesis.mode);
  syn["strip_hint"] = synthesis.strip_hint;
  syn["temperature"] = synthesis.temperature;
  syn["max_tokens"] = synthesis.max_tokens;
  syn["empty_retries"] = synthesis.empty_retries;
  j["output"]["stage_dir"] = stage_dir.string();
  return j;
}

std::string Config::hash() const {
  auto j = to_json();
  j.erase("output");
  j["model"].erase("cache_dir");
  return sha256_hex(j.dump());
}

void apply_overrides(Config& cfg, const Overrides& o) {
  if (o.stage_dir) cfg.stage_dir = *o.stage_dir;
  if (o.seed) cfg.model.synthetic.seed = *o.seed;
  if (const char* env = std::getenv("EVONTREE_ENDPOINT"); env && *env) cfg.model.primary.endpoint = env;
  if (cfg.model.primary.kind == "http" && cfg.model.primary.endpoint.empty())
    invalid("model.endpoint is required for kind http (or set EVONTREE_ENDPOINT)");
  if (cfg.model.judge && cfg.model.judge->kind == "http" && cfg.model.judge->endpoint.empty())
    invalid("model.judge.endpoint is required for kind http");
}

Models make_models(const Config& cfg, bool no_cache) {
  Models out;
  const auto& sc = cfg.model.synthetic;
  const bool needs_truth =
      cfg.model.primary.kind == "synthetic" || (cfg.model.judge && cfg.model.judge->kind == "synthetic");
  if (needs_truth) {
    if (!sc.ground_truth.empty()) {
      std::string text;
      try {
        text = read_file(sc.ground_truth);
      } catch (const Error& e) {
        invalid(e.what());
      }
      try {
        out.truth = std::make_shared<GroundTruth>(GroundTruth::from_json(json::parse(text)));
      } catch (const json::exception& e) {
        invalid("model.synthetic.ground_truth: " + std::string(e.what()));
      }
    } else {
      out.truth = std::make_shared<GroundTruth>(
          sample_ground_truth(sc.depth, sc.branching, sc.synonym_rate, sc.seed, sc.roots));
    }
  }

  GatewayOptions opts;
  opts.cache_dir = cfg.model.cache_dir.empty() ? cfg.stage_dir / "cache" : cfg.model.cache_dir;
  opts.read_cache = !no_cache;
  opts.max_attempts = cfg.model.max_attempts;
  opts.backoff = std::chrono::milliseconds(cfg.model.backoff_ms);
  opts.max_in_flight = cfg.model.max_in_flight;

  auto transport = [&](const EndpointConfig& e, SyntheticRole role) -> std::shared_ptr<Transport> {
    if (e.kind == "synthetic") return std::make_shared<SyntheticModel>(out.truth, sc.noise, sc.generation, sc.seed, role);
    return std::make_shared<HttpTransport>(e.endpoint, std::chrono::seconds(cfg.model.timeout_s));
  };

  opts.model = cfg.model.primary.name;
  out.model = std::make_shared<Gateway>(transport(cfg.model.primary, SyntheticRole::Model), opts);
  if (cfg.model.judge) {
    opts.model = cfg.model.judge->name;
    out.judge = std::make_shared<Gateway>(transport(*cfg.model.judge, SyntheticRole::Judge), opts);
  }
  return out;
}

}  // namespace evontree
