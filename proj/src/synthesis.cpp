#include "evontree/synthesis.hpp"

#include <algorithm>
#include <cctype>
#include <optional>
#include <set>
#include <tuple>

#include <json.hpp>

#include "evontree/error.hpp"
#include "evontree/prompts.hpp"

namespace evontree {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string_view to_string(Strategy s) { return s == Strategy::Explicit ? "explicit" : "implicit"; }

std::string_view to_string(CorpusMode m) {
  switch (m) {
    case CorpusMode::Explicit: return "explicit";
    case CorpusMode::Implicit: return "implicit";
    case CorpusMode::Mix: return "mix";
  }
  return "mix";
}

CorpusMode corpus_mode_from_string(const std::string& s) {
  if (s == "explicit") return CorpusMode::Explicit;
  if (s == "implicit") return CorpusMode::Implicit;
  if (s == "mix") return CorpusMode::Mix;
  throw Error(ErrorCode::ConfigInvalid, "synthesis.mode must be explicit, implicit or mix");
}

void SynthesisConfig::validate() const {
  if (max_tokens < 1) throw Error(ErrorCode::ConfigInvalid, "synthesis.max_tokens must be >= 1");
  if (empty_retries < 0) throw Error(ErrorCode::ConfigInvalid, "synthesis.empty_retries must be >= 0");
  if (!(temperature >= 0.0)) throw Error(ErrorCode::ConfigInvalid, "synthesis.temperature must be >= 0");
}

namespace {

struct ChainNames {
  std::string d, c, a;
};

ChainNames names(const DerivationChain& chain) {
  if (!chain.valid()) throw Error(ErrorCode::InvalidParams, "derivation chain does not compose");
  return {chain.premises[0].subject.text(), chain.premises[0].object.text(), chain.premises[1].object.text()};
}

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

std::string hint_sentence(const DerivationChain& chain) {
  const auto n = names(chain);
  return fill(kHint, {{"D", n.d}, {"C", n.c}, {"A", n.a}});
}

std::vector<ImplicitInstruction> implicit_instructions(const DerivationChain& chain) {
  const auto n = names(chain);
  const auto hint = hint_sentence(chain);
  std::vector<ImplicitInstruction> out;
  for (const auto* who : {&n.a, &n.c, &n.d}) {
    auto bare = fill(kImplicitFunctions, {{"concept", *who}});
    out.push_back({bare + hint, bare, 1});
  }
  for (const auto* who : {&n.a, &n.c}) {
    auto bare = fill(kImplicitSubtypes, {{"concept", *who}});
    out.push_back({bare + hint, bare, 2});
  }
  return out;
}

TrainingExample explicit_pair(const DerivationChain& chain) {
  const auto n = names(chain);
  const std::map<std::string, std::string, std::less<>> vals{{"D", n.d}, {"C", n.c}, {"A", n.a}};
  return {fill(kExplicitQuestion, vals), fill(kExplicitAnswer, vals), Strategy::Explicit, chain, 0, false};
}

std::optional<std::string> distill(const std::string& prompt, const SynthesisConfig& cfg, Gateway& gateway,
                                   SynthesisTally& tally) {
  GenerateRequest req;
  req.prompt = prompt;
  req.max_tokens = cfg.max_tokens;
  req.temperature = cfg.temperature;
  for (int attempt = 0; attempt <= cfg.empty_retries; ++attempt) {
    std::string reply;
    try {
      reply = gateway.generate(req, attempt == 0 ? CacheRead::Allow : CacheRead::Bypass);
    } catch (const Error&) {
      ++tally.dropped_gateway;
      return std::nullopt;
    }
    if (!blank(reply)) return reply;
  }
  ++tally.dropped_empty;
  return std::nullopt;
}

Corpus build_corpus(const std::vector<DerivationChain>& chains, const SynthesisConfig& cfg, Gateway& gateway,
                    int threads) {
  cfg.validate();
  if (threads <= 0) threads = gateway.options().max_in_flight;
  Corpus corpus;

  if (cfg.mode != CorpusMode::Implicit) {
    for (const auto& c : chains) corpus.examples.push_back(explicit_pair(c));
    corpus.tally.explicit_pairs = chains.size();
  }

  if (cfg.mode != CorpusMode::Explicit) {
    struct Job {
      const DerivationChain* chain;
      ImplicitInstruction ins;
    };
    std::vector<Job> jobs;
    for (const auto& c : chains)
      for (auto& ins : implicit_instructions(c)) jobs.push_back({&c, std::move(ins)});

    std::vector<std::optional<std::string>> replies(jobs.size());
    std::vector<SynthesisTally> tallies(jobs.size());
    const auto n = static_cast<std::ptrdiff_t>(jobs.size());
#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (std::ptrdiff_t i = 0; i < n; ++i) replies[i] = distill(jobs[i].ins.instruction, cfg, gateway, tallies[i]);

    corpus.tally.attempted = jobs.size();
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      corpus.tally.dropped_empty += tallies[i].dropped_empty;
      corpus.tally.dropped_gateway += tallies[i].dropped_gateway;
      if (!replies[i]) continue;
      const auto& ins = jobs[i].ins;
      corpus.examples.push_back({cfg.strip_hint ? ins.bare : ins.instruction, std::move(*replies[i]),
                                 Strategy::Implicit, *jobs[i].chain, ins.template_id, !cfg.strip_hint});
    }
  }

  std::sort(corpus.examples.begin(), corpus.examples.end(), [](const auto& x, const auto& y) {
    return std::tie(x.strategy, x.chain.conclusion, x.template_id, x.chain, x.instruction) <
           std::tie(y.strategy, y.chain.conclusion, y.template_id, y.chain, y.instruction);
  });
  return corpus;
}

namespace {

ordered_json pair_json(const Triple& t) { return ordered_json::array({t.subject.text(), t.object.text()}); }

}  // namespace

std::string format_corpus_line(const TrainingExample& ex) {
  ordered_json j;
  j["instruction"] = ex.instruction;
  j["output"] = ex.output;
  j["strategy"] = to_string(ex.strategy);
  ordered_json gap;
  gap["s"] = ex.chain.conclusion.subject.text();
  gap["o"] = ex.chain.conclusion.object.text();
  j["gap"] = std::move(gap);
  j["chain"] = ordered_json::array({pair_json(ex.chain.premises[0]), pair_json(ex.chain.premises[1])});
  j["template_id"] = ex.template_id;
  j["hint_included"] = ex.hint_included;
  return j.dump();
}

std::string format_corpus(const std::vector<TrainingExample>& examples) {
  std::string out;
  for (const auto& ex : examples) {
    out += format_corpus_line(ex);
    out += '\n';
  }
  return out;
}

namespace {

[[noreturn]] void mismatch(const std::string& what) { throw Error(ErrorCode::SchemaMismatch, "corpus line: " + what); }

const json& field(const json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) mismatch(std::string("missing \"") + name + "\"");
  return *it;
}

std::string str_field(const json& j, const char* name) {
  const auto& v = field(j, name);
  if (!v.is_string()) mismatch(std::string("\"") + name + "\" must be a string");
  return v.get<std::string>();
}

Triple subclass(const json& pair, const char* what) {
  if (!pair.is_array() || pair.size() != 2 || !pair[0].is_string() || !pair[1].is_string())
    mismatch(std::string(what) + " must be a [s, o] string pair");
  try {
    auto t = Triple::make(pair[0].get<std::string>(), Relation::SubclassOf, pair[1].get<std::string>());
    if (!t) mismatch(std::string(what) + " is a self-loop");
    return *t;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::SchemaMismatch) throw;
    mismatch(std::string(what) + ": " + e.what());
  }
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

}  // namespace

TrainingExample parse_corpus_line(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseFailure, e.what());
  }
  if (!j.is_object()) mismatch("not an object");
  static const std::set<std::string> kKeys{"instruction", "output",      "strategy",     "gap",
                                           "chain",       "template_id", "hint_included"};
  for (const auto& [k, v] : j.items())
    if (!kKeys.count(k)) mismatch("unexpected key \"" + k + "\"");

  TrainingExample ex;
  ex.instruction = str_field(j, "instruction");
  ex.output = str_field(j, "output");
  if (blank(ex.instruction) || blank(ex.output)) mismatch("instruction and output must be non-empty");
  const auto strategy = str_field(j, "strategy");
  if (strategy == "explicit") ex.strategy = Strategy::Explicit;
  else if (strategy == "implicit") ex.strategy = Strategy::Implicit;
  else mismatch("strategy must be \"explicit\" or \"implicit\"");

  const auto& gap = field(j, "gap");
  if (!gap.is_object() || gap.size() != 2) mismatch("gap must be {\"s\", \"o\"}");
  const auto conclusion = subclass(json::array({str_field(gap, "s"), str_field(gap, "o")}), "gap");

  const auto& chain = field(j, "chain");
  if (!chain.is_array() || chain.size() != 2) mismatch("chain must hold two premises");
  ex.chain = {conclusion, {subclass(chain[0], "chain[0]"), subclass(chain[1], "chain[1]")}};
  if (!ex.chain.valid()) mismatch("chain premises do not derive the gap triple");

  const auto& tid = field(j, "template_id");
  if (!tid.is_number_integer()) mismatch("template_id must be an integer");
  ex.template_id = tid.get<int>();
  const auto& hint = field(j, "hint_included");
  if (!hint.is_boolean()) mismatch("hint_included must be a boolean");
  ex.hint_included = hint.get<bool>();

  if (ex.strategy == Strategy::Explicit && (ex.template_id != 0 || ex.hint_included))
    mismatch("explicit examples use template_id 0 and no hint");
  if (ex.strategy == Strategy::Implicit && ex.template_id != 1 && ex.template_id != 2)
    mismatch("implicit examples use template_id 1 or 2");
  if (ex.strategy == Strategy::Implicit && ex.hint_included != ends_with(ex.instruction, hint_sentence(ex.chain)))
    mismatch("hint_included does not match the instruction suffix");
  return ex;
}

void validate_corpus_line(std::string_view line) { (void)parse_corpus_line(line); }

}  // namespace evontree
