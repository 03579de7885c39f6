#include "evontree/pipeline.hpp"

#include <chrono>
#include <ctime>
#include <map>
#include <set>

#include "evontree/error.hpp"
#include "evontree/hashing.hpp"
#include "evontree/report.hpp"

#ifndef EVONTREE_VERSION
#define EVONTREE_VERSION "0.0.0"
#endif

namespace evontree {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr std::pair<Stage, std::string_view> kStageNames[] = {
    {Stage::Extract, "extract"},         {Stage::Calibrate, "calibrate"}, {Stage::Confirm, "confirm"},
    {Stage::Reliable, "reliable"},       {Stage::Extrapolate, "extrapolate"}, {Stage::Gap, "gap"},
    {Stage::Synthesize, "synthesize"},   {Stage::Report, "report"},
};

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<TripleRecord> records(const std::set<Triple>& triples, TripleClass cls) {
  std::vector<TripleRecord> out;
  for (const auto& t : triples) out.push_back({t, cls, std::nullopt, {}});
  return out;
}

TripleRecord record_of(const ScoredTriple& st, TripleClass cls) { return {st.triple, cls, st.values(), {}}; }

Thresholds load_thresholds(const fs::path& p) {
  return CalibrationReport::from_json(json::parse(read_file(p))).thresholds();
}

[[noreturn]] void gateway_failure(std::string_view stage, std::size_t n) {
  throw Error(ErrorCode::Transport, std::string(stage) + ": " + std::to_string(n) + " model calls failed");
}

}  // namespace

std::string_view to_string(Stage s) {
  for (const auto& [st, name] : kStageNames)
    if (st == s) return name;
  return "extract";
}

std::optional<Stage> stage_from_string(std::string_view s) {
  for (const auto& [st, name] : kStageNames)
    if (name == s) return st;
  return std::nullopt;
}

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> kAll{Stage::Extract,     Stage::Calibrate, Stage::Confirm,    Stage::Reliable,
                                       Stage::Extrapolate, Stage::Gap,       Stage::Synthesize, Stage::Report};
  return kAll;
}

std::vector<std::string> stage_inputs(Stage s) {
  switch (s) {
    case Stage::Extract: return {};
    case Stage::Calibrate: return {"raw.jsonl"};
    case Stage::Confirm: return {"raw.jsonl", "calibration.json"};
    case Stage::Reliable: return {"confirmed.jsonl"};
    case Stage::Extrapolate: return {"raw.jsonl", "confirmed.jsonl", "reliable.jsonl"};
    case Stage::Gap: return {"extrapolated.jsonl", "calibration.json"};
    case Stage::Synthesize: return {"gaps.jsonl"};
    case Stage::Report:
      return {"raw.jsonl",          "scored.jsonl",   "confirmed.jsonl",  "reliable.jsonl",
              "extrapolated.jsonl", "extrapolated_scored.jsonl", "gaps.jsonl", "calibration.json"};
  }
  return {};
}

std::vector<std::string> stage_outputs(Stage s) {
  switch (s) {
    case Stage::Extract: return {"raw.jsonl"};
    case Stage::Calibrate: return {"calibration.json"};
    case Stage::Confirm: return {"scored.jsonl", "confirmed.jsonl"};
    case Stage::Reliable: return {"reliable.jsonl"};
    case Stage::Extrapolate: return {"extrapolated.jsonl"};
    case Stage::Gap: return {"extrapolated_scored.jsonl", "gaps.jsonl"};
    case Stage::Synthesize: return {"corpus.jsonl"};
    case Stage::Report: return {"report.json", "stats.csv", "histogram.csv", "roc.csv"};
  }
  return {};
}

Pipeline::Pipeline(Config cfg, bool no_cache) : cfg_(std::move(cfg)), no_cache_(no_cache), models_(make_models(cfg_, no_cache)) {
  if (models_.truth && !cfg_.roots_given) {
    cfg_.extraction.roots.clear();
    for (const auto& r : models_.truth->roots()) cfg_.extraction.roots.push_back(ConceptLabel::normalize(r));
  }
}

void Pipeline::require(const std::vector<std::string>& names) const {
  for (const auto& n : names)
    if (!fs::exists(path(n))) throw Error(ErrorCode::MissingUpstream, "missing " + path(n).string());
}

StageResult Pipeline::run_stage(Stage s) {
  require(stage_inputs(s));
  fs::create_directories(cfg_.stage_dir);
  StageResult r;
  switch (s) {
    case Stage::Extract: r = extract(); break;
    case Stage::Calibrate: r = calibrate(); break;
    case Stage::Confirm: r = confirm(); break;
    case Stage::Reliable: r = reliable(); break;
    case Stage::Extrapolate: r = extrapolate(); break;
    case Stage::Gap: r = gap(); break;
    case Stage::Synthesize: r = synthesize(); break;
    case Stage::Report: r = report(); break;
  }
  record(r);
  return r;
}

std::vector<StageResult> Pipeline::run(bool resume) {
  std::vector<StageResult> out;
  bool stale = !resume;
  for (auto s : all_stages()) {
    if (!stale && up_to_date(s)) {
      StageResult r{s, {}, ordered_json::object(), true};
      for (const auto& o : stage_outputs(s)) r.outputs.push_back(path(o));
      out.push_back(std::move(r));
      continue;
    }
    stale = true;  // everything downstream of a rerun stage reruns too
    out.push_back(run_stage(s));
  }
  return out;
}

ordered_json Pipeline::load_manifest() const {
  const auto p = manifest_path();
  if (!fs::exists(p)) return ordered_json::object();
  try {
    auto j = ordered_json::parse(read_file(p));
    return j.is_object() ? j : ordered_json::object();
  } catch (const json::exception&) {
    return ordered_json::object();
  }
}

bool Pipeline::up_to_date(Stage s) const {
  const auto m = load_manifest();
  if (m.value("config_hash", "") != cfg_.hash()) return false;
  if (!m.contains("stages") || !m["stages"].contains(std::string(to_string(s)))) return false;
  const auto& entry = m["stages"][std::string(to_string(s))];
  for (const auto* field : {"inputs", "outputs"}) {
    if (!entry.contains(field)) return false;
    for (const auto& [name, hash] : entry[field].items()) {
      if (!fs::exists(path(name)) || sha256_file(path(name)) != hash.get<std::string>()) return false;
    }
  }
  for (const auto& in : stage_inputs(s))
    if (!entry["inputs"].contains(in)) return false;
  return true;
}

void Pipeline::record(const StageResult& r) {
  auto m = load_manifest();
  if (m.value("config_hash", "") != cfg_.hash()) m = ordered_json::object();
  m["tool_version"] = EVONTREE_VERSION;
  m["config_hash"] = cfg_.hash();
  m["prompt_set_version"] = kPromptSetVersion;
  m["template_set_version"] = kTemplateSetVersion;
  m["log_base"] = "e";
  m["model"] = models_.model->identity();
  m["judge"] = models_.judge ? ordered_json(models_.judge->identity()) : ordered_json(nullptr);
  m["synthesis"] = {{"mode", to_string(cfg_.synthesis.mode)},
                    {"temperature", cfg_.synthesis.temperature},
                    {"max_tokens", cfg_.synthesis.max_tokens},
                    {"strip_hint", cfg_.synthesis.strip_hint}};
  if (fs::exists(path("calibration.json"))) m["thresholds"] = load_thresholds(path("calibration.json"));

  ordered_json entry;
  entry["completed_at"] = utc_now();
  ordered_json inputs = ordered_json::object();
  for (const auto& in : stage_inputs(r.stage)) inputs[in] = sha256_file(path(in));
  entry["inputs"] = std::move(inputs);
  ordered_json outputs = ordered_json::object();
  for (const auto& o : r.outputs) outputs[fs::relative(o, cfg_.stage_dir).generic_string()] = sha256_file(o);
  entry["outputs"] = std::move(outputs);
  entry["tallies"] = r.tallies;
  m["stages"][std::string(to_string(r.stage))] = std::move(entry);
  atomic_write(manifest_path(), m.dump(2) + "\n");
}

StageResult Pipeline::extract() {
  StageResult r{Stage::Extract};
  Gateway& gw = *models_.model;
  fs::create_directories(path("trees"));
  std::set<Triple> raw;
  ExpansionTally tally;
  std::size_t skipped = 0;
  for (const auto& root : cfg_.extraction.roots) {
    auto ex = expand(root, cfg_.extraction, gw, cfg_.threads);
    tally += ex.tally;
    const auto tree_file = path("trees") / (file_key(root) + ".json");
    atomic_write(tree_file, tree_to_json(ex.tree).dump(2) + "\n");
    r.outputs.push_back(tree_file);
    auto tt = tree_to_triples(ex.tree);
    skipped += tt.skipped;
    raw.insert(tt.triples.begin(), tt.triples.end());
  }
  write_triples(path("raw.jsonl"), records(raw, TripleClass::Raw));
  r.outputs.push_back(path("raw.jsonl"));
  if (models_.truth) {
    atomic_write(path("ground_truth.json"), models_.truth->to_json().dump(2) + "\n");
    r.outputs.push_back(path("ground_truth.json"));
  }
  r.tallies = {{"roots", cfg_.extraction.roots.size()},
               {"triples", raw.size()},
               {"expanded", tally.expanded},
               {"unexpandable", tally.unexpandable},
               {"gateway_failures", tally.gateway_failures},
               {"cycle_drops", tally.cycle_drops},
               {"sibling_merges", tally.sibling_merges},
               {"parse_retries", tally.parse_retries},
               {"self_references", skipped}};
  if (tally.gateway_failures > 0) gateway_failure("extract", tally.gateway_failures);
  return r;
}

namespace {

std::vector<Triple> triples_of(const std::vector<TripleRecord>& recs) {
  std::vector<Triple> out;
  for (const auto& r : recs) out.push_back(r.triple);
  return out;
}

}  // namespace

StageResult Pipeline::calibrate() {
  StageResult r{Stage::Calibrate};
  Gateway& gw = *models_.model;
  const auto batch = score_batch(triples_of(read_triples(path("raw.jsonl"))), gw, cfg_.threads);
  const auto samples = collect_samples(batch.scored, gw, cfg_.threads);
  const auto report = evontree::calibrate(samples, cfg_.calibration);
  atomic_write(path("calibration.json"), report.to_json().dump(2) + "\n");
  r.outputs.push_back(path("calibration.json"));
  std::size_t weak = 0;
  for (const auto& [id, res] : report.per_template) weak += res.weak ? 1 : 0;
  r.tallies = {{"scored", batch.scored.size()},
               {"unscored", batch.unscored.size()},
               {"unparseable", samples.unparseable},
               {"label_failures", samples.failed},
               {"fallbacks", report.fallbacks.size()},
               {"weak_templates", weak},
               {"pooled_tau_star", report.pooled.tau_star}};
  if (!batch.unscored.empty() || samples.failed > 0) gateway_failure("calibrate", batch.unscored.size() + samples.failed);
  return r;
}

StageResult Pipeline::confirm() {
  StageResult r{Stage::Confirm};
  const auto thresholds = load_thresholds(path("calibration.json"));
  const auto batch = score_batch(triples_of(read_triples(path("raw.jsonl"))), *models_.model, cfg_.threads);
  std::vector<TripleRecord> scored, confirmed;
  for (const auto& st : batch.scored) {
    scored.push_back(record_of(st, TripleClass::Raw));
    if (is_confirmed(st, thresholds)) confirmed.push_back(record_of(st, TripleClass::Confirmed));
  }
  const auto n_confirmed = confirmed.size();
  write_triples(path("scored.jsonl"), std::move(scored));
  write_triples(path("confirmed.jsonl"), std::move(confirmed));
  r.outputs = {path("scored.jsonl"), path("confirmed.jsonl")};
  r.tallies = {{"scored", batch.scored.size()},
               {"unscored", batch.unscored.size()},
               {"transport_failures", batch.transport_failures},
               {"confirmed", n_confirmed}};
  if (!batch.unscored.empty()) gateway_failure("confirm", batch.unscored.size());
  return r;
}

StageResult Pipeline::reliable() {
  StageResult r{Stage::Reliable};
  const auto confirmed = read_triples(path("confirmed.jsonl"));
  std::map<Triple, std::optional<std::vector<double>>> scores;
  TripleStore store;
  for (const auto& rec : confirmed) {
    store.insert(rec.triple);
    scores.emplace(rec.triple, rec.scores);
  }
  std::vector<TripleRecord> out;
  for (const auto& t : select_reliable(store)) out.push_back({t, TripleClass::Reliable, scores[t], {}});
  const auto n = out.size();
  write_triples(path("reliable.jsonl"), std::move(out));
  r.outputs = {path("reliable.jsonl")};
  r.tallies = {{"reliable", n}};
  return r;
}

StageResult Pipeline::extrapolate() {
  StageResult r{Stage::Extrapolate};
  TripleStore existing;
  std::set<Triple> reliable;
  for (const auto* name : {"raw.jsonl", "confirmed.jsonl"})
    for (const auto& rec : read_triples(path(name))) existing.insert(rec.triple);
  for (const auto& rec : read_triples(path("reliable.jsonl"))) {
    existing.insert(rec.triple);
    reliable.insert(rec.triple);
  }
  const auto chains = evontree::extrapolate(reliable, existing, cfg_.hops);
  std::map<Triple, std::vector<Premises>> grouped;
  for (const auto& c : chains) grouped[c.conclusion].push_back(c.premises);
  std::vector<TripleRecord> out;
  for (auto& [t, prem] : grouped) out.push_back({t, TripleClass::Extrapolated, std::nullopt, std::move(prem)});
  write_triples(path("extrapolated.jsonl"), std::move(out));
  r.outputs = {path("extrapolated.jsonl")};
  r.tallies = {{"conclusions", grouped.size()}, {"chains", chains.size()}};
  return r;
}

StageResult Pipeline::gap() {
  StageResult r{Stage::Gap};
  const auto thresholds = load_thresholds(path("calibration.json"));
  const auto candidates = read_triples(path("extrapolated.jsonl"));
  std::map<Triple, std::vector<Premises>> chains;
  for (const auto& c : candidates) chains[c.triple] = c.chains;
  const auto batch = score_batch(triples_of(candidates), *models_.model, cfg_.threads);

  std::vector<TripleRecord> scored, gaps;
  for (const auto& st : batch.scored) {
    auto rec = record_of(st, TripleClass::Extrapolated);
    rec.chains = chains[st.triple];
    scored.push_back(rec);
  }
  for (const auto& g : select_gaps(batch.scored, thresholds, cfg_.gap_mode)) {
    auto rec = record_of(g, TripleClass::Gap);
    rec.chains = chains[g.triple];
    gaps.push_back(std::move(rec));
  }
  const auto n_gaps = gaps.size();
  write_triples(path("extrapolated_scored.jsonl"), std::move(scored));
  write_triples(path("gaps.jsonl"), std::move(gaps));
  r.outputs = {path("extrapolated_scored.jsonl"), path("gaps.jsonl")};
  r.tallies = {{"candidates", candidates.size()},
               {"scored", batch.scored.size()},
               {"unscored", batch.unscored.size()},
               {"gaps", n_gaps},
               {"mode", to_string(cfg_.gap_mode)}};
  if (!batch.unscored.empty()) gateway_failure("gap", batch.unscored.size());
  return r;
}

StageResult Pipeline::synthesize() {
  StageResult r{Stage::Synthesize};
  std::vector<DerivationChain> chains;
  for (const auto& g : read_triples(path("gaps.jsonl")))
    for (const auto& p : g.chains) chains.push_back({g.triple, p});
  const auto corpus = build_corpus(chains, cfg_.synthesis, *models_.model, cfg_.threads);
  atomic_write(path("corpus.jsonl"), format_corpus(corpus.examples));
  r.outputs = {path("corpus.jsonl")};
  r.tallies = {{"chains", chains.size()},
               {"examples", corpus.examples.size()},
               {"explicit_pairs", corpus.tally.explicit_pairs},
               {"implicit_attempted", corpus.tally.attempted},
               {"dropped_empty", corpus.tally.dropped_empty},
               {"dropped_gateway", corpus.tally.dropped_gateway}};
  return r;
}

StageResult Pipeline::report() {
  StageResult r{Stage::Report};
  ReportInputs in;
  in.raw = read_triples(path("raw.jsonl"));
  in.scored = read_triples(path("scored.jsonl"));
  in.confirmed = read_triples(path("confirmed.jsonl"));
  in.reliable = read_triples(path("reliable.jsonl"));
  in.extrapolated = read_triples(path("extrapolated.jsonl"));
  in.extrapolated_scored = read_triples(path("extrapolated_scored.jsonl"));
  in.gaps = read_triples(path("gaps.jsonl"));
  const auto cal = CalibrationReport::from_json(json::parse(read_file(path("calibration.json"))));

  const auto stats = emit_report(in, models_.judge.get(), cfg_.threads);
  auto j = stats.to_json();
  j["thresholds"] = cal.thresholds();
  j["pooled_tau_star"] = cal.pooled.tau_star;
  atomic_write(path("report.json"), j.dump(2) + "\n");
  atomic_write(path("stats.csv"), stats.stats_csv());
  atomic_write(path("histogram.csv"), stats.histogram_csv());
  atomic_write(path("roc.csv"), cal.roc_csv());
  r.outputs = {path("report.json"), path("stats.csv"), path("histogram.csv"), path("roc.csv")};
  r.tallies = {{"judge", stats.judge_status}};
  return r;
}

fs::path Pipeline::sweep() {
  require({"extrapolated_scored.jsonl", "calibration.json"});
  const auto points = sweep_gap_threshold(read_triples(path("extrapolated_scored.jsonl")),
                                          load_thresholds(path("calibration.json")), cfg_.gap_mode,
                                          cfg_.sweep_offsets);
  atomic_write(path("sweep.csv"), sweep_csv(points));
  return path("sweep.csv");
}

}  // namespace evontree
