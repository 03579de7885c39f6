#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "evontree/error.hpp"
#include "evontree/pipeline.hpp"
#include "evontree/report.hpp"
#include "evontree/triple_io.hpp"
#include "support.hpp"

using namespace evontree;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

json small_config(const fs::path& stage_dir, bool judge = true) {
  json j = json::parse(R"({
    "model": {
      "kind": "synthetic",
      "backoff_ms": 1,
      "synthetic": {
        "seed": 3, "depth": 3, "branching": 3, "roots": 3, "synonym_rate": 0.5,
        "noise": {"familiarity_rate": 0.8, "jitter": 0.05},
        "generation": {"hallucination_rate": 0.1, "misbelief_rate": 0.3}
      }
    },
    "synthesis": {"mode": "mix"}
  })");
  if (judge) j["model"]["judge"] = {{"kind", "synthetic"}};
  j["output"] = {{"stage_dir", stage_dir.string()}};
  return j;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Io;
}

const char* kArtifacts[] = {"raw.jsonl",      "calibration.json",          "scored.jsonl", "confirmed.jsonl",
                            "reliable.jsonl", "extrapolated.jsonl",        "gaps.jsonl",   "extrapolated_scored.jsonl",
                            "corpus.jsonl",   "report.json",               "stats.csv",    "histogram.csv",
                            "roc.csv",        "ground_truth.json"};

}  // namespace

TEST_CASE("config rejects unknown keys and missing sections") {
  const auto dir = test::scratch_dir("cfg");
  auto j = small_config(dir);
  CHECK_NOTHROW(Config::from_json(j, dir));
  auto typo = j;
  typo["gap"] = {{"mdoe", "all_below"}};
  CHECK(code_of([&] { Config::from_json(typo, dir); }) == ErrorCode::ConfigInvalid);
  auto top = j;
  top["scorer"] = json::object();
  CHECK(code_of([&] { Config::from_json(top, dir); }) == ErrorCode::ConfigInvalid);
  auto nested = j;
  nested["model"]["synthetic"]["noise"]["jiter"] = 0.1;
  CHECK(code_of([&] { Config::from_json(nested, dir); }) == ErrorCode::ConfigInvalid);
  auto no_model = j;
  no_model.erase("model");
  CHECK(code_of([&] { Config::from_json(no_model, dir); }) == ErrorCode::ConfigInvalid);
  auto http = j;
  http["model"] = {{"kind", "http"}};
  // The endpoint may still come from EVONTREE_ENDPOINT, so it is checked with the overrides.
  auto http_cfg = Config::from_json(http, dir);
  unsetenv("EVONTREE_ENDPOINT");
  CHECK(code_of([&] { apply_overrides(http_cfg, {}); }) == ErrorCode::ConfigInvalid);
  auto mode = j;
  mode["gap"] = {{"mode", "below"}};
  CHECK(code_of([&] { Config::from_json(mode, dir); }) == ErrorCode::ConfigInvalid);

  // The output location does not change the config identity.
  auto moved = j;
  moved["output"]["stage_dir"] = (dir / "elsewhere").string();
  CHECK(Config::from_json(moved, dir).hash() == Config::from_json(j, dir).hash());
  auto reseeded = j;
  reseeded["model"]["synthetic"]["seed"] = 4;
  CHECK(Config::from_json(reseeded, dir).hash() != Config::from_json(j, dir).hash());
}

TEST_CASE("a stage without its inputs reports MissingUpstream") {
  const auto dir = test::scratch_dir("upstream");
  Pipeline p(Config::from_json(small_config(dir / "run"), dir));
  CHECK(code_of([&] { p.run_stage(Stage::Gap); }) == ErrorCode::MissingUpstream);
  CHECK(code_of([&] { p.run_stage(Stage::Report); }) == ErrorCode::MissingUpstream);
  CHECK_FALSE(fs::exists(p.path("gaps.jsonl")));
}

TEST_CASE("end-to-end run is complete, resumable and reproducible") {
  const auto dir = test::scratch_dir("e2e");
  Pipeline p(Config::from_json(small_config(dir / "a"), dir));
  const auto results = p.run(true);
  CHECK(results.size() == all_stages().size());
  for (const auto* name : kArtifacts) CHECK_MESSAGE(fs::exists(p.path(name)), name);
  CHECK(fs::is_directory(p.path("trees")));

  const auto manifest = json::parse(slurp(p.manifest_path()));
  CHECK(manifest.at("config_hash") == p.config().hash());
  CHECK(manifest.at("log_base") == "e");
  for (auto s : all_stages()) CHECK(manifest.at("stages").contains(std::string(to_string(s))));

  // Resume skips everything.
  for (const auto& r : Pipeline(Config::from_json(small_config(dir / "a"), dir)).run(true)) CHECK(r.skipped);

  // Confirm rerun with a warm cache reproduces its artifact.
  const auto confirmed = slurp(p.path("confirmed.jsonl"));
  p.run_stage(Stage::Confirm);
  CHECK(slurp(p.path("confirmed.jsonl")) == confirmed);

  // A cold run elsewhere reproduces every artifact byte for byte.
  Pipeline q(Config::from_json(small_config(dir / "b"), dir));
  q.run(false);
  for (const auto* name : kArtifacts) {
    if (std::string(name) == "calibration.json") continue;
    CHECK_MESSAGE(slurp(p.path(name)) == slurp(q.path(name)), name);
  }
  CHECK(slurp(p.path("calibration.json")) == slurp(q.path("calibration.json")));
}

TEST_CASE("report counts match artifacts and are conserved") {
  const auto dir = test::scratch_dir("report");
  Pipeline p(Config::from_json(small_config(dir / "run"), dir));
  p.run(false);
  ReportInputs in;
  in.raw = read_triples(p.path("raw.jsonl"));
  in.scored = read_triples(p.path("scored.jsonl"));
  in.confirmed = read_triples(p.path("confirmed.jsonl"));
  in.reliable = read_triples(p.path("reliable.jsonl"));
  in.extrapolated = read_triples(p.path("extrapolated.jsonl"));
  in.extrapolated_scored = read_triples(p.path("extrapolated_scored.jsonl"));
  in.gaps = read_triples(p.path("gaps.jsonl"));
  const auto rep = emit_report(in, p.models().judge.get());
  CHECK(rep.has_accuracy);
  const auto& raw = rep.row(TripleClass::Raw, Relation::SubclassOf);
  const auto& conf = rep.row(TripleClass::Confirmed, Relation::SubclassOf);
  const auto& rel = rep.row(TripleClass::Reliable, Relation::SubclassOf);
  const auto& ext = rep.row(TripleClass::Extrapolated, Relation::SubclassOf);
  const auto& gap = rep.row(TripleClass::Gap, Relation::SubclassOf);
  CHECK(raw.num >= conf.num);
  CHECK(conf.num >= rel.num);
  CHECK(ext.num >= gap.num);
  CHECK(gap.num == in.gaps.size());
  std::size_t raw_sub = 0;
  for (const auto& r : in.raw) raw_sub += r.triple.relation == Relation::SubclassOf;
  CHECK(raw.num == raw_sub);

  const auto csv = slurp(p.path("stats.csv"));
  CHECK(csv.rfind("Triple Type,Relation,Num,ConfirmValue Avg.,Acc.\n", 0) == 0);
  CHECK(csv == rep.stats_csv());
  std::size_t hist_total = 0;
  for (const auto& b : rep.histogram)
    if (b.cls == TripleClass::Raw && b.relation == Relation::SubclassOf) hist_total += b.count;
  CHECK(hist_total == raw.num);

  const auto bare = emit_report(in, nullptr);
  CHECK_FALSE(bare.has_accuracy);
  CHECK(bare.judge_status == "none");
  CHECK(bare.stats_csv().rfind("Triple Type,Relation,Num,ConfirmValue Avg.\n", 0) == 0);
  CHECK(bare.stats_csv().find("Acc.") == std::string::npos);
  CHECK(bare.row(TripleClass::Raw, Relation::SubclassOf).mean_confirm_value == raw.mean_confirm_value);
}

TEST_CASE("an empty gap set yields a zero row with a null mean") {
  ReportInputs in;
  in.raw.push_back({test::sub("A", "B"), TripleClass::Raw});
  const auto rep = emit_report(in, nullptr);
  const auto& gap = rep.row(TripleClass::Gap, Relation::SubclassOf);
  CHECK(gap.num == 0);
  CHECK_FALSE(gap.mean_confirm_value.has_value());
  CHECK(rep.stats_csv().find("Gap,SubclassOf,0,\n") != std::string::npos);
  CHECK(rep.to_json()["rows"].back()["confirm_value_avg"].is_null());
}

TEST_CASE("an unreachable judge degrades to a report without accuracy") {
  class Down final : public Transport {
   public:
    std::string identity() const override { return "down"; }
    std::string post(const std::string&, const std::string&) override { throw Error(ErrorCode::Transport, "refused"); }
  };
  GatewayOptions o;
  o.max_attempts = 1;
  Gateway judge(std::make_shared<Down>(), o);
  ReportInputs in;
  in.raw.push_back({test::sub("A", "B"), TripleClass::Raw});
  const auto rep = emit_report(in, &judge);
  CHECK_FALSE(rep.has_accuracy);
  CHECK(rep.judge_status.rfind("unavailable", 0) == 0);
}

TEST_CASE("sweep is monotone and saturates at the infinities") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<TripleRecord> recs;
  for (int i = 0; i < 300; ++i) {
    TripleRecord r{test::sub("c" + std::to_string(i), "top"), TripleClass::Extrapolated};
    r.scores = std::vector<double>{u(rng), u(rng), u(rng), u(rng)};
    recs.push_back(r);
  }
  Thresholds th;
  for (const auto& t : prompt_set(Relation::SubclassOf)) th[t.id()] = u(rng) / 2;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> offsets{inf, -inf};
  for (int k = -5; k <= 5; ++k) offsets.push_back(k / 10.0);
  for (auto mode : {GapMode::AllBelow, GapMode::MeanBelow, GapMode::AnyBelow}) {
    const auto pts = sweep_gap_threshold(recs, th, mode, offsets);
    REQUIRE(pts.size() == offsets.size());
    CHECK(pts.front().offset == -inf);
    CHECK(pts.front().gap_count == 0);
    CHECK(pts.back().gap_count == recs.size());
    for (std::size_t i = 1; i < pts.size(); ++i) CHECK(pts[i].gap_count >= pts[i - 1].gap_count);
  }
  CHECK(sweep_csv(sweep_gap_threshold(recs, th, GapMode::AllBelow, {0.0})).rfind(
            "offset,gap_count,chain_count,mean_confirm_value\n", 0) == 0);
}
