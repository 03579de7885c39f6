#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "evontree/calibration.hpp"
#include "evontree/gateway.hpp"
#include "evontree/rules.hpp"
#include "evontree/triple_io.hpp"

namespace evontree {

// Stage artifacts the report reads. Scores for a triple may come from any
// scored artifact; membership comes from the class artifact itself.
struct ReportInputs {
  std::vector<TripleRecord> raw;
  std::vector<TripleRecord> scored;  // raw triples with scores
  std::vector<TripleRecord> confirmed;
  std::vector<TripleRecord> reliable;
  std::vector<TripleRecord> extrapolated;
  std::vector<TripleRecord> extrapolated_scored;
  std::vector<TripleRecord> gaps;
};

struct StatsRow {
  TripleClass cls;
  Relation relation;
  std::size_t num = 0;
  std::optional<double> mean_confirm_value;  // mean of per-triple paraphrase means
  std::optional<double> accuracy;            // judge-marked true / judged
};

struct HistogramBin {
  TripleClass cls;
  Relation relation;
  double lo;
  double hi;
  std::size_t count = 0;
  std::optional<double> accuracy;
};

struct StatsReport {
  std::vector<StatsRow> rows;  // Raw/Confirmed synonym, then Raw..Gap subclass
  std::vector<HistogramBin> histogram;
  bool has_accuracy = false;
  std::string judge_status = "none";  // none | ok | unavailable: <reason>
  std::size_t judge_unparseable = 0;

  const StatsRow& row(TripleClass c, Relation r) const;
  nlohmann::ordered_json to_json() const;
  std::string stats_csv() const;  // Triple Type,Relation,Num,ConfirmValue Avg.[,Acc.]
  std::string histogram_csv() const;
};

// Per-triple judgments through the fixed judging prompts. Throws
// Error(JudgeUnavailable) when the judge cannot be reached.
std::map<Triple, bool> judge_triples(const std::vector<Triple>& triples, Gateway& judge, std::size_t& unparseable,
                                     int threads = 0);

// Width-0.1 bins over [-1, 1]. A null judge (or an unreachable one) yields
// a report without accuracy.
StatsReport emit_report(const ReportInputs& in, Gateway* judge, int threads = 0);

struct SweepPoint {
  double offset;
  std::size_t gap_count;
  std::size_t chain_count;
  std::optional<double> mean_confirm_value;
};

// Recomputes the gap set for each threshold offset; no distillation.
std::vector<SweepPoint> sweep_gap_threshold(const std::vector<TripleRecord>& extrapolated_scored,
                                            const Thresholds& thresholds, GapMode mode,
                                            const std::vector<double>& offsets);
std::string sweep_csv(const std::vector<SweepPoint>& points);

ScoredTriple to_scored(const TripleRecord& rec);  // throws Error(SchemaMismatch) when unscored

}  // namespace evontree
