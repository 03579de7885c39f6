#include "evontree/report.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "evontree/error.hpp"
#include "evontree/format.hpp"
#include "evontree/prompts.hpp"

namespace evontree {

using ordered_json = nlohmann::ordered_json;

namespace {

struct RowSpec {
  TripleClass cls;
  Relation rel;
  const std::vector<TripleRecord> ReportInputs::*members;
};

constexpr RowSpec kRows[] = {
    {TripleClass::Raw, Relation::SynonymOf, &ReportInputs::raw},
    {TripleClass::Confirmed, Relation::SynonymOf, &ReportInputs::confirmed},
    {TripleClass::Raw, Relation::SubclassOf, &ReportInputs::raw},
    {TripleClass::Confirmed, Relation::SubclassOf, &ReportInputs::confirmed},
    {TripleClass::Reliable, Relation::SubclassOf, &ReportInputs::reliable},
    {TripleClass::Extrapolated, Relation::SubclassOf, &ReportInputs::extrapolated},
    {TripleClass::Gap, Relation::SubclassOf, &ReportInputs::gaps},
};

constexpr int kBins = 20;

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

int bin_of(double v) {
  const int k = static_cast<int>(std::floor((v + 1.0) * 10.0));
  return std::clamp(k, 0, kBins - 1);
}

ordered_json opt_json(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

}  // namespace

ScoredTriple to_scored(const TripleRecord& rec) {
  if (!rec.scores || rec.scores->empty())
    throw Error(ErrorCode::SchemaMismatch, "triple " + to_string(rec.triple) + " carries no scores");
  ScoredTriple st{rec.triple, {}, rec.cls};
  for (double v : *rec.scores) st.breakdowns.push_back({1.0, 1.0, v});
  return st;
}

std::map<Triple, bool> judge_triples(const std::vector<Triple>& triples, Gateway& judge, std::size_t& unparseable,
                                     int threads) {
  if (threads <= 0) threads = judge.options().max_in_flight;
  enum class Status : char { True, False, Unparseable, Failed };
  std::vector<Status> status(triples.size(), Status::Failed);
  std::vector<std::string> errors(triples.size());
  const PromptTemplate subclass{Relation::SubclassOf, 0, kJudgeSubclass};
  const PromptTemplate synonym{Relation::SynonymOf, 0, kJudgeSynonym};
  const auto n = static_cast<std::ptrdiff_t>(triples.size());
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto& t = triples[i];
    try {
      status[i] = one_shot_label(t, t.relation == Relation::SubclassOf ? subclass : synonym, judge) ? Status::True
                                                                                                   : Status::False;
    } catch (const Error& e) {
      status[i] = e.code() == ErrorCode::Unparseable ? Status::Unparseable : Status::Failed;
      errors[i] = e.what();
    }
  }
  std::map<Triple, bool> out;
  for (std::size_t i = 0; i < triples.size(); ++i) {
    if (status[i] == Status::Failed) throw Error(ErrorCode::JudgeUnavailable, errors[i]);
    if (status[i] == Status::Unparseable) ++unparseable;
    out.emplace(triples[i], status[i] == Status::True);
  }
  return out;
}

StatsReport emit_report(const ReportInputs& in, Gateway* judge, int threads) {
  std::map<Triple, double> value;
  for (const auto* src : {&in.scored, &in.confirmed, &in.reliable, &in.extrapolated_scored, &in.gaps})
    for (const auto& r : *src)
      if (r.scores && !r.scores->empty()) value.emplace(r.triple, mean_of(*r.scores));

  StatsReport rep;
  std::map<Triple, bool> verdict;
  if (judge) {
    std::set<Triple> all;
    for (const auto& spec : kRows)
      for (const auto& r : in.*spec.members) all.insert(r.triple);
    try {
      verdict = judge_triples({all.begin(), all.end()}, *judge, rep.judge_unparseable, threads);
      rep.has_accuracy = true;
      rep.judge_status = "ok";
    } catch (const Error& e) {
      if (e.code() != ErrorCode::JudgeUnavailable) throw;
      rep.judge_status = std::string("unavailable: ") + e.what();
      rep.judge_unparseable = 0;
    }
  }

  for (const auto& spec : kRows) {
    StatsRow row{spec.cls, spec.rel};
    std::vector<double> vals;
    std::size_t judged = 0, correct = 0;
    std::vector<HistogramBin> bins;
    for (int k = 0; k < kBins; ++k)
      bins.push_back({spec.cls, spec.rel, static_cast<double>(k - 10) / 10.0, static_cast<double>(k - 9) / 10.0});
    std::vector<std::size_t> bin_correct(kBins, 0);

    for (const auto& r : in.*spec.members) {
      if (r.triple.relation != spec.rel) continue;
      ++row.num;
      auto v = value.find(r.triple);
      std::optional<bool> ok;
      if (rep.has_accuracy) {
        auto it = verdict.find(r.triple);
        if (it != verdict.end()) {
          ok = it->second;
          ++judged;
          correct += it->second ? 1 : 0;
        }
      }
      if (v == value.end()) continue;
      vals.push_back(v->second);
      const int b = bin_of(v->second);
      ++bins[b].count;
      if (ok && *ok) ++bin_correct[b];
    }
    if (!vals.empty()) row.mean_confirm_value = mean_of(vals);
    if (rep.has_accuracy && judged > 0) row.accuracy = static_cast<double>(correct) / static_cast<double>(judged);
    if (rep.has_accuracy)
      for (int k = 0; k < kBins; ++k)
        if (bins[k].count > 0)
          bins[k].accuracy = static_cast<double>(bin_correct[k]) / static_cast<double>(bins[k].count);
    rep.rows.push_back(row);
    rep.histogram.insert(rep.histogram.end(), bins.begin(), bins.end());
  }
  return rep;
}

const StatsRow& StatsReport::row(TripleClass c, Relation r) const {
  for (const auto& row : rows)
    if (row.cls == c && row.relation == r) return row;
  throw Error(ErrorCode::InvalidParams, "no report row for this class and relation");
}

ordered_json StatsReport::to_json() const {
  ordered_json j;
  auto rows_j = ordered_json::array();
  for (const auto& r : rows) {
    ordered_json e;
    e["class"] = to_string(r.cls);
    e["relation"] = to_string(r.relation);
    e["num"] = r.num;
    e["confirm_value_avg"] = opt_json(r.mean_confirm_value);
    if (has_accuracy) e["accuracy"] = opt_json(r.accuracy);
    rows_j.push_back(std::move(e));
  }
  j["rows"] = std::move(rows_j);
  j["judge"] = judge_status;
  j["judge_unparseable"] = judge_unparseable;
  return j;
}

std::string StatsReport::stats_csv() const {
  std::string out = has_accuracy ? "Triple Type,Relation,Num,ConfirmValue Avg.,Acc.\n"
                                 : "Triple Type,Relation,Num,ConfirmValue Avg.\n";
  for (const auto& r : rows) {
    out += std::string(to_string(r.cls)) + "," + std::string(to_string(r.relation)) + "," + std::to_string(r.num) +
           "," + format_optional(r.mean_confirm_value);
    if (has_accuracy) out += "," + format_optional(r.accuracy);
    out += "\n";
  }
  return out;
}

std::string StatsReport::histogram_csv() const {
  std::string out = has_accuracy ? "class,relation,bin_lo,bin_hi,count,accuracy\n" : "class,relation,bin_lo,bin_hi,count\n";
  for (const auto& b : histogram) {
    out += std::string(to_string(b.cls)) + "," + std::string(to_string(b.relation)) + "," + format_double(b.lo) + "," +
           format_double(b.hi) + "," + std::to_string(b.count);
    if (has_accuracy) out += "," + format_optional(b.accuracy);
    out += "\n";
  }
  return out;
}

std::vector<SweepPoint> sweep_gap_threshold(const std::vector<TripleRecord>& extrapolated_scored,
                                            const Thresholds& thresholds, GapMode mode,
                                            const std::vector<double>& offsets) {
  std::vector<ScoredTriple> candidates;
  std::vector<std::size_t> chains;
  for (const auto& r : extrapolated_scored) {
    candidates.push_back(to_scored(r));
    chains.push_back(r.chains.size());
  }
  std::vector<double> sorted = offsets;
  std::sort(sorted.begin(), sorted.end());
  std::vector<SweepPoint> out;
  for (double off : sorted) {
    const auto shifted = shift(thresholds, off);
    SweepPoint p{off, 0, 0, std::nullopt};
    double sum = 0.0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (!is_gap(candidates[i], shifted, mode)) continue;
      ++p.gap_count;
      p.chain_count += chains[i];
      sum += candidates[i].mean_value();
    }
    if (p.gap_count > 0) p.mean_confirm_value = sum / static_cast<double>(p.gap_count);
    out.push_back(p);
  }
  return out;
}

std::string sweep_csv(const std::vector<SweepPoint>& points) {
  std::string out = "offset,gap_count,chain_count,mean_confirm_value\n";
  for (const auto& p : points)
    out += format_double(p.offset) + "," + std::to_string(p.gap_count) + "," + std::to_string(p.chain_count) + "," +
           format_optional(p.mean_confirm_value) + "\n";
  return out;
}

}  // namespace evontree
