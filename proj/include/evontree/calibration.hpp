#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "evontree/confirm.hpp"
#include "evontree/gateway.hpp"
#include "evontree/prompts.hpp"

namespace evontree {

struct LabeledScore {
  double score;  // ConfirmValue under one template
  bool label;    // one-shot generated decision
};

struct RocPoint {
  double tau;
  double tpr;
  double fpr;
  double j;
  friend bool operator==(const RocPoint&, const RocPoint&) = default;
};

enum class TieBreak { Largest, Smallest };

struct SweepSpec {
  double lo = 0.0;
  double hi = 1.0;
  TieBreak tie_break = TieBreak::Largest;
};

struct CalibrationResult {
  std::string template_id;
  double tau_star = 0.0;
  double j_star = 0.0;
  std::vector<RocPoint> curve;  // ascending tau
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
  bool weak = false;  // best J <= 0: decisions and scores do not align
};

// Candidates: unique observed scores inside [lo, hi] plus both endpoints.
// TPR/FPR count scores strictly above tau. Throws Error(DegenerateLabels).
// Parallel over candidates.
CalibrationResult fit_threshold(std::span<const LabeledScore> samples, const SweepSpec& spec = {});

namespace serial {
// Single descending sweep over sorted samples.
CalibrationResult fit_threshold(std::span<const LabeledScore> samples, const SweepSpec& spec = {});
}  // namespace serial

// First case-insensitive "true"/"false" in the reply decides; throws
// Error(Unparseable) when neither appears.
bool parse_decision(std::string_view reply);
bool one_shot_label(const Triple& triple, const PromptTemplate& tmpl, Gateway& gateway);

struct CalibrationSamples {
  std::map<std::string, std::vector<LabeledScore>> by_template;
  std::size_t unparseable = 0;
  std::size_t failed = 0;
};

// One-shot labels for every scored triple under every template of its relation.
CalibrationSamples collect_samples(const std::vector<ScoredTriple>& scored, Gateway& gateway, int threads = 0);

struct CalibrationReport {
  std::map<std::string, CalibrationResult> per_template;
  CalibrationResult pooled;
  std::set<std::string> fallbacks;  // templates using the pooled fit
  std::size_t unparseable = 0;
  std::size_t failed = 0;

  Thresholds thresholds() const;
  nlohmann::ordered_json to_json() const;
  static CalibrationReport from_json(const nlohmann::json& j);
  std::string roc_csv() const;
};

CalibrationReport calibrate(const CalibrationSamples& samples, const SweepSpec& spec);

}  // namespace evontree
