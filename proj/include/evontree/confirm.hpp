#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evontree/gateway.hpp"
#include "evontree/ontology.hpp"
#include "evontree/prompts.hpp"

namespace evontree {

// exp(-mean(logprobs)). Natural base; throws Error(EmptySpan) on an empty
// span and Error(InvalidParams) on positive entries.
double perplexity(std::span<const double> token_logprobs);

// sign(ppl_false - ppl_true) / min(ppl_true, ppl_false), sign(0) = 0.
double confirm_value(double ppl_true, double ppl_false);

struct ScoreBreakdown {
  double ppl_true = 1.0;
  double ppl_false = 1.0;
  double confirm_value = 0.0;
};

struct ScoredTriple {
  Triple triple;
  std::vector<ScoreBreakdown> breakdowns;  // ordered by paraphrase_id
  TripleClass cls = TripleClass::Raw;

  std::vector<double> values() const;
  double mean_value() const;
};

// Score under every template of the triple's relation. Any failing prompt
// fails the whole triple (the gateway error propagates).
ScoredTriple score_triple(const Triple& triple, Gateway& gateway);

// Template id -> threshold.
using Thresholds = std::map<std::string, double>;

// All confirm values strictly above their template's threshold.
// Throws Error(MissingThreshold) if any template is uncovered.
bool is_confirmed(const ScoredTriple& scored, const Thresholds& thresholds);

// Batch outcome: scored triples in input order, failures kept separately.
struct ScoredBatch {
  std::vector<ScoredTriple> scored;
  std::vector<std::pair<Triple, std::string>> unscored;  // triple, error text
  std::size_t transport_failures = 0;
};

// OpenMP-parallel batch scoring; `threads` <= 0 uses the gateway bound.
ScoredBatch score_batch(const std::vector<Triple>& triples, Gateway& gateway, int threads = 0);

namespace serial {
ScoredBatch score_batch(const std::vector<Triple>& triples, Gateway& gateway);
}  // namespace serial

}  // namespace evontree
