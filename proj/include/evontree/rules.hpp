#pragma once

#include <compare>
#include <set>
#include <vector>

#include "evontree/confirm.hpp"
#include "evontree/ontology.hpp"
#include "evontree/triple_io.hpp"

namespace evontree {

// Two composable SubclassOf premises (D, C), (C, A) and their conclusion (D, A).
struct DerivationChain {
  Triple conclusion;
  Premises premises;

  bool valid() const;

  friend bool operator==(const DerivationChain& a, const DerivationChain& b) noexcept {
    return a.conclusion == b.conclusion && a.premises[0] == b.premises[0] && a.premises[1] == b.premises[1];
  }
  friend std::strong_ordering operator<=>(const DerivationChain& a, const DerivationChain& b) noexcept {
    if (auto c = a.conclusion <=> b.conclusion; c != 0) return c;
    if (auto c = a.premises[0] <=> b.premises[0]; c != 0) return c;
    return a.premises[1] <=> b.premises[1];
  }
};

// Closed triangles (x SynonymOf y), (x SubclassOf z), (y SubclassOf z): both
// subclass edges of every triangle are reliable.
std::set<Triple> select_reliable(const TripleStore& confirmed);

// One-hop transitive composition of reliable subclass triples. Conclusions
// that are reflexive, synonym-equivalent, or already in `existing` modulo
// synonym classes are dropped. One chain per premise pair, sorted.
// Throws Error(InvalidHops) unless hops == 1.
std::vector<DerivationChain> extrapolate(const std::set<Triple>& reliable, const TripleStore& existing, int hops = 1);

namespace serial {
std::set<Triple> select_reliable(const TripleStore& confirmed);
std::vector<DerivationChain> extrapolate(const std::set<Triple>& reliable, const TripleStore& existing, int hops = 1);
}  // namespace serial

enum class GapMode { AllBelow, MeanBelow, AnyBelow };

GapMode gap_mode_from_string(const std::string& s);  // throws Error(ConfigInvalid)
std::string_view to_string(GapMode m);

// AllBelow: every value strictly under its threshold. MeanBelow: mean of
// (value - threshold) < 0. AnyBelow: some value strictly under.
// Throws Error(MissingThreshold).
bool is_gap(const ScoredTriple& scored, const Thresholds& thresholds, GapMode mode = GapMode::AllBelow);
std::vector<ScoredTriple> select_gaps(const std::vector<ScoredTriple>& candidates, const Thresholds& thresholds,
                                      GapMode mode = GapMode::AllBelow);

Thresholds shift(const Thresholds& thresholds, double offset);

}  // namespace evontree
