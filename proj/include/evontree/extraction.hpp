#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "evontree/gateway.hpp"
#include "evontree/ontology.hpp"

namespace evontree {

// Antibiotic, Bacterium, Cell, ... Non-Infectious Disease.
std::vector<ConceptLabel> default_roots();

struct ExtractionConfig {
  std::vector<ConceptLabel> roots = default_roots();
  int max_depth = 3;
  int parse_retries = 3;
  int frontier_budget = 100000;  // concepts expanded per root
  double temperature = 0.7;
  int max_tokens = 1024;

  void validate() const;  // throws Error(ConfigInvalid)
};

struct ChildRecord {
  ConceptLabel label;
  std::string description;
  std::vector<ConceptLabel> synonyms;
};

struct TreeResponse {
  std::string description;
  std::vector<ChildRecord> children;
};

// Accepts bare JSON or JSON inside a ``` fence. Throws Error(ParseFailure)
// for malformed JSON and Error(SchemaMismatch) for a wrong shape.
TreeResponse parse_tree_reply(std::string_view text, const ConceptLabel& parent);
inline std::vector<ChildRecord> parse_tree_response(std::string_view text, const ConceptLabel& parent) {
  return parse_tree_reply(text, parent).children;
}

struct ExpansionTally {
  std::size_t expanded = 0;
  std::size_t unexpandable = 0;      // parse retries exhausted
  std::size_t gateway_failures = 0;  // transport/protocol errors after retries
  std::size_t cycle_drops = 0;
  std::size_t sibling_merges = 0;
  std::size_t parse_retries = 0;

  ExpansionTally& operator+=(const ExpansionTally& o);
};

struct Expansion {
  OntologyTree tree;
  ExpansionTally tally;
};

// Breadth-first, layer by layer, frontier sorted by key. Failed concepts are
// tallied and left as leaves; the partial tree is always returned.
Expansion expand(const ConceptLabel& root, const ExtractionConfig& cfg, Gateway& gateway, int threads = 0);

nlohmann::ordered_json tree_to_json(const OntologyTree& tree);
OntologyTree tree_from_json(const nlohmann::json& j);
std::string file_key(const ConceptLabel& label);  // filesystem-safe form of the key

}  // namespace evontree
