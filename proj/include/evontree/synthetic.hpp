#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "evontree/gateway.hpp"
#include "evontree/ontology.hpp"

namespace evontree {

// Known ontology behind the synthetic model. Labels are display strings;
// every lookup goes through fold_key.
class GroundTruth {
 public:
  GroundTruth() = default;
  GroundTruth(std::vector<std::string> roots, std::vector<std::pair<std::string, std::string>> edges,
              std::vector<std::vector<std::string>> synonym_classes);

  const std::vector<std::string>& roots() const noexcept { return roots_; }
  // (child, parent) over primary labels.
  const std::vector<std::pair<std::string, std::string>>& dag() const noexcept { return edges_; }
  // Classes with two or more labels; the first member is the primary (DAG) label.
  const std::vector<std::vector<std::string>>& synonym_classes() const noexcept { return classes_; }
  // (subclass key, superclass key), transitive and lifted over synonym classes.
  const std::set<std::pair<std::string, std::string>>& closure() const noexcept { return closure_; }

  std::size_t concept_count() const noexcept { return primaries_.size(); }
  bool in_vocabulary(const std::string& key) const { return class_of_.count(key) != 0; }
  bool subclass_true(const std::string& sub_key, const std::string& super_key) const {
    return closure_.count({sub_key, super_key}) != 0;
  }
  bool synonym_true(const std::string& a_key, const std::string& b_key) const;
  bool holds(const Triple& t) const;

  // Primary labels of the children of the concept named by `key` (or its alias).
  std::vector<std::string> children_of(const std::string& key) const;
  // All labels of the class containing `key`, primary first; empty if unknown.
  std::vector<std::string> class_members(const std::string& key) const;
  std::string primary_of(const std::string& key) const;

  nlohmann::json to_json() const;
  static GroundTruth from_json(const nlohmann::json& j);
  std::string digest() const;

 private:
  void index();

  std::vector<std::string> roots_;
  std::vector<std::pair<std::string, std::string>> edges_;
  std::vector<std::vector<std::string>> classes_;

  std::vector<std::string> primaries_;
  std::map<std::string, std::size_t> class_of_;          // key -> class index into members_
  std::vector<std::vector<std::string>> members_;        // every class incl. singletons
  std::map<std::string, std::vector<std::string>> children_;  // primary key -> child primaries
  std::set<std::pair<std::string, std::string>> closure_;
};

// Full `branching`-ary trees of height `depth`, one per root, with random
// aliases. Throws Error(InvalidParams) for depth < 1, branching < 1, roots < 1.
GroundTruth sample_ground_truth(int depth, int branching, double synonym_rate, std::uint64_t seed, int roots = 1);

struct NoiseProfile {
  double p_true_known = 0.9;
  double p_true_unfamiliar = 0.3;
  double p_true_false = 0.1;
  double familiarity_rate = 0.8;
  double jitter = 0.0;

  void validate() const;  // throws Error(InvalidParams)
};

struct GenerationProfile {
  double hallucination_rate = 0.0;  // per child slot, labels outside the vocabulary
  double alias_sibling_rate = 1.0;  // alias also listed as its own sibling entry
  double misbelief_rate = 0.0;      // false triples endorsed like familiar ones
  double fence_rate = 0.5;          // tree replies wrapped in a ```json fence

  void validate() const;
};

enum class SyntheticRole { Model, Judge };

enum class TripleCategory { Familiar, Unfamiliar, False, Misbelief };

// Deterministic fake model serving the wire contract from a GroundTruth.
// Scores depend only on (triple, polarity, seed), never on paraphrase wording.
class SyntheticModel final : public Transport {
 public:
  SyntheticModel(std::shared_ptr<const GroundTruth> truth, NoiseProfile noise, GenerationProfile gen,
                 std::uint64_t seed, SyntheticRole role = SyntheticRole::Model);

  std::string identity() const override;
  std::string post(const std::string& path, const std::string& body) override;

  std::string respond_generate(const GenerateRequest& req) const;
  ScoreResponse respond_score(const ScoreRequest& req) const;

  TripleCategory category(const Triple& t) const;
  // Probability mass on " True" for the triple after jitter.
  double p_true(const Triple& t) const;
  bool is_familiar(const Triple& t) const;

  const GroundTruth& truth() const noexcept { return *truth_; }
  const NoiseProfile& noise() const noexcept { return noise_; }
  const GenerationProfile& generation() const noexcept { return gen_; }

 private:
  std::string tree_reply(const std::string& name) const;
  std::string hallucinated_label(const std::string& parent_key, int slot) const;
  std::uint64_t seed_for(const char* stream) const;

  std::shared_ptr<const GroundTruth> truth_;
  NoiseProfile noise_;
  GenerationProfile gen_;
  std::uint64_t seed_;
  SyntheticRole role_;
  std::string identity_;
};

}  // namespace evontree
