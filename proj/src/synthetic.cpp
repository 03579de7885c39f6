#include "evontree/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "evontree/error.hpp"
#include "evontree/hashing.hpp"
#include "evontree/prompts.hpp"

namespace evontree {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// GroundTruth

GroundTruth::GroundTruth(std::vector<std::string> roots, std::vector<std::pair<std::string, std::string>> edges,
                         std::vector<std::vector<std::string>> synonym_classes)
    : roots_(std::move(roots)), edges_(std::move(edges)), classes_(std::move(synonym_classes)) {
  index();
}

void GroundTruth::index() {
  class_of_.clear();
  members_.clear();
  children_.clear();
  closure_.clear();
  primaries_.clear();

  std::set<std::string> primary_keys;
  auto add_primary = [&](const std::string& label) {
    const auto key = fold_key(label);
    if (primary_keys.insert(key).second) primaries_.push_back(label);
  };
  for (const auto& r : roots_) add_primary(r);
  for (const auto& [child, parent] : edges_) {
    add_primary(parent);
    add_primary(child);
  }
  for (const auto& cls : classes_) {
    const auto idx = members_.size();
    members_.push_back(cls);
    for (const auto& l : cls) {
      if (!class_of_.emplace(fold_key(l), idx).second)
        throw Error(ErrorCode::InvalidParams, "label '" + l + "' is in two synonym classes");
    }
  }
  for (const auto& p : primaries_) {
    const auto key = fold_key(p);
    if (class_of_.count(key)) continue;
    class_of_.emplace(key, members_.size());
    members_.push_back({p});
  }

  for (const auto& [child, parent] : edges_) {
    if (fold_key(child) == fold_key(parent)) throw Error(ErrorCode::InvalidParams, "self edge on '" + child + "'");
    children_[fold_key(parent)].push_back(child);
  }

  // Transitive closure by DFS from each primary over child->parent edges.
  std::map<std::string, std::vector<std::string>> parents;
  for (const auto& [child, parent] : edges_) parents[fold_key(child)].push_back(fold_key(parent));
  for (const auto& p : primaries_) {
    const auto start = fold_key(p);
    std::set<std::string> seen;
    std::vector<std::string> stack = parents[start];
    while (!stack.empty()) {
      auto cur = stack.back();
      stack.pop_back();
      if (cur == start) throw Error(ErrorCode::InvalidParams, "ground-truth DAG has a cycle through '" + p + "'");
      if (!seen.insert(cur).second) continue;
      for (const auto& up : parents[cur]) stack.push_back(up);
    }
    const auto& sub_class = members_[class_of_.at(start)];
    for (const auto& anc : seen) {
      for (const auto& a : sub_class)
        for (const auto& b : members_[class_of_.at(anc)]) closure_.emplace(fold_key(a), fold_key(b));
    }
  }
}

bool GroundTruth::synonym_true(const std::string& a_key, const std::string& b_key) const {
  auto a = class_of_.find(a_key);
  auto b = class_of_.find(b_key);
  return a != class_of_.end() && b != class_of_.end() && a->second == b->second && a_key != b_key;
}

bool GroundTruth::holds(const Triple& t) const {
  return t.relation == Relation::SubclassOf ? subclass_true(t.subject.key(), t.object.key())
                                            : synonym_true(t.subject.key(), t.object.key());
}

std::vector<std::string> GroundTruth::children_of(const std::string& key) const {
  auto it = children_.find(fold_key(primary_of(key)));
  return it == children_.end() ? std::vector<std::string>{} : it->second;
}

std::vector<std::string> GroundTruth::class_members(const std::string& key) const {
  auto it = class_of_.find(key);
  return it == class_of_.end() ? std::vector<std::string>{} : members_[it->second];
}

std::string GroundTruth::primary_of(const std::string& key) const {
  auto m = class_members(key);
  return m.empty() ? std::string{} : m.front();
}

json GroundTruth::to_json() const {
  json j;
  j["roots"] = roots_;
  j["edges"] = json::array();
  for (const auto& [c, p] : edges_) j["edges"].push_back({c, p});
  j["synonym_classes"] = classes_;
  return j;
}

GroundTruth GroundTruth::from_json(const json& j) {
  try {
    std::vector<std::pair<std::string, std::string>> edges;
    for (const auto& e : j.at("edges")) edges.emplace_back(e.at(0).get<std::string>(), e.at(1).get<std::string>());
    return GroundTruth(j.at("roots").get<std::vector<std::string>>(), std::move(edges),
                       j.at("synonym_classes").get<std::vector<std::vector<std::string>>>());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaMismatch, std::string("ground truth: ") + e.what());
  }
}

std::string GroundTruth::digest() const { return sha256_hex(to_json().dump()); }

// ---------------------------------------------------------------------------
// Sampling

namespace {

class LabelMaker {
 public:
  explicit LabelMaker(std::uint64_t seed) : rng_(seed) {}

  std::string next(std::set<std::string>& taken) {
    for (;;) {
      std::string label = word();
      if (uniform() < 0.35) label += " " + word();
      if (taken.insert(fold_key(label)).second) return label;
    }
  }

  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

 private:
  std::string word() {
    static constexpr char kOnset[] = "bcdfghklmnprstvz";
    static constexpr char kVowel[] = "aeiou";
    const int syllables = 2 + static_cast<int>(rng_() % 2);
    std::string w;
    for (int i = 0; i < syllables; ++i) {
      w += kOnset[rng_() % (sizeof(kOnset) - 1)];
      w += kVowel[rng_() % (sizeof(kVowel) - 1)];
    }
    if (rng_() % 2) w += kOnset[rng_() % (sizeof(kOnset) - 1)];
    w[0] = static_cast<char>(w[0] - 'a' + 'A');
    return w;
  }

  std::mt19937_64 rng_;
};

}  // namespace

GroundTruth sample_ground_truth(int depth, int branching, double synonym_rate, std::uint64_t seed, int roots) {
  if (depth < 1) throw Error(ErrorCode::InvalidParams, "depth must be >= 1");
  if (branching < 1) throw Error(ErrorCode::InvalidParams, "branching must be >= 1");
  if (roots < 1) throw Error(ErrorCode::InvalidParams, "roots must be >= 1");
  if (!(synonym_rate >= 0.0 && synonym_rate <= 1.0))
    throw Error(ErrorCode::InvalidParams, "synonym_rate must lie in [0, 1]");

  LabelMaker maker(seed);
  std::set<std::string> taken;
  std::vector<std::string> root_labels;
  std::vector<std::pair<std::string, std::string>> edges;
  std::vector<std::vector<std::string>> classes;

  auto maybe_alias = [&](const std::string& label) {
    std::vector<std::string> cls{label};
    // Up to two aliases, the second at rate^2.
    if (synonym_rate > 0.0 && maker.uniform() < synonym_rate) {
      cls.push_back(maker.next(taken));
      if (maker.uniform() < synonym_rate * synonym_rate) cls.push_back(maker.next(taken));
    }
    if (cls.size() > 1) classes.push_back(std::move(cls));
  };

  for (int r = 0; r < roots; ++r) {
    const auto root = maker.next(taken);
    root_labels.push_back(root);
    std::vector<std::string> layer{root};
    for (int level = 1; level <= depth; ++level) {
      std::vector<std::string> next;
      for (const auto& parent : layer) {
        for (int b = 0; b < branching; ++b) {
          auto child = maker.next(taken);
          edges.emplace_back(child, parent);
          maybe_alias(child);
          next.push_back(std::move(child));
        }
      }
      layer = std::move(next);
    }
  }
  return GroundTruth(std::move(root_labels), std::move(edges), std::move(classes));
}

// ---------------------------------------------------------------------------
// Profiles

namespace {
bool open_unit(double p) { return p > 0.0 && p < 1.0; }
bool closed_unit(double p) { return p >= 0.0 && p <= 1.0; }
}  // namespace

void NoiseProfile::validate() const {
  if (!open_unit(p_true_known) || !open_unit(p_true_unfamiliar) || !open_unit(p_true_false))
    throw Error(ErrorCode::InvalidParams, "noise probabilities must lie in (0, 1)");
  if (!(p_true_known > p_true_false)) throw Error(ErrorCode::InvalidParams, "p_true_known must exceed p_true_false");
  if (!closed_unit(familiarity_rate)) throw Error(ErrorCode::InvalidParams, "familiarity_rate must lie in [0, 1]");
  if (!(jitter >= 0.0 && jitter < 0.5)) throw Error(ErrorCode::InvalidParams, "jitter must lie in [0, 0.5)");
}

void GenerationProfile::validate() const {
  if (!closed_unit(hallucination_rate) || !closed_unit(alias_sibling_rate) || !closed_unit(misbelief_rate) ||
      !closed_unit(fence_rate))
    throw Error(ErrorCode::InvalidParams, "generation rates must lie in [0, 1]");
}

// ---------------------------------------------------------------------------
// SyntheticModel

SyntheticModel::SyntheticModel(std::shared_ptr<const GroundTruth> truth, NoiseProfile noise, GenerationProfile gen,
                               std::uint64_t seed, SyntheticRole role)
    : truth_(std::move(truth)), noise_(noise), gen_(gen), seed_(seed), role_(role) {
  if (!truth_) throw Error(ErrorCode::InvalidParams, "synthetic model needs a ground truth");
  noise_.validate();
  gen_.validate();
  ordered_json j;
  j["role"] = role_ == SyntheticRole::Model ? "model" : "judge";
  j["seed"] = seed_;
  j["truth"] = truth_->digest();
  j["noise"] = {noise_.p_true_known, noise_.p_true_unfamiliar, noise_.p_true_false, noise_.familiarity_rate,
                noise_.jitter};
  j["gen"] = {gen_.hallucination_rate, gen_.alias_sibling_rate, gen_.misbelief_rate, gen_.fence_rate};
  identity_ = "synthetic:" + sha256_hex(j.dump()).substr(0, 16);
}

std::uint64_t SyntheticModel::seed_for(const char* stream) const { return stable_hash(stream, seed_); }

std::string SyntheticModel::identity() const { return identity_; }

namespace {
std::string_view rel_tag(Relation r) { return to_string(r); }
}  // namespace

bool SyntheticModel::is_familiar(const Triple& t) const {
  return hash_uniform({"familiar", rel_tag(t.relation), t.subject.key(), t.object.key()}, seed_) <
         noise_.familiarity_rate;
}

TripleCategory SyntheticModel::category(const Triple& t) const {
  if (truth_->holds(t)) return is_familiar(t) ? TripleCategory::Familiar : TripleCategory::Unfamiliar;
  const bool misbelief =
      hash_uniform({"misbelief", rel_tag(t.relation), t.subject.key(), t.object.key()}, seed_) < gen_.misbelief_rate;
  return misbelief ? TripleCategory::Misbelief : TripleCategory::False;
}

double SyntheticModel::p_true(const Triple& t) const {
  double p = noise_.p_true_false;
  switch (category(t)) {
    case TripleCategory::Familiar:
    case TripleCategory::Misbelief: p = noise_.p_true_known; break;
    case TripleCategory::Unfamiliar: p = noise_.p_true_unfamiliar; break;
    case TripleCategory::False: p = noise_.p_true_false; break;
  }
  if (noise_.jitter > 0.0) {
    const double u = hash_uniform({"jitter", rel_tag(t.relation), t.subject.key(), t.object.key()}, seed_);
    p += (2.0 * u - 1.0) * noise_.jitter;
  }
  return std::clamp(p, 1e-9, 1.0 - 1e-9);
}

namespace {

struct ParsedStatement {
  Relation relation;
  std::string a;
  std::string b;
};

std::optional<ParsedStatement> parse_statement(std::string_view prompt) {
  for (auto r : {Relation::SynonymOf, Relation::SubclassOf}) {
    for (const auto& t : prompt_set(r)) {
      if (auto m = match_template(t.text, prompt)) return ParsedStatement{r, m->at("A"), m->at("B")};
    }
  }
  return std::nullopt;
}

std::optional<Triple> statement_triple(const ParsedStatement& s) {
  try {
    return Triple::make(s.a, s.relation, s.b);
  } catch (const Error&) {
    return std::nullopt;
  }
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

ScoreResponse SyntheticModel::respond_score(const ScoreRequest& req) const {
  auto stmt = parse_statement(req.prefix);
  if (!stmt) throw Error(ErrorCode::UnrecognizedPrompt, "score prefix matches no True/False template");
  const auto word = lower(trim(req.completion));
  if (word.empty()) return ScoreResponse{};  // zero completion tokens
  if (word != "true" && word != "false")
    throw Error(ErrorCode::UnrecognizedPrompt, "synthetic scorer only knows True/False completions");
  auto t = statement_triple(*stmt);
  // A statement about a concept and itself is trivially false for the model.
  const double p = t ? p_true(*t) : noise_.p_true_false;
  return ScoreResponse{{std::log(word == "true" ? p : 1.0 - p)}};
}

std::string SyntheticModel::hallucinated_label(const std::string& parent_key, int slot) const {
  for (int salt = 0;; ++salt) {
    std::mt19937_64 rng(stable_hash({"halluc-label", parent_key, std::to_string(slot), std::to_string(salt)}, seed_));
    static constexpr char kOnset[] = "bcdfghklmnprstvz";
    static constexpr char kVowel[] = "aeiou";
    std::string w;
    for (int i = 0; i < 3; ++i) {
      w += kOnset[rng() % (sizeof(kOnset) - 1)];
      w += kVowel[rng() % (sizeof(kVowel) - 1)];
    }
    w[0] = static_cast<char>(w[0] - 'a' + 'A');
    w += " Complex";
    if (!truth_->in_vocabulary(fold_key(w))) return w;
  }
}

std::string SyntheticModel::tree_reply(const std::string& name) const {
  const auto key = fold_key(name);
  ordered_json subclasses = ordered_json::array();
  if (truth_->in_vocabulary(key)) {
    const auto kids = truth_->children_of(key);
    for (const auto& child : kids) {
      auto members = truth_->class_members(fold_key(child));
      ordered_json entry;
      entry["name"] = child;
      entry["description"] = "A kind of " + truth_->primary_of(key) + ".";
      entry["synonyms"] = std::vector<std::string>(members.begin() + 1, members.end());
      subclasses.push_back(std::move(entry));
      for (std::size_t i = 1; i < members.size(); ++i) {
        if (hash_uniform({"alias-sibling", key, fold_key(members[i])}, seed_) >= gen_.alias_sibling_rate) continue;
        std::vector<std::string> others;
        for (std::size_t k = 0; k < members.size(); ++k)
          if (k != i) others.push_back(members[k]);
        ordered_json alias;
        alias["name"] = members[i];
        alias["description"] = "Another name for " + child + ".";
        alias["synonyms"] = others;
        subclasses.push_back(std::move(alias));
      }
    }
    const int slots = std::max<int>(1, static_cast<int>(kids.size()));
    for (int s = 0; s < slots; ++s) {
      if (hash_uniform({"halluc", key, std::to_string(s)}, seed_) >= gen_.hallucination_rate) continue;
      ordered_json entry;
      entry["name"] = hallucinated_label(key, s);
      entry["description"] = "";
      entry["synonyms"] = ordered_json::array();
      subclasses.push_back(std::move(entry));
    }
  }
  ordered_json body;
  body["description"] = truth_->in_vocabulary(key) ? "A concept in the synthetic ontology." : "";
  body["subclasses"] = std::move(subclasses);
  ordered_json reply;
  reply[name] = std::move(body);
  const auto text = reply.dump(2);
  if (hash_uniform({"fence", key}, seed_) < gen_.fence_rate) return "```json\n" + text + "\n```";
  return text;
}

std::string SyntheticModel::respond_generate(const GenerateRequest& req) const {
  const auto& prompt = req.prompt;

  static constexpr std::string_view kTreeHead = "As a medical expert, please generate strict subclasses of {concept} and their synonyms.";
  const auto first_line = prompt.substr(0, prompt.find('\n'));
  if (auto m = match_template(kTreeHead, first_line)) {
    const auto& name = m->at("concept");
    try {
      if (build_tree_prompt(ConceptLabel::normalize(name)) == prompt) return tree_reply(name);
    } catch (const Error&) {
    }
  }

  if (auto stmt = parse_statement(prompt)) {
    auto t = statement_triple(*stmt);
    if (role_ == SyntheticRole::Judge) return t && truth_->holds(*t) ? "True" : "False";
    // One-shot decision sampled from the same belief the scorer exposes.
    const double p = t ? p_true(*t) : noise_.p_true_false;
    const double u = hash_uniform({"oneshot", rel_tag(stmt->relation), fold_key(stmt->a), fold_key(stmt->b)}, seed_);
    return u < p ? "True." : "False.";
  }

  if (role_ == SyntheticRole::Model) {
    const std::string hint(kHint);
    for (auto tmpl : {kImplicitFunctions, kImplicitSubtypes}) {
      const std::string with_hint = std::string(tmpl) + hint;
      if (auto m = match_template(with_hint, prompt)) {
        return m->at("concept") + " has characteristic functions shaped by its place in the hierarchy. Since " +
               m->at("D") + " is a subclass of " + m->at("C") + ", and " + m->at("C") + " is a subclass of " +
               m->at("A") + ", properties of " + m->at("A") + " carry over to its descendants.";
      }
      if (auto m = match_template(tmpl, prompt))
        return m->at("concept") + " has characteristic functions shaped by its place in the hierarchy.";
    }
  }
  throw Error(ErrorCode::UnrecognizedPrompt, "prompt matches no known template");
}

std::string SyntheticModel::post(const std::string& path, const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Protocol, std::string("request body is not JSON: ") + e.what());
  }
  try {
    if (path == kGeneratePath) {
      GenerateRequest req;
      req.prompt = j.at("prompt").get<std::string>();
      req.max_tokens = j.at("max_tokens").get<int>();
      req.temperature = j.at("temperature").get<double>();
      req.stop = j.at("stop").get<std::vector<std::string>>();
      ordered_json out;
      out["text"] = respond_generate(req);
      return out.dump();
    }
    if (path == kScorePath) {
      ScoreRequest req{j.at("prompt").get<std::string>(), j.at("completion").get<std::string>()};
      ordered_json out;
      out["token_logprobs"] = respond_score(req).token_logprobs;
      return out.dump();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Protocol, std::string("malformed request: ") + e.what());
  }
  throw Error(ErrorCode::Protocol, "unknown path " + path);
}

}  // namespace evontree
