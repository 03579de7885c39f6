#include "evontree/extraction.hpp"

#include <omp.h>

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>

#include "evontree/error.hpp"
#include "evontree/prompts.hpp"

namespace evontree {

using json = nlohmann::json;

std::vector<ConceptLabel> default_roots() {
  static constexpr std::string_view kRoots[] = {
      "Antibiotic", "Bacterium", "Cell",     "Enzyme",             "Fungus",
      "Hormone",    "Tissue",    "Vertebrate", "Virus",            "Vitamin",
      "Chemical",   "Inorganic Chemical", "Organic Chemical", "Infectious Disease", "Non-Infectious Disease",
  };
  std::vector<ConceptLabel> out;
  for (auto r : kRoots) out.push_back(ConceptLabel::normalize(r));
  return out;
}

void ExtractionConfig::validate() const {
  if (roots.empty()) throw Error(ErrorCode::ConfigInvalid, "extraction.roots must be non-empty");
  if (max_depth < 1) throw Error(ErrorCode::ConfigInvalid, "extraction.max_depth must be >= 1");
  if (parse_retries < 0) throw Error(ErrorCode::ConfigInvalid, "extraction.parse_retries must be >= 0");
  if (frontier_budget < 1) throw Error(ErrorCode::ConfigInvalid, "extraction.frontier_budget must be >= 1");
  if (max_tokens < 1) throw Error(ErrorCode::ConfigInvalid, "extraction.max_tokens must be >= 1");
}

ExpansionTally& ExpansionTally::operator+=(const ExpansionTally& o) {
  expanded += o.expanded;
  unexpandable += o.unexpandable;
  gateway_failures += o.gateway_failures;
  cycle_drops += o.cycle_drops;
  sibling_merges += o.sibling_merges;
  parse_retries += o.parse_retries;
  return *this;
}

namespace {

std::string_view strip_fence(std::string_view text) {
  auto open = text.find("```");
  if (open == std::string_view::npos) return text;
  // Skip an optional language tag; the body may start on the same line.
  auto body = open + 3;
  while (body < text.size() && std::isalpha(static_cast<unsigned char>(text[body]))) ++body;
  auto close = text.find("```", body);
  if (close == std::string_view::npos) return text.substr(body);
  return text.substr(body, close - body);
}

std::optional<ConceptLabel> try_label(const json& j) {
  if (!j.is_string()) throw Error(ErrorCode::SchemaMismatch, "concept names must be strings");
  try {
    return ConceptLabel::normalize(j.get<std::string>());
  } catch (const Error&) {
    return std::nullopt;  // the schema skeleton invites empty strings
  }
}

}  // namespace

TreeResponse parse_tree_reply(std::string_view text, const ConceptLabel& parent) {
  json j;
  try {
    j = json::parse(strip_fence(text));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseFailure, e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::SchemaMismatch, "top level must be an object");
  const json* node = nullptr;
  for (const auto& [k, v] : j.items()) {
    if (fold_key(k) == parent.key()) node = &v;
  }
  if (!node) throw Error(ErrorCode::SchemaMismatch, "no top-level key for '" + parent.text() + "'");
  if (!node->is_object() || !node->contains("subclasses") || !(*node)["subclasses"].is_array())
    throw Error(ErrorCode::SchemaMismatch, "missing \"subclasses\" array");

  TreeResponse out;
  if (node->contains("description") && (*node)["description"].is_string())
    out.description = (*node)["description"].get<std::string>();
  for (const auto& entry : (*node)["subclasses"]) {
    if (!entry.is_object() || !entry.contains("name") || !entry.contains("description") ||
        !entry.contains("synonyms"))
      throw Error(ErrorCode::SchemaMismatch, "subclass entries need name, description, synonyms");
    if (!entry["description"].is_string() || !entry["synonyms"].is_array())
      throw Error(ErrorCode::SchemaMismatch, "description must be a string and synonyms an array");
    auto label = try_label(entry["name"]);
    if (!label) continue;
    ChildRecord rec{*label, entry["description"].get<std::string>(), {}};
    for (const auto& s : entry["synonyms"])
      if (auto syn = try_label(s)) rec.synonyms.push_back(*syn);
    out.children.push_back(std::move(rec));
  }
  return out;
}

namespace {

struct Attempt {
  std::optional<TreeResponse> reply;
  bool gateway_failed = false;
  std::size_t retries = 0;
};

Attempt fetch_children(const ConceptLabel& label, const ExtractionConfig& cfg, Gateway& gateway) {
  Attempt a;
  GenerateRequest req;
  req.prompt = build_tree_prompt(label);
  req.max_tokens = cfg.max_tokens;
  req.temperature = cfg.temperature;
  for (int attempt = 0; attempt <= cfg.parse_retries; ++attempt) {
    try {
      const auto text = gateway.generate(req, attempt == 0 ? CacheRead::Allow : CacheRead::Bypass);
      a.reply = parse_tree_reply(text, label);
      return a;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::ParseFailure || e.code() == ErrorCode::SchemaMismatch) {
        if (attempt < cfg.parse_retries) ++a.retries;
        continue;
      }
      a.gateway_failed = true;
      return a;
    }
  }
  return a;
}

// Collapse siblings that share a key; synonyms are unioned in first-seen order.
std::vector<ChildRecord> merge_siblings(std::vector<ChildRecord> kids, std::size_t& merges) {
  std::map<std::string, ChildRecord> by_key;
  for (auto& k : kids) {
    auto [it, fresh] = by_key.try_emplace(k.label.key(), k);
    if (fresh) continue;
    ++merges;
    auto& into = it->second;
    if (into.description.empty()) into.description = k.description;
    if (k.label.text() < into.label.text()) into.label = k.label;
    for (auto& s : k.synonyms)
      if (std::find(into.synonyms.begin(), into.synonyms.end(), s) == into.synonyms.end()) into.synonyms.push_back(s);
  }
  std::vector<ChildRecord> out;
  for (auto& [key, rec] : by_key) {
    std::vector<ConceptLabel> uniq;
    for (auto& s : rec.synonyms)
      if (std::find(uniq.begin(), uniq.end(), s) == uniq.end()) uniq.push_back(s);
    rec.synonyms = std::move(uniq);
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace

Expansion expand(const ConceptLabel& root, const ExtractionConfig& cfg, Gateway& gateway, int threads) {
  cfg.validate();
  if (threads <= 0) threads = gateway.options().max_in_flight;
  Expansion out;
  out.tree.nodes.push_back({root, "", {}, std::nullopt, 0});
  std::vector<std::size_t> frontier{0};
  int budget = cfg.frontier_budget;

  for (int depth = 0; depth < cfg.max_depth && !frontier.empty() && budget > 0; ++depth) {
    std::sort(frontier.begin(), frontier.end(), [&](std::size_t a, std::size_t b) {
      const auto& ka = out.tree.nodes[a].label.key();
      const auto& kb = out.tree.nodes[b].label.key();
      return ka != kb ? ka < kb : a < b;
    });
    if (static_cast<int>(frontier.size()) > budget) frontier.resize(static_cast<std::size_t>(budget));
    budget -= static_cast<int>(frontier.size());

    std::vector<Attempt> attempts(frontier.size());
    const auto n = static_cast<std::ptrdiff_t>(frontier.size());
#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (std::ptrdiff_t i = 0; i < n; ++i) attempts[i] = fetch_children(out.tree.nodes[frontier[i]].label, cfg, gateway);

    std::vector<std::size_t> next;
    for (std::size_t i = 0; i < frontier.size(); ++i) {
      const auto parent = frontier[i];
      auto& a = attempts[i];
      out.tally.parse_retries += a.retries;
      if (!a.reply) {
        ++(a.gateway_failed ? out.tally.gateway_failures : out.tally.unexpandable);
        continue;
      }
      ++out.tally.expanded;
      if (out.tree.nodes[parent].description.empty()) out.tree.nodes[parent].description = a.reply->description;
      for (auto& child : merge_siblings(std::move(a.reply->children), out.tally.sibling_merges)) {
        if (out.tree.ancestor_path_contains(parent, child.label.key())) {
          ++out.tally.cycle_drops;
          continue;
        }
        out.tree.nodes.push_back(
            {std::move(child.label), std::move(child.description), std::move(child.synonyms), parent, depth + 1});
        next.push_back(out.tree.nodes.size() - 1);
      }
    }
    frontier = std::move(next);
  }
  return out;
}

nlohmann::ordered_json tree_to_json(const OntologyTree& tree) {
  nlohmann::ordered_json j;
  j["root"] = tree.nodes.empty() ? "" : tree.root().label.text();
  auto nodes = nlohmann::ordered_json::array();
  for (const auto& n : tree.nodes) {
    nlohmann::ordered_json e;
    e["label"] = n.label.text();
    e["description"] = n.description;
    std::vector<std::string> syns;
    for (const auto& s : n.synonyms) syns.push_back(s.text());
    e["synonyms"] = syns;
    e["parent"] = n.parent ? nlohmann::ordered_json(*n.parent) : nlohmann::ordered_json(nullptr);
    e["depth"] = n.depth;
    nodes.push_back(std::move(e));
  }
  j["nodes"] = std::move(nodes);
  return j;
}

OntologyTree tree_from_json(const json& j) {
  try {
    OntologyTree tree;
    for (const auto& e : j.at("nodes")) {
      TreeNode n;
      n.label = ConceptLabel::normalize(e.at("label").get<std::string>());
      n.description = e.value("description", "");
      for (const auto& s : e.at("synonyms")) n.synonyms.push_back(ConceptLabel::normalize(s.get<std::string>()));
      if (!e.at("parent").is_null()) n.parent = e.at("parent").get<std::size_t>();
      n.depth = e.at("depth").get<int>();
      tree.nodes.push_back(std::move(n));
    }
    if (auto v = tree.violation()) throw Error(ErrorCode::SchemaMismatch, *v);
    return tree;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaMismatch, std::string("tree file: ") + e.what());
  }
}

std::string file_key(const ConceptLabel& label) {
  std::string out;
  for (char c : label.key()) out += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
  return out;
}

}  // namespace evontree
