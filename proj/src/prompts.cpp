#include "evontree/prompts.hpp"

#include <json.hpp>

#include "evontree/error.hpp"

namespace evontree {

namespace {

constexpr std::string_view kSynonymTemplates[] = {
    "Please determine if the statement is true or false, then answer with True or False: "
    "'{A}' is an exact synonym of '{B}'. Answer:",
    "Decide whether the following statement is true or false, and reply with True or False: "
    "'{A}' and '{B}' are two names for exactly the same concept. Answer:",
    "Is the following statement true or false? Respond with True or False: "
    "'{A}' can be used interchangeably with '{B}' without changing the meaning. Answer:",
    "Judge the statement below as true or false, answering with True or False: "
    "'{A}' means exactly the same thing as '{B}'. Answer:",
    "Determine whether this statement is true or false, and answer True or False: "
    "'{B}' is another name for '{A}'. Answer:",
};

constexpr std::string_view kSubclassTemplates[] = {
    "Please determine if the statement is true or false, then answer with True or False: "
    "'{A}' is a subclass of '{B}'. Answer:",
    "Decide whether the following statement is true or false, and reply with True or False: "
    "every '{A}' is a kind of '{B}'. Answer:",
    "Is the following statement true or false? Respond with True or False: "
    "'{A}' is a more specific type of '{B}'. Answer:",
    "Judge the statement below as true or false, answering with True or False: "
    "'{B}' is a broader category that includes '{A}'. Answer:",
};

std::vector<PromptTemplate> build_set(Relation r) {
  std::vector<PromptTemplate> out;
  int id = 1;
  if (r == Relation::SynonymOf) {
    for (auto t : kSynonymTemplates) out.push_back({r, id++, t});
  } else {
    for (auto t : kSubclassTemplates) out.push_back({r, id++, t});
  }
  return out;
}

struct Piece {
  bool placeholder;
  std::string_view text;
};

std::vector<Piece> split_template(std::string_view tmpl) {
  std::vector<Piece> pieces;
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    auto open = tmpl.find('{', pos);
    if (open == std::string_view::npos) break;
    auto close = tmpl.find('}', open);
    if (close == std::string_view::npos) break;
    if (open > pos) pieces.push_back({false, tmpl.substr(pos, open - pos)});
    pieces.push_back({true, tmpl.substr(open + 1, close - open - 1)});
    pos = close + 1;
  }
  if (pos < tmpl.size()) pieces.push_back({false, tmpl.substr(pos)});
  return pieces;
}

}  // namespace

std::string PromptTemplate::id() const { return std::string(to_string(relation)) + "#" + std::to_string(paraphrase_id); }

std::string PromptTemplate::instantiate(std::string_view a, std::string_view b) const {
  return fill(text, {{"A", std::string(a)}, {"B", std::string(b)}});
}

const std::vector<PromptTemplate>& prompt_set(Relation r) {
  static const auto kSyn = build_set(Relation::SynonymOf);
  static const auto kSub = build_set(Relation::SubclassOf);
  return r == Relation::SynonymOf ? kSyn : kSub;
}

const PromptTemplate& find_template(const std::string& id) {
  for (auto r : {Relation::SubclassOf, Relation::SynonymOf}) {
    for (const auto& t : prompt_set(r))
      if (t.id() == id) return t;
  }
  throw Error(ErrorCode::MissingThreshold, "no prompt template '" + id + "'");
}

std::vector<std::string> all_template_ids() {
  std::vector<std::string> out;
  for (auto r : {Relation::SubclassOf, Relation::SynonymOf})
    for (const auto& t : prompt_set(r)) out.push_back(t.id());
  return out;
}

std::string build_tree_prompt(const ConceptLabel& label) {
  // The key position is a JSON string literal, so the label is escaped there.
  const std::string key = nlohmann::json(label.text()).dump();
  std::string out;
  out += "As a medical expert, please generate strict subclasses of ";
  out += label.text();
  out += " and their synonyms.\n";
  out += "Output a JSON tree like below:\n";
  out += "{" + key + ": {\n";
  out +=
      "    \"description\": \"\",\n"
      "    \"subclasses\": [{\n"
      "        \"name\": \"\",\n"
      "        \"description\": \"\",\n"
      "        \"synonyms\": [\"\", \"\"]\n"
      "}]}}";
  return out;
}

std::string fill(std::string_view tmpl, const std::map<std::string, std::string, std::less<>>& values) {
  std::string out;
  out.reserve(tmpl.size() + 64);
  for (const auto& piece : split_template(tmpl)) {
    if (!piece.placeholder) {
      out += piece.text;
      continue;
    }
    auto it = values.find(piece.text);
    if (it == values.end()) {
      out += '{';
      out += piece.text;
      out += '}';
    } else {
      out += it->second;
    }
  }
  return out;
}

std::optional<std::map<std::string, std::string, std::less<>>> match_template(std::string_view tmpl,
                                                                            std::string_view text) {
  const auto pieces = split_template(tmpl);
  std::map<std::string, std::string, std::less<>> captures;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    const auto& p = pieces[i];
    if (!p.placeholder) {
      if (text.substr(pos, p.text.size()) != p.text) return std::nullopt;
      pos += p.text.size();
      continue;
    }
    std::size_t end = text.size();
    if (i + 1 < pieces.size()) {
      const auto next = pieces[i + 1].text;
      if (i + 2 == pieces.size()) {
        // Final literal anchors to the end of the text.
        if (text.size() < pos + next.size() || text.substr(text.size() - next.size()) != next) return std::nullopt;
        end = text.size() - next.size();
      } else {
        end = text.find(next, pos);
        if (end == std::string_view::npos) return std::nullopt;
      }
    }
    if (end <= pos) return std::nullopt;
    std::string value(text.substr(pos, end - pos));
    auto [it, fresh] = captures.emplace(std::string(p.text), value);
    if (!fresh && it->second != value) return std::nullopt;
    pos = end;
  }
  if (pos != text.size()) return std::nullopt;
  return captures;
}

}  // namespace evontree
