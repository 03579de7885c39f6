#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "evontree/ontology.hpp"

namespace evontree {

inline constexpr std::string_view kPromptSetVersion = "v1";
inline constexpr std::string_view kTemplateSetVersion = "v1";

// True/False probe for one triple. Text holds {A} and {B} and ends in "Answer:".
struct PromptTemplate {
  Relation relation;
  int paraphrase_id;  // 1-based
  std::string_view text;

  std::string id() const;  // "SubclassOf#2"
  std::string instantiate(std::string_view a, std::string_view b) const;
};

// 5 SynonymOf paraphrases, 4 SubclassOf paraphrases; paraphrase 1 of each is
// the canonical probe, the rest reword the same True/False question.
const std::vector<PromptTemplate>& prompt_set(Relation r);
const PromptTemplate& find_template(const std::string& id);  // throws Error(MissingThreshold)
std::vector<std::string> all_template_ids();

std::string build_tree_prompt(const ConceptLabel& label);

inline constexpr std::string_view kImplicitFunctions = "Outline the primary functions of {concept}.";
inline constexpr std::string_view kImplicitSubtypes =
    "Identify and describe any subtypes of {concept}. Explain how these subtypes vary in structure and function.";
inline constexpr std::string_view kHint =
    " You can consider these relationships as follows, but please ignore them if they are unnecessary: "
    "{D} is a subclass of {C}, and {C} is a subclass of {A}.";
inline constexpr std::string_view kExplicitQuestion =
    "Is {D} a subclass of {A}? Answer and explain using intermediate concepts.";
inline constexpr std::string_view kExplicitAnswer =
    "Yes. {D} is a subclass of {C}, and {C} is a subclass of {A}. Therefore, {D} is a subclass of {A}.";

inline constexpr std::string_view kJudgeSubclass =
    "Please determine if the statement is true or false, then answer with True or False: "
    "'{A}' is a subclass of '{B}'. Answer:";
inline constexpr std::string_view kJudgeSynonym =
    "Please determine if the statement is true or false, then answer with True or False: "
    "'{A}' is an exact synonym of '{B}'. Answer:";

// Substitutes {name} placeholders. Unknown placeholders are left in place.
std::string fill(std::string_view tmpl, const std::map<std::string, std::string, std::less<>>& values);

// Inverse of fill for templates whose placeholders are separated by literal
// text. Returns the captured values by placeholder name.
std::optional<std::map<std::string, std::string, std::less<>>> match_template(std::string_view tmpl,
                                                                            std::string_view text);

}  // namespace evontree
