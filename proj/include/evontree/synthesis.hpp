#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "evontree/gateway.hpp"
#include "evontree/rules.hpp"

namespace evontree {

enum class Strategy { Explicit, Implicit };
enum class CorpusMode { Explicit, Implicit, Mix };

std::string_view to_string(Strategy s);
std::string_view to_string(CorpusMode m);
CorpusMode corpus_mode_from_string(const std::string& s);  // throws Error(ConfigInvalid)

struct TrainingExample {
  std::string instruction;
  std::string output;
  Strategy strategy = Strategy::Explicit;
  DerivationChain chain;  // chain.conclusion is the gap triple
  int template_id = 0;    // 0 explicit, 1 functions, 2 subtypes
  bool hint_included = false;
};

struct ImplicitInstruction {
  std::string instruction;  // with the hint
  std::string bare;         // without the hint
  int template_id;
};

// Template 1 for A, C, D and template 2 for A, C; all hinted with the chain.
std::vector<ImplicitInstruction> implicit_instructions(const DerivationChain& chain);
TrainingExample explicit_pair(const DerivationChain& chain);
std::string hint_sentence(const DerivationChain& chain);

struct SynthesisConfig {
  CorpusMode mode = CorpusMode::Mix;
  bool strip_hint = false;
  double temperature = 0.7;
  int max_tokens = 512;
  int empty_retries = 2;

  void validate() const;
};

struct SynthesisTally {
  std::size_t attempted = 0;       // implicit instructions sent for distillation
  std::size_t dropped_empty = 0;
  std::size_t dropped_gateway = 0;
  std::size_t explicit_pairs = 0;
};

// Returns the distilled reply, or nothing when the example must be dropped.
// Empty replies are retried (cache bypass); gateway errors drop immediately.
std::optional<std::string> distill(const std::string& prompt, const SynthesisConfig& cfg, Gateway& gateway,
                                   SynthesisTally& tally);

struct Corpus {
  std::vector<TrainingExample> examples;  // sorted
  SynthesisTally tally;
};

// Sorted by (strategy, gap, template_id, chain, instruction).
Corpus build_corpus(const std::vector<DerivationChain>& chains, const SynthesisConfig& cfg, Gateway& gateway,
                    int threads = 0);

std::string format_corpus_line(const TrainingExample& ex);
std::string format_corpus(const std::vector<TrainingExample>& examples);
// Throws Error(SchemaMismatch) with the offending field named.
TrainingExample parse_corpus_line(std::string_view line);
void validate_corpus_line(std::string_view line);

}  // namespace evontree
