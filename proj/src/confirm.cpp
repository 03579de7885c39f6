#include "evontree/confirm.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "evontree/error.hpp"

namespace evontree {

double perplexity(std::span<const double> token_logprobs) {
  if (token_logprobs.empty()) throw Error(ErrorCode::EmptySpan, "perplexity of an empty span");
  double sum = 0.0;
  for (double lp : token_logprobs) {
    if (!(lp <= 0.0)) throw Error(ErrorCode::InvalidParams, "log-probability must be <= 0");
    sum += lp;
  }
  return std::exp(-sum / static_cast<double>(token_logprobs.size()));
}

double confirm_value(double ppl_true, double ppl_false) {
  const double diff = ppl_false - ppl_true;
  const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
  return sign / std::min(ppl_true, ppl_false);
}

std::vector<double> ScoredTriple::values() const {
  std::vector<double> out;
  out.reserve(breakdowns.size());
  for (const auto& b : breakdowns) out.push_back(b.confirm_value);
  return out;
}

double ScoredTriple::mean_value() const {
  if (breakdowns.empty()) return 0.0;
  double s = 0.0;
  for (const auto& b : breakdowns) s += b.confirm_value;
  return s / static_cast<double>(breakdowns.size());
}

ScoredTriple score_triple(const Triple& triple, Gateway& gateway) {
  ScoredTriple out{triple, {}, TripleClass::Raw};
  for (const auto& tmpl : prompt_set(triple.relation)) {
    const auto prompt = tmpl.instantiate(triple.subject.text(), triple.object.text());
    const auto t = gateway.score_completion({prompt, " True"});
    const auto f = gateway.score_completion({prompt, " False"});
    ScoreBreakdown b;
    b.ppl_true = perplexity(t.token_logprobs);
    b.ppl_false = perplexity(f.token_logprobs);
    b.confirm_value = confirm_value(b.ppl_true, b.ppl_false);
    out.breakdowns.push_back(b);
  }
  return out;
}

bool is_confirmed(const ScoredTriple& scored, const Thresholds& thresholds) {
  const auto& templates = prompt_set(scored.triple.relation);
  if (scored.breakdowns.size() != templates.size())
    throw Error(ErrorCode::InvalidParams, "breakdown count does not match the prompt set");
  bool all_above = true;
  for (std::size_t i = 0; i < templates.size(); ++i) {
    auto it = thresholds.find(templates[i].id());
    if (it == thresholds.end()) throw Error(ErrorCode::MissingThreshold, "no threshold for " + templates[i].id());
    if (!(scored.breakdowns[i].confirm_value > it->second)) all_above = false;
  }
  return all_above;
}

namespace {

struct Outcome {
  std::optional<ScoredTriple> scored;
  std::string error;
  bool transport = false;
};

Outcome score_one(const Triple& t, Gateway& gateway) {
  Outcome o;
  try {
    o.scored = score_triple(t, gateway);
  } catch (const Error& e) {
    o.error = e.what();
    o.transport = e.code() == ErrorCode::Transport;
  }
  return o;
}

ScoredBatch collect(const std::vector<Triple>& triples, std::vector<Outcome>& outcomes) {
  ScoredBatch batch;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (outcomes[i].scored) {
      batch.scored.push_back(std::move(*outcomes[i].scored));
    } else {
      batch.unscored.emplace_back(triples[i], std::move(outcomes[i].error));
      if (outcomes[i].transport) ++batch.transport_failures;
    }
  }
  return batch;
}

}  // namespace

ScoredBatch score_batch(const std::vector<Triple>& triples, Gateway& gateway, int threads) {
  if (threads <= 0) threads = gateway.options().max_in_flight;
  std::vector<Outcome> outcomes(triples.size());
  const auto n = static_cast<std::ptrdiff_t>(triples.size());
#pragma omp parallel for schedule(dynamic, 4) num_threads(threads)
  for (std::ptrdiff_t i = 0; i < n; ++i) outcomes[i] = score_one(triples[i], gateway);
  return collect(triples, outcomes);
}

namespace serial {
ScoredBatch score_batch(const std::vector<Triple>& triples, Gateway& gateway) {
  std::vector<Outcome> outcomes;
  outcomes.reserve(triples.size());
  for (const auto& t : triples) outcomes.push_back(score_one(t, gateway));
  return collect(triples, outcomes);
}
}  // namespace serial

}  // namespace evontree
