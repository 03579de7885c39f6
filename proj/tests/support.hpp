#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "evontree/calibration.hpp"
#include "evontree/ontology.hpp"
#include "evontree/rules.hpp"

namespace evontree::test {

inline Triple sub(std::string_view s, std::string_view o) { return *Triple::make(s, Relation::SubclassOf, o); }
inline Triple syn(std::string_view s, std::string_view o) { return *Triple::make(s, Relation::SynonymOf, o); }

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("evontree-test-" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

// Random store over a small vocabulary so triangles and chains actually occur.
inline TripleStore random_store(std::mt19937_64& rng, std::size_t max_triples, int vocab) {
  std::uniform_int_distribution<int> pick(0, vocab - 1);
  std::uniform_int_distribution<std::size_t> size(1, max_triples);
  std::bernoulli_distribution synonym(0.3);
  // Irreflexive subclass pairs plus unordered synonym pairs bound the store size.
  const auto v = static_cast<std::size_t>(vocab);
  const auto n = std::min(size(rng), v * (v - 1) + v * (v - 1) / 2);
  TripleStore store;
  while (store.size() < n) {
    const auto a = "c" + std::to_string(pick(rng));
    const auto b = "c" + std::to_string(pick(rng));
    if (auto t = Triple::make(a, synonym(rng) ? Relation::SynonymOf : Relation::SubclassOf, b)) store.insert(*t);
  }
  return store;
}

// ---------------------------------------------------------------------------
// Brute-force references.

// Every (x syn y, x sub z, y sub z) triple of triples.
inline std::set<Triple> oracle_triangles(const std::vector<Triple>& all) {
  std::set<Triple> out;
  for (const auto& s : all) {
    if (s.relation != Relation::SynonymOf) continue;
    for (const auto& a : all) {
      if (a.relation != Relation::SubclassOf) continue;
      for (const auto& b : all) {
        if (b.relation != Relation::SubclassOf) continue;
        if (a.subject == s.subject && b.subject == s.object && a.object == b.object) {
          out.insert(a);
          out.insert(b);
        }
      }
    }
  }
  return out;
}

// Synonym classes by repeated relaxation to a fixed point: label -> smallest member key.
inline std::map<std::string, std::string> oracle_classes(const std::vector<Triple>& all) {
  std::map<std::string, std::string> cls;
  for (const auto& t : all) {
    cls[t.subject.key()] = t.subject.key();
    cls[t.object.key()] = t.object.key();
  }
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& t : all) {
      if (t.relation != Relation::SynonymOf) continue;
      auto& a = cls[t.subject.key()];
      auto& b = cls[t.object.key()];
      const auto m = std::min(a, b);
      if (a != m || b != m) {
        a = b = m;
        changed = true;
      }
    }
  }
  return cls;
}

// Pairwise composition minus reflexive, synonym-equivalent and already known conclusions.
inline std::set<std::pair<Triple, Premises>> oracle_compose(const std::set<Triple>& reliable,
                                                          const std::vector<Triple>& existing) {
  std::vector<Triple> universe = existing;
  universe.insert(universe.end(), reliable.begin(), reliable.end());
  auto cls = oracle_classes(existing);
  auto class_of = [&](const ConceptLabel& l) {
    auto it = cls.find(l.key());
    return it == cls.end() ? l.key() : it->second;
  };
  std::set<std::pair<Triple, Premises>> out;
  for (const auto& p : reliable) {
    for (const auto& q : reliable) {
      if (p.object != q.subject) continue;
      if (class_of(p.subject) == class_of(q.object)) continue;
      bool known = false;
      for (const auto& e : existing)
        if (e.relation == Relation::SubclassOf && class_of(e.subject) == class_of(p.subject) &&
            class_of(e.object) == class_of(q.object))
          known = true;
      if (known) continue;
      out.insert({sub(p.subject.text(), q.object.text()), {p, q}});
    }
  }
  return out;
}

// Candidate x sample double loop.
inline CalibrationResult oracle_fit(const std::vector<LabeledScore>& samples, SweepSpec spec = {}) {
  std::set<double> taus{spec.lo, spec.hi};
  for (const auto& s : samples)
    if (s.score >= spec.lo && s.score <= spec.hi) taus.insert(s.score);
  std::size_t pos = 0, neg = 0;
  for (const auto& s : samples) (s.label ? pos : neg)++;
  CalibrationResult r;
  r.n_pos = pos;
  r.n_neg = neg;
  for (double tau : taus) {
    std::size_t tp = 0, fp = 0;
    for (const auto& s : samples)
      if (s.score > tau) (s.label ? tp : fp)++;
    const double tpr = static_cast<double>(tp) / static_cast<double>(pos);
    const double fpr = static_cast<double>(fp) / static_cast<double>(neg);
    r.curve.push_back({tau, tpr, fpr, tpr - fpr});
  }
  double best = -2.0;
  for (const auto& p : r.curve) {
    const bool take = spec.tie_break == TieBreak::Largest ? p.j >= best : p.j > best;
    if (take) {
      best = p.j;
      r.tau_star = p.tau;
    }
  }
  r.j_star = best;
  r.weak = best <= 0.0;
  return r;
}

// Samples on a coarse grid so ties and repeated scores are common.
inline std::vector<LabeledScore> random_samples(std::mt19937_64& rng, std::size_t max_n) {
  std::uniform_int_distribution<std::size_t> size(2, max_n);
  std::uniform_int_distribution<int> grid(-40, 40);
  std::bernoulli_distribution coin(0.5);
  const auto n = size(rng);
  std::vector<LabeledScore> out;
  for (std::size_t i = 0; i < n; ++i) {
    const double score = grid(rng) / 40.0;
    // Labels lean positive for high scores so the optimum is not trivial.
    std::bernoulli_distribution label(0.2 + 0.6 * (score + 1.0) / 2.0);
    out.push_back({score, label(rng)});
  }
  out[0].label = true;
  out[1].label = false;
  return out;
}

}  // namespace evontree::test
