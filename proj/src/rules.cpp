#include "evontree/rules.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdint>
#include <iterator>
#include <map>
#include <numeric>
#include <string>
#include <unordered_map>
#include <unordered_set>

#include "evontree/error.hpp"

namespace evontree {

bool DerivationChain::valid() const {
  const auto& [first, second] = premises;
  return first.relation == Relation::SubclassOf && second.relation == Relation::SubclassOf &&
         conclusion.relation == Relation::SubclassOf && first.object == second.subject &&
         conclusion.subject == first.subject && conclusion.object == second.object;
}

namespace {

void require_hops(int hops) {
  if (hops < 1) throw Error(ErrorCode::InvalidHops, "hops must be >= 1");
  if (hops > 1) throw Error(ErrorCode::InvalidHops, "only one-hop extrapolation is implemented");
}

void require_subclass(const std::set<Triple>& reliable) {
  for (const auto& t : reliable)
    if (t.relation != Relation::SubclassOf)
      throw Error(ErrorCode::InvalidParams, "reliable set may only hold SubclassOf triples");
}

const Triple& stored(const TripleStore& store, const std::string& s, const std::string& o) {
  auto probe = Triple::make(store.label(s), Relation::SubclassOf, store.label(o));
  return *store.triples().find(*probe);
}

// Dense ids for concept keys.
class Interner {
 public:
  int id(const std::string& key) {
    auto [it, fresh] = ids_.try_emplace(key, static_cast<int>(ids_.size()));
    return it->second;
  }
  int size() const { return static_cast<int>(ids_.size()); }

 private:
  std::unordered_map<std::string, int> ids_;
};

class UnionFind {
 public:
  explicit UnionFind(int n) : parent_(static_cast<std::size_t>(n)) { std::iota(parent_.begin(), parent_.end(), 0); }
  int find(int x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<int> parent_;
};

std::uint64_t pack(int a, int b) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
}

}  // namespace

std::set<Triple> select_reliable(const TripleStore& confirmed) {
  const auto synonyms = confirmed.of_relation(Relation::SynonymOf);
  const auto n = static_cast<std::ptrdiff_t>(synonyms.size());
  std::vector<std::vector<Triple>> found(static_cast<std::size_t>(omp_get_max_threads()));

#pragma omp parallel
  {
    auto& local = found[static_cast<std::size_t>(omp_get_thread_num())];
    std::vector<std::string> shared;
#pragma omp for schedule(dynamic, 16)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const auto& x = synonyms[i].subject.key();
      const auto& y = synonyms[i].object.key();
      const auto& px = confirmed.parents(x);
      const auto& py = confirmed.parents(y);
      shared.clear();
      std::set_intersection(px.begin(), px.end(), py.begin(), py.end(), std::back_inserter(shared));
      for (const auto& z : shared) {
        local.push_back(stored(confirmed, x, z));
        local.push_back(stored(confirmed, y, z));
      }
    }
  }

  std::set<Triple> out;
  for (auto& v : found) out.insert(v.begin(), v.end());
  return out;
}

std::vector<DerivationChain> extrapolate(const std::set<Triple>& reliable, const TripleStore& existing, int hops) {
  require_hops(hops);
  require_subclass(reliable);

  Interner ids;
  const std::vector<Triple> rel(reliable.begin(), reliable.end());
  std::vector<int> subj(rel.size()), obj(rel.size());
  for (std::size_t i = 0; i < rel.size(); ++i) {
    subj[i] = ids.id(rel[i].subject.key());
    obj[i] = ids.id(rel[i].object.key());
  }
  for (const auto& t : existing.triples()) {
    ids.id(t.subject.key());
    ids.id(t.object.key());
  }

  UnionFind classes(ids.size());
  for (const auto& t : existing.triples())
    if (t.relation == Relation::SynonymOf) classes.unite(ids.id(t.subject.key()), ids.id(t.object.key()));

  std::unordered_set<std::uint64_t> known;
  for (const auto& t : existing.triples())
    if (t.relation == Relation::SubclassOf)
      known.insert(pack(classes.find(ids.id(t.subject.key())), classes.find(ids.id(t.object.key()))));

  std::vector<int> cls(static_cast<std::size_t>(ids.size()));
  for (int i = 0; i < ids.size(); ++i) cls[i] = classes.find(i);

  std::vector<std::vector<std::size_t>> by_subject(static_cast<std::size_t>(ids.size()));
  for (std::size_t i = 0; i < rel.size(); ++i) by_subject[subj[i]].push_back(i);

  const auto n = static_cast<std::ptrdiff_t>(rel.size());
  std::vector<std::vector<DerivationChain>> found(static_cast<std::size_t>(omp_get_max_threads()));
#pragma omp parallel
  {
    auto& local = found[static_cast<std::size_t>(omp_get_thread_num())];
#pragma omp for schedule(dynamic, 16)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const int d = subj[i];
      for (std::size_t j : by_subject[obj[i]]) {
        const int a = obj[j];
        if (cls[d] == cls[a]) continue;
        if (known.count(pack(cls[d], cls[a]))) continue;
        auto conclusion = Triple::make(rel[i].subject, Relation::SubclassOf, rel[j].object);
        local.push_back({*conclusion, {rel[i], rel[j]}});
      }
    }
  }

  std::vector<DerivationChain> out;
  for (auto& v : found) out.insert(out.end(), v.begin(), v.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

namespace serial {

std::set<Triple> select_reliable(const TripleStore& confirmed) {
  // Group by shared parent: any two children of z that are synonyms close a triangle.
  std::map<std::string, std::vector<std::string>> children;
  for (const auto& t : confirmed.triples())
    if (t.relation == Relation::SubclassOf) children[t.object.key()].push_back(t.subject.key());

  std::set<Triple> out;
  for (const auto& [z, kids] : children) {
    for (std::size_t i = 0; i < kids.size(); ++i) {
      for (std::size_t k = i + 1; k < kids.size(); ++k) {
        auto probe = Triple::make(confirmed.label(kids[i]), Relation::SynonymOf, confirmed.label(kids[k]));
        if (!probe || !confirmed.contains(*probe)) continue;
        out.insert(stored(confirmed, kids[i], z));
        out.insert(stored(confirmed, kids[k], z));
      }
    }
  }
  return out;
}

std::vector<DerivationChain> extrapolate(const std::set<Triple>& reliable, const TripleStore& existing, int hops) {
  require_hops(hops);
  require_subclass(reliable);

  // Synonym class representative: smallest key reachable over SynonymOf edges.
  std::map<std::string, std::string> rep;
  auto find_rep = [&](const std::string& key) -> std::string {
    std::set<std::string> seen{key};
    std::vector<std::string> todo{key};
    while (!todo.empty()) {
      auto cur = todo.back();
      todo.pop_back();
      for (const auto& s : existing.synonyms(cur))
        if (seen.insert(s).second) todo.push_back(s);
    }
    return *seen.begin();
  };
  auto class_of = [&](const std::string& key) -> const std::string& {
    auto it = rep.find(key);
    if (it == rep.end()) it = rep.emplace(key, find_rep(key)).first;
    return it->second;
  };

  std::set<std::pair<std::string, std::string>> known;
  for (const auto& t : existing.triples())
    if (t.relation == Relation::SubclassOf) known.emplace(class_of(t.subject.key()), class_of(t.object.key()));

  std::vector<DerivationChain> out;
  for (const auto& first : reliable) {
    for (const auto& second : reliable) {
      if (first.object != second.subject) continue;
      const auto& d = class_of(first.subject.key());
      const auto& a = class_of(second.object.key());
      if (d == a || known.count({d, a})) continue;
      out.push_back({*Triple::make(first.subject, Relation::SubclassOf, second.object), {first, second}});
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace serial

GapMode gap_mode_from_string(const std::string& s) {
  if (s == "all_below") return GapMode::AllBelow;
  if (s == "mean_below") return GapMode::MeanBelow;
  if (s == "any_below") return GapMode::AnyBelow;
  throw Error(ErrorCode::ConfigInvalid, "gap.mode must be all_below, mean_below or any_below");
}

std::string_view to_string(GapMode m) {
  switch (m) {
    case GapMode::AllBelow: return "all_below";
    case GapMode::MeanBelow: return "mean_below";
    case GapMode::AnyBelow: return "any_below";
  }
  return "all_below";
}

bool is_gap(const ScoredTriple& scored, const Thresholds& thresholds, GapMode mode) {
  const auto& templates = prompt_set(scored.triple.relation);
  if (scored.breakdowns.size() != templates.size())
    throw Error(ErrorCode::InvalidParams, "breakdown count does not match the prompt set");
  std::size_t below = 0;
  double margin = 0.0;
  for (std::size_t i = 0; i < templates.size(); ++i) {
    auto it = thresholds.find(templates[i].id());
    if (it == thresholds.end()) throw Error(ErrorCode::MissingThreshold, "no threshold for " + templates[i].id());
    const double v = scored.breakdowns[i].confirm_value;
    if (v < it->second) ++below;
    margin += v - it->second;
  }
  switch (mode) {
    case GapMode::AllBelow: return below == templates.size();
    case GapMode::AnyBelow: return below > 0;
    case GapMode::MeanBelow: return margin / static_cast<double>(templates.size()) < 0.0;
  }
  return false;
}

std::vector<ScoredTriple> select_gaps(const std::vector<ScoredTriple>& candidates, const Thresholds& thresholds,
                                      GapMode mode) {
  std::vector<ScoredTriple> out;
  for (const auto& c : candidates) {
    if (is_gap(c, thresholds, mode)) {
      out.push_back(c);
      out.back().cls = TripleClass::Gap;
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.triple < b.triple; });
  return out;
}

Thresholds shift(const Thresholds& thresholds, double offset) {
  Thresholds out = thresholds;
  for (auto& [id, tau] : out) tau += offset;
  return out;
}

}  // namespace evontree
