#include <doctest.h>

#include <random>

#include "evontree/error.hpp"
#include "evontree/rules.hpp"
#include "support.hpp"

using namespace evontree;
using test::sub;
using test::syn;

namespace {

std::set<std::pair<Triple, Premises>> as_set(const std::vector<DerivationChain>& chains) {
  std::set<std::pair<Triple, Premises>> out;
  for (const auto& c : chains) out.insert({c.conclusion, c.premises});
  return out;
}

ScoredTriple scored(std::vector<double> values) {
  ScoredTriple s{sub("D", "A"), {}, TripleClass::Extrapolated};
  for (double v : values) s.breakdowns.push_back({1.0, 1.0, v});
  return s;
}

Thresholds subclass_thresholds(double tau) {
  Thresholds th;
  for (const auto& t : prompt_set(Relation::SubclassOf)) th[t.id()] = tau;
  return th;
}

}  // namespace

TEST_CASE("a closed triangle marks both subclass edges") {
  const std::vector<Triple> v{syn("x", "y"), sub("x", "z"), sub("y", "z"), sub("x", "w")};
  TripleStore store(v.begin(), v.end());
  CHECK(select_reliable(store) == std::set<Triple>{sub("x", "z"), sub("y", "z")});
  const std::vector<Triple> no_syn{sub("x", "z"), sub("y", "z")};
  CHECK(select_reliable(TripleStore(no_syn.begin(), no_syn.end())).empty());
}

TEST_CASE("extrapolation composes one hop only") {
  const std::set<Triple> chain{sub("A", "B"), sub("B", "C"), sub("C", "D")};
  const std::vector<Triple> v(chain.begin(), chain.end());
  const auto out = extrapolate(chain, TripleStore(v.begin(), v.end()));
  std::set<Triple> conclusions;
  for (const auto& c : out) {
    CHECK(c.valid());
    conclusions.insert(c.conclusion);
  }
  CHECK(conclusions == std::set<Triple>{sub("A", "C"), sub("B", "D")});
  CHECK(extrapolate({sub("A", "B")}, TripleStore{}).empty());
  CHECK_THROWS_AS(extrapolate(chain, TripleStore{}, 0), Error);
  CHECK_THROWS_AS(extrapolate(chain, TripleStore{}, 2), Error);
  CHECK_THROWS_AS(serial::extrapolate(chain, TripleStore{}, 0), Error);
}

TEST_CASE("known, reflexive and synonym-equivalent conclusions are dropped") {
  const std::set<Triple> rel{sub("D", "C"), sub("C", "A"), sub("A", "D2")};
  const std::vector<Triple> ex{sub("D", "C"), sub("C", "A"), sub("A", "D2"), syn("D", "D2"), sub("Dee", "A"),
                               syn("Dee", "D")};
  const auto out = extrapolate(rel, TripleStore(ex.begin(), ex.end()));
  // D<A is known via Dee; C<D2 is new; A<...<D2 would be synonym-reflexive for D<D2.
  std::set<Triple> conclusions;
  for (const auto& c : out) conclusions.insert(c.conclusion);
  CHECK(conclusions == std::set<Triple>{sub("C", "D2")});
}

TEST_CASE("a conclusion may carry several chains") {
  const std::set<Triple> rel{sub("D", "C1"), sub("C1", "A"), sub("D", "C2"), sub("C2", "A")};
  const std::vector<Triple> v(rel.begin(), rel.end());
  const auto out = extrapolate(rel, TripleStore(v.begin(), v.end()));
  REQUIRE(out.size() == 2);
  CHECK(out[0].conclusion == out[1].conclusion);
  CHECK(std::is_sorted(out.begin(), out.end()));
}

TEST_CASE("rule engine equals the brute-force oracles on random stores") {
  std::mt19937_64 rng(77);
  for (int i = 0; i < 100; ++i) {
    const auto store = test::random_store(rng, 200, 12 + i % 20);
    const std::vector<Triple> all(store.triples().begin(), store.triples().end());
    const auto want_rel = test::oracle_triangles(all);
    const auto rel = select_reliable(store);
    REQUIRE(rel == want_rel);
    REQUIRE(serial::select_reliable(store) == want_rel);
    for (const auto& t : rel) REQUIRE(store.contains(t));

    // Use the reliable set padded with random subclass edges so chains are plentiful.
    std::set<Triple> reliable = rel;
    for (const auto& t : all)
      if (t.relation == Relation::SubclassOf && rng() % 3 == 0) reliable.insert(t);
    std::vector<Triple> existing = all;
    if (i % 2) existing.resize(existing.size() / 2);
    const TripleStore ex(existing.begin(), existing.end());
    const auto want = test::oracle_compose(reliable, existing);
    REQUIRE(as_set(extrapolate(reliable, ex)) == want);
    REQUIRE(extrapolate(reliable, ex) == serial::extrapolate(reliable, ex));
    for (const auto& c : extrapolate(reliable, ex)) {
      REQUIRE(!ex.contains(c.conclusion));
      REQUIRE(c.conclusion.subject.key() != c.conclusion.object.key());
    }
  }
}

TEST_CASE("synonym orientation does not change the reliable set") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 30; ++i) {
    const auto store = test::random_store(rng, 120, 10);
    std::vector<Triple> flipped;
    for (const auto& t : store.triples())
      flipped.push_back(t.relation == Relation::SynonymOf ? syn(t.object.text(), t.subject.text()) : t);
    CHECK(select_reliable(store) == select_reliable(TripleStore(flipped.begin(), flipped.end())));
  }
}

TEST_CASE("gap modes") {
  const auto th = subclass_thresholds(0.5);
  CHECK(is_gap(scored({0.1, 0.2, 0.3, 0.4}), th));
  CHECK_FALSE(is_gap(scored({0.1, 0.2, 0.3, 0.6}), th));
  CHECK_FALSE(is_gap(scored({0.1, 0.2, 0.3, 0.5}), th));
  CHECK(is_gap(scored({0.1, 0.2, 0.3, 0.6}), th, GapMode::MeanBelow));
  CHECK_FALSE(is_gap(scored({0.4, 0.9, 0.9, 0.9}), th, GapMode::MeanBelow));
  CHECK(is_gap(scored({0.4, 0.9, 0.9, 0.9}), th, GapMode::AnyBelow));
  CHECK_FALSE(is_gap(scored({0.5, 0.9, 0.9, 0.9}), th, GapMode::AnyBelow));
  CHECK_THROWS_AS(is_gap(scored({0.1, 0.2, 0.3, 0.4}), Thresholds{}), Error);
  CHECK(select_gaps({}, th).empty());
  CHECK(gap_mode_from_string("mean_below") == GapMode::MeanBelow);
  CHECK_THROWS_AS(gap_mode_from_string("below"), Error);
}

TEST_CASE("gaps and confirmations are disjoint and shifting is monotone") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const auto s = scored({u(rng), u(rng), u(rng), u(rng)});
    const auto th = subclass_thresholds(u(rng));
    REQUIRE_FALSE((is_gap(s, th) && is_confirmed(s, th)));
    if (is_gap(s, th)) REQUIRE(is_gap(s, shift(th, 0.1)));
    if (!is_gap(s, th)) REQUIRE_FALSE(is_gap(s, shift(th, -0.1)));
  }
  const auto th = shift(subclass_thresholds(0.5), 0.25);
  for (const auto& [id, tau] : th) CHECK(tau == 0.75);
}
