#include <doctest.h>

#include <random>

#include "evontree/error.hpp"
#include "evontree/ontology.hpp"
#include "evontree/triple_io.hpp"
#include "support.hpp"

using namespace evontree;
using evontree::test::sub;
using evontree::test::syn;

TEST_CASE("labels trim, collapse whitespace and fold case for the key") {
  auto l = ConceptLabel::normalize("  Muscle \t  Cell\n");
  CHECK(l.text() == "Muscle Cell");
  CHECK(l.key() == "muscle cell");
  CHECK(l == ConceptLabel::normalize("MUSCLE CELL"));
  CHECK(fold_key("Muscle  CELL") == "muscle cell");
  CHECK_THROWS_AS(ConceptLabel::normalize(" \t\n"), Error);
  try {
    (void)ConceptLabel::normalize("");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyLabel);
  }
}

TEST_CASE("triples reject self loops and canonicalize synonym orientation") {
  CHECK_FALSE(Triple::make("Cell", Relation::SubclassOf, "cell").has_value());
  CHECK_FALSE(Triple::make("Cell", Relation::SynonymOf, " CELL ").has_value());
  auto a = *Triple::make("Myocyte", Relation::SynonymOf, "Muscle Cell");
  CHECK(a.subject.text() == "Muscle Cell");
  CHECK(a.object.text() == "Myocyte");
  CHECK(a == *Triple::make("Muscle Cell", Relation::SynonymOf, "Myocyte"));
  auto s = *Triple::make("Myocyte", Relation::SubclassOf, "Cell");
  CHECK(s.subject.text() == "Myocyte");
  CHECK(relation_from_string(to_string(Relation::SynonymOf)) == Relation::SynonymOf);
  CHECK(triple_class_from_string(to_string(TripleClass::Extrapolated)) == TripleClass::Extrapolated);
  CHECK_THROWS_AS(relation_from_string("PartOf"), Error);
}

TEST_CASE("triple order is relation, subject, object") {
  std::set<Triple> s{syn("a", "b"), sub("b", "a"), sub("a", "c"), sub("a", "b")};
  std::vector<Triple> v(s.begin(), s.end());
  CHECK(v[0] == sub("a", "b"));
  CHECK(v[1] == sub("a", "c"));
  CHECK(v[2] == sub("b", "a"));
  CHECK(v[3] == syn("a", "b"));
}

namespace {

OntologyTree random_tree(std::mt19937_64& rng, int n) {
  OntologyTree t;
  t.nodes.push_back({ConceptLabel::normalize("root"), "", {}, std::nullopt, 0});
  std::uniform_int_distribution<int> label(0, 30);
  for (int i = 1; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> parent(0, t.nodes.size() - 1);
    const auto p = parent(rng);
    TreeNode node{ConceptLabel::normalize("n" + std::to_string(label(rng))), "", {}, p, t.nodes[p].depth + 1};
    for (int k = label(rng) % 3; k > 0; --k) node.synonyms.push_back(ConceptLabel::normalize("n" + std::to_string(label(rng))));
    t.nodes.push_back(std::move(node));
  }
  return t;
}

}  // namespace

TEST_CASE("tree flattening matches edge enumeration") {
  std::mt19937_64 rng(11);
  for (int round = 0; round < 200; ++round) {
    const auto tree = random_tree(rng, 2 + round % 25);
    std::set<Triple> expected;
    std::size_t skipped = 0;
    for (const auto& n : tree.nodes) {
      if (n.parent) {
        const auto& p = tree.nodes[*n.parent].label;
        if (n.label.key() == p.key()) ++skipped;
        else expected.insert(sub(n.label.text(), p.text()));
      }
      for (const auto& s : n.synonyms) {
        if (n.label.key() == s.key()) ++skipped;
        else expected.insert(syn(n.label.text(), s.text()));
      }
    }
    const auto got = tree_to_triples(tree);
    CHECK(got.triples == expected);
    CHECK(got.skipped == skipped);
  }
}

TEST_CASE("tree invariants are checked") {
  OntologyTree t;
  t.nodes.push_back({ConceptLabel::normalize("Cell"), "", {}, std::nullopt, 0});
  t.nodes.push_back({ConceptLabel::normalize("Muscle Cell"), "", {}, 0, 1});
  CHECK_FALSE(t.violation().has_value());
  CHECK(t.height() == 1);
  t.nodes.push_back({ConceptLabel::normalize("cell"), "", {}, 1, 2});
  CHECK(t.violation().has_value());
  t.nodes.back() = {ConceptLabel::normalize("Myocyte"), "", {}, 1, 3};
  CHECK(t.violation().has_value());
  t.nodes.back() = {ConceptLabel::normalize("Myocyte"), "", {}, 1, 2};
  CHECK_FALSE(t.violation().has_value());
  CHECK(t.ancestor_path_contains(2, "cell"));
  CHECK_FALSE(t.ancestor_path_contains(1, "myocyte"));
}

TEST_CASE("store deduplicates by key and indexes both synonym orientations") {
  TripleStore s;
  CHECK(s.insert(sub("Myocyte", "Cell")));
  CHECK_FALSE(s.insert(sub("myocyte", "CELL")));
  CHECK(s.size() == 1);
  CHECK(s.triples().begin()->subject.text() == "Myocyte");
  s.insert(syn("Myocyte", "Muscle Cell"));
  s.insert(sub("Muscle Cell", "Cell"));
  CHECK(s.parents("myocyte") == std::set<std::string>{"cell"});
  CHECK(s.children("cell") == std::set<std::string>{"muscle cell", "myocyte"});
  CHECK(s.synonyms("myocyte") == std::set<std::string>{"muscle cell"});
  CHECK(s.synonyms("muscle cell") == std::set<std::string>{"myocyte"});
  CHECK(s.parents("nothing").empty());
  CHECK(s.of_relation(Relation::SynonymOf).size() == 1);
  CHECK(s.label("cell").text() == "CELL");
}

TEST_CASE("store keeps the smallest display label regardless of insertion order") {
  TripleStore a, b;
  a.insert(sub("myocyte", "Cell"));
  a.insert(sub("Myocyte", "Cell"));
  b.insert(sub("Myocyte", "Cell"));
  b.insert(sub("myocyte", "Cell"));
  CHECK(a.triples().begin()->subject.text() == b.triples().begin()->subject.text());
}

TEST_CASE("triple lines have a fixed byte layout and round-trip") {
  TripleRecord rec{sub("Myocyte", "Cell"), TripleClass::Confirmed, std::vector<double>{0.5, -0.25}, {}};
  CHECK(format_triple_line(rec) ==
        R"({"s":"Myocyte","r":"SubclassOf","o":"Cell","class":"Confirmed","scores":[0.5,-0.25]})");
  TripleRecord raw{syn("A", "B"), TripleClass::Raw, std::nullopt, {}};
  CHECK(format_triple_line(raw) == R"({"s":"A","r":"SynonymOf","o":"B","class":"Raw","scores":null})");

  TripleRecord ext{sub("D", "A"), TripleClass::Extrapolated, std::nullopt, {{sub("D", "C"), sub("C", "A")}}};
  const auto line = format_triple_line(ext);
  CHECK(line.find(R"("chains":[[["D","C"],["C","A"]]])") != std::string::npos);
  const auto back = parse_triple_line(line);
  CHECK(back.triple == ext.triple);
  CHECK(back.chains.size() == 1);
  CHECK(back.chains[0][1] == sub("C", "A"));

  CHECK_THROWS_AS(parse_triple_line("{\"s\":"), Error);
  CHECK_THROWS_AS(parse_triple_line(R"({"s":"a","r":"PartOf","o":"b","class":"Raw","scores":null})"), Error);
}

TEST_CASE("triple files are sorted and byte-deterministic") {
  const auto dir = evontree::test::scratch_dir("triple-io");
  std::vector<TripleRecord> recs{{syn("b", "a"), TripleClass::Raw, std::nullopt, {}},
                                 {sub("z", "y"), TripleClass::Raw, std::nullopt, {}},
                                 {sub("a", "b"), TripleClass::Raw, std::nullopt, {}}};
  write_triples(dir / "x.jsonl", recs);
  std::reverse(recs.begin(), recs.end());
  write_triples(dir / "y.jsonl", recs);
  CHECK(read_file(dir / "x.jsonl") == read_file(dir / "y.jsonl"));
  const auto back = read_triples(dir / "x.jsonl");
  REQUIRE(back.size() == 3);
  CHECK(back[0].triple == sub("a", "b"));
  CHECK(back[2].triple == syn("a", "b"));
  CHECK_THROWS_AS(read_file(dir / "missing"), Error);
}
