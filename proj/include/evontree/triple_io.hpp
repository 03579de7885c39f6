#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "evontree/ontology.hpp"

namespace evontree {

using Premises = std::array<Triple, 2>;

// One line of a triple file:
//   {"s": ..., "r": "SubclassOf"|"SynonymOf", "o": ..., "class": ..., "scores": [..]|null}
// Extrapolated and gap files add "chains": [[[s,o],[s,o]], ...].
struct TripleRecord {
  Triple triple;
  TripleClass cls = TripleClass::Raw;
  std::optional<std::vector<double>> scores;
  std::vector<Premises> chains;
};

std::string format_triple_line(const TripleRecord& rec);
TripleRecord parse_triple_line(std::string_view line);  // throws Error(ParseFailure|SchemaMismatch)

// Sorts by (r, s, o) and writes atomically.
void write_triples(const std::filesystem::path& path, std::vector<TripleRecord> records);
std::vector<TripleRecord> read_triples(const std::filesystem::path& path);

// Write to a sibling temp file, then rename over the target.
void atomic_write(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);  // throws Error(Io)

}  // namespace evontree
