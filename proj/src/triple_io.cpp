#include "evontree/triple_io.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "evontree/error.hpp"

namespace evontree {

using ordered_json = nlohmann::ordered_json;

namespace {

ordered_json pair_json(const Triple& t) { return ordered_json::array({t.subject.text(), t.object.text()}); }

Triple subclass_from_pair(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_string() || !j[1].is_string())
    throw Error(ErrorCode::SchemaMismatch, "chain premise must be [subject, object]");
  auto t = Triple::make(j[0].get<std::string>(), Relation::SubclassOf, j[1].get<std::string>());
  if (!t) throw Error(ErrorCode::SchemaMismatch, "reflexive chain premise");
  return *t;
}

}  // namespace

std::string format_triple_line(const TripleRecord& rec) {
  ordered_json j;
  j["s"] = rec.triple.subject.text();
  j["r"] = std::string(to_string(rec.triple.relation));
  j["o"] = rec.triple.object.text();
  j["class"] = std::string(to_string(rec.cls));
  if (rec.scores)
    j["scores"] = *rec.scores;
  else
    j["scores"] = nullptr;
  if (!rec.chains.empty()) {
    auto chains = ordered_json::array();
    for (const auto& p : rec.chains) chains.push_back(ordered_json::array({pair_json(p[0]), pair_json(p[1])}));
    j["chains"] = std::move(chains);
  }
  return j.dump();
}

TripleRecord parse_triple_line(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ParseFailure, e.what());
  }
  if (!j.is_object() || !j.contains("s") || !j.contains("r") || !j.contains("o") || !j.contains("class"))
    throw Error(ErrorCode::SchemaMismatch, "triple line needs s, r, o, class");
  try {
    auto t = Triple::make(j["s"].get<std::string>(), relation_from_string(j["r"].get<std::string>()),
                          j["o"].get<std::string>());
    if (!t) throw Error(ErrorCode::SchemaMismatch, "reflexive triple in file");
    TripleRecord rec{*t, triple_class_from_string(j["class"].get<std::string>()), std::nullopt, {}};
    if (j.contains("scores") && !j["scores"].is_null()) rec.scores = j["scores"].get<std::vector<double>>();
    if (j.contains("chains")) {
      for (const auto& c : j["chains"]) {
        if (!c.is_array() || c.size() != 2) throw Error(ErrorCode::SchemaMismatch, "chain must have two premises");
        rec.chains.push_back({subclass_from_pair(c[0]), subclass_from_pair(c[1])});
      }
    }
    return rec;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaMismatch, e.what());
  }
}

void write_triples(const std::filesystem::path& path, std::vector<TripleRecord> records) {
  std::sort(records.begin(), records.end(),
            [](const TripleRecord& a, const TripleRecord& b) { return a.triple < b.triple; });
  std::string out;
  for (const auto& r : records) {
    out += format_triple_line(r);
    out += '\n';
  }
  atomic_write(path, out);
}

std::vector<TripleRecord> read_triples(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<TripleRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(parse_triple_line(line));
  }
  return out;
}

void atomic_write(const std::filesystem::path& path, std::string_view contents) {
  static std::atomic<unsigned long> counter{0};
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp." + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())) + "." +
         std::to_string(counter.fetch_add(1));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error(ErrorCode::Io, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace evontree
