#pragma once

#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "treepool/graph.hpp"
#include "treepool/tree.hpp"

namespace treepool {

// One dataset record: {"id": ..., "label": ..., "tree": "(S ...)"} per line.
struct Record {
  std::string id;
  std::string label;
  std::string tree;
};

inline std::vector<Record> load_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);
  std::vector<Record> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad JSON: " + e.what());
    }
    if (!j.contains("id") || !j.contains("label") || !j.contains("tree"))
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": record needs id, label and tree fields");
    out.push_back(Record{j["id"].get<std::string>(), j["label"].get<std::string>(),
                         j["tree"].get<std::string>()});
  }
  return out;
}

inline void save_jsonl(const std::string& path, const std::vector<Record>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset file: " + path);
  for (const Record& r : records) {
    nlohmann::json j;
    j["id"] = r.id;
    j["label"] = r.label;
    j["tree"] = r.tree;
    out << j.dump() << "\n";
  }
}

// Sorted distinct labels; class index = position in this list.
inline std::vector<std::string> class_list(const std::vector<Record>& records) {
  std::set<std::string> s;
  for (const Record& r : records) s.insert(r.label);
  return {s.begin(), s.end()};
}

inline int class_index(const std::vector<std::string>& classes, const std::string& label) {
  for (std::size_t i = 0; i < classes.size(); ++i)
    if (classes[i] == label) return static_cast<int>(i);
  throw std::out_of_range("unknown class label: " + label);
}

inline std::uint64_t file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file for hashing: " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
    h = fnv1a(buf, static_cast<std::size_t>(in.gcount()), h);
  return h;
}

// A parsed, featurized sample ready for the model.
struct Sample {
  std::string id;
  int label = 0;  // class index
  ConstituencyTree tree;
  TreeGraph graph;
};

inline std::vector<Sample> featurize(const std::vector<Record>& records,
                                     const std::vector<std::string>& classes,
                                     const Vocabulary& vocab, const ParseOptions& opt = {}) {
  std::vector<Sample> out;
  out.reserve(records.size());
  for (const Record& r : records) {
    Sample s;
    s.id = r.id;
    s.label = class_index(classes, r.label);
    s.tree = parse_bracketed(r.tree, opt);
    s.graph = to_graph(s.tree, vocab);
    out.push_back(std::move(s));
  }
  return out;
}

inline std::vector<ConstituencyTree> parse_all(const std::vector<Record>& records,
                                               const ParseOptions& opt = {}) {
  std::vector<ConstituencyTree> out;
  out.reserve(records.size());
  for (const Record& r : records) out.push_back(parse_bracketed(r.tree, opt));
  return out;
}

// Vocabulary <-> JSON ({"tags": {...}, "tokens": {...}}, __OOV__ included).
inline nlohmann::json vocab_to_json(const Vocabulary& v) {
  nlohmann::json j;
  j["tags"] = v.tags();
  j["tokens"] = v.tokens();
  return j;
}

inline Vocabulary vocab_from_json(const nlohmann::json& j) {
  return Vocabulary::from_maps(j.at("tags").get<std::map<std::string, int>>(),
                               j.at("tokens").get<std::map<std::string, int>>());
}

}  // namespace treepool
