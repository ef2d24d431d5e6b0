#include <fstream>
#include <json.hpp>
#include <sstream>

#include "mvd/pipeline.hpp"

namespace mvd::pipeline {
namespace {

using nlohmann::json;

int label_to_int(Label l) {
  switch (l) {
    case Label::Vulnerable: return 1;
    case Label::NonVulnerable: return 0;
    case Label::Unlabeled: return -1;
  }
  return -1;
}

Label label_from_int(int v) {
  if (v == 1) return Label::Vulnerable;
  if (v == 0) return Label::NonVulnerable;
  if (v == -1) return Label::Unlabeled;
  throw std::runtime_error("graph line: label must be 1, 0 or -1");
}

void require_fields(const json& obj, const std::set<std::string>& required,
                    const std::set<std::string>& optional, const char* what) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!required.count(it.key()) && !optional.count(it.key())) {
      throw std::runtime_error(std::string(what) + ": unknown field '" + it.key() + "'");
    }
  }
  for (const auto& key : required) {
    if (!obj.contains(key)) {
      throw std::runtime_error(std::string(what) + ": missing field '" + key + "'");
    }
  }
}

}  // namespace

DatasetEntry make_entry(const slicer::SliceGraph& graph) {
  DatasetEntry e;
  e.graph = graph;
  e.node_tokens.reserve(graph.nodes.size());
  for (const auto& n : graph.nodes) e.node_tokens.push_back(embedder::statement_tokens(n));
  return e;
}

void write_jsonl(const Dataset& data, std::ostream& out) {
  for (const auto& entry : data.entries) {
    json obj;
    obj["origin"] = entry.graph.origin;
    json nodes = json::array();
    for (size_t i = 0; i < entry.graph.nodes.size(); ++i) {
      const StatementIR& s = entry.graph.nodes[i];
      json n;
      n["id"] = s.id;
      n["line"] = s.line;
      n["file"] = s.file;
      n["text"] = s.text;
      n["label"] = label_to_int(s.label);
      n["tokens"] = entry.node_tokens[i];
      nodes.push_back(std::move(n));
    }
    obj["nodes"] = std::move(nodes);
    json edges = json::array();
    for (const auto& e : entry.graph.edges) {
      json je;
      je["src"] = e.src;
      je["dst"] = e.dst;
      je["kind"] = to_string(e.kind);
      if (e.kind == EdgeKind::Data) je["var"] = e.var;
      edges.push_back(std::move(je));
    }
    obj["edges"] = std::move(edges);
    out << obj.dump() << '\n';
  }
}

void write_jsonl_file(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  write_jsonl(data, out);
}

Dataset read_jsonl(std::istream& in) {
  Dataset data;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw std::runtime_error("graphs line " + std::to_string(lineno) + ": " + e.what());
    }
    require_fields(obj, {"origin", "nodes", "edges"}, {}, "graph line");

    DatasetEntry entry;
    entry.graph.origin = obj.at("origin").get<NodeId>();
    for (const auto& n : obj.at("nodes")) {
      require_fields(n, {"id", "line", "file", "text", "label", "tokens"}, {}, "node");
      StatementIR s;
      s.id = n.at("id").get<NodeId>();
      s.line = n.at("line").get<int>();
      s.file = n.at("file").get<std::string>();
      s.text = n.at("text").get<std::string>();
      s.label = label_from_int(n.at("label").get<int>());
      entry.graph.nodes.push_back(std::move(s));
      entry.node_tokens.push_back(n.at("tokens").get<std::vector<std::string>>());
      if (entry.graph.file.empty()) entry.graph.file = entry.graph.nodes.back().file;
    }
    if (entry.graph.nodes.empty()) {
      throw std::runtime_error("graphs line " + std::to_string(lineno) + ": graph has no nodes");
    }
    for (const auto& je : obj.at("edges")) {
      require_fields(je, {"src", "dst", "kind"}, {"var"}, "edge");
      Edge e;
      e.src = je.at("src").get<NodeId>();
      e.dst = je.at("dst").get<NodeId>();
      auto kind = edge_kind_from_string(je.at("kind").get<std::string>());
      if (!kind) {
        throw std::runtime_error("graphs line " + std::to_string(lineno) + ": bad edge kind");
      }
      e.kind = *kind;
      if (je.contains("var")) {
        if (e.kind != EdgeKind::Data) {
          throw std::runtime_error("graphs line " + std::to_string(lineno) +
                                   ": var is only valid on Data edges");
        }
        e.var = je.at("var").get<std::string>();
      }
      if (!entry.graph.has_node(e.src) || !entry.graph.has_node(e.dst)) {
        throw std::runtime_error("graphs line " + std::to_string(lineno) +
                                 ": edge endpoint is not a node");
      }
      entry.graph.edges.push_back(std::move(e));
    }
    data.entries.push_back(std::move(entry));
  }
  return data;
}

Dataset read_jsonl_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open graphs file: " + path);
  return read_jsonl(in);
}

AnalyzedFile analyze_source(const std::string& source, const std::string& filename,
                            const AnalyzeOptions& opts) {
  AnalyzedFile out;
  frontend::LexResult lex = frontend::tokenize(source);
  frontend::Program prog = frontend::parse(lex.tokens);
  out.program = frontend::lower(prog, filename);
  out.warnings = frontend::read_labels(source, out.program, opts.label_mode);
  out.ipdg = depgraph::build_ipdg(out.program, opts.ipdg);
  out.slices = slicer::slice_all(out.ipdg, opts.poi, opts.slice);
  return out;
}

AnalyzedFile analyze_path(const std::string& path, const AnalyzeOptions& opts) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open source file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return analyze_source(buf.str(), path, opts);
}

fsgnn::LearnGraph to_learn_graph(const DatasetEntry& entry,
                                 const embedder::Doc2VecModel& doc2vec,
                                 std::map<std::string, Eigen::VectorXd>* cache) {
  const slicer::SliceGraph& g = entry.graph;
  fsgnn::LearnGraph lg;
  lg.n = static_cast<int>(g.nodes.size());
  lg.x.resize(lg.n, doc2vec.config.dim);
  lg.labels.resize(static_cast<size_t>(lg.n));

  std::map<NodeId, int> row;
  for (int i = 0; i < lg.n; ++i) row[g.nodes[static_cast<size_t>(i)].id] = i;

  for (int i = 0; i < lg.n; ++i) {
    std::vector<std::string> tokens = entry.node_tokens[static_cast<size_t>(i)];
    if (doc2vec.config.normalize_identifiers) tokens = embedder::normalize_identifiers(tokens);
    std::string key;
    for (const auto& t : tokens) {
      key += t;
      key += '\x1f';
    }
    if (cache) {
      auto it = cache->find(key);
      if (it == cache->end()) {
        it = cache->emplace(key, embedder::infer_vector(doc2vec, tokens)).first;
      }
      lg.x.row(i) = it->second.transpose();
    } else {
      lg.x.row(i) = embedder::infer_vector(doc2vec, tokens).transpose();
    }
    switch (g.nodes[static_cast<size_t>(i)].label) {
      case Label::Vulnerable: lg.labels[static_cast<size_t>(i)] = 1; break;
      case Label::NonVulnerable: lg.labels[static_cast<size_t>(i)] = 0; break;
      case Label::Unlabeled: lg.labels[static_cast<size_t>(i)] = -1; break;
    }
  }

  std::set<fsgnn::RelEdge> dedup;
  for (const auto& e : g.edges) {
    if (e.src == e.dst) continue;
    dedup.insert({row.at(e.src), row.at(e.dst),
                  static_cast<int>(fsgnn::relation_of(e.kind))});
  }
  lg.edges.assign(dedup.begin(), dedup.end());
  return lg;
}

}  // namespace mvd::pipeline
