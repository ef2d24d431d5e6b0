#include "mvd/slicer.hpp"

#include <algorithm>
#include <deque>
#include <fstream>

namespace mvd::slicer {

PoiConfig PoiConfig::defaults() {
  PoiConfig c;
  c.api_names = {
      "malloc", "calloc",  "realloc", "free",    "memcpy",
      "memmove", "memset", "strcpy",  "strncpy", "strcat",
      "strlen", "kfree",   "kcalloc", "mempool_free",
  };
  return c;
}

PoiConfig PoiConfig::from_file(const std::string& path, bool enable_pointer_poi) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open API list: " + path);
  PoiConfig c;
  c.enable_pointer_poi = enable_pointer_poi;
  std::string line;
  while (std::getline(in, line)) {
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    size_t a = line.find_first_not_of(" \t\r");
    if (a == std::string::npos) continue;
    size_t b = line.find_last_not_of(" \t\r");
    c.api_names.insert(line.substr(a, b - a + 1));
  }
  if (c.api_names.empty()) throw std::runtime_error("API list is empty: " + path);
  return c;
}

std::vector<NodeId> find_pois(const depgraph::Ipdg& ipdg, const PoiConfig& config) {
  std::vector<const StatementIR*> hits;
  for (const auto& [id, s] : ipdg.nodes) {
    bool api = false;
    for (const auto& name : s.call_names) {
      if (config.api_names.count(name)) { api = true; break; }
    }
    bool pointer = config.enable_pointer_poi && s.is_pointer_op;
    if (api || pointer) hits.push_back(&s);
  }
  std::sort(hits.begin(), hits.end(), [](const StatementIR* a, const StatementIR* b) {
    return std::tie(a->function, a->line, a->id) < std::tie(b->function, b->line, b->id);
  });
  std::vector<NodeId> out;
  out.reserve(hits.size());
  for (const auto* s : hits) out.push_back(s->id);
  return out;
}

bool SliceGraph::has_node(NodeId id) const { return node(id) != nullptr; }

const StatementIR* SliceGraph::node(NodeId id) const {
  for (const auto& n : nodes) {
    if (n.id == id) return &n;
  }
  return nullptr;
}

std::set<NodeId> SliceGraph::node_ids() const {
  std::set<NodeId> ids;
  for (const auto& n : nodes) ids.insert(n.id);
  return ids;
}

SliceGraph slice(const depgraph::Ipdg& ipdg, NodeId poi, const SliceOptions& opts) {
  if (!ipdg.nodes.count(poi)) throw std::runtime_error("slice origin is not an Ipdg node");

  std::map<NodeId, std::vector<std::pair<NodeId, EdgeKind>>> fwd, rev;
  for (const auto& e : ipdg.edges) {
    fwd[e.src].emplace_back(e.dst, e.kind);
    rev[e.dst].emplace_back(e.src, e.kind);
  }

  std::set<NodeId> keep{poi};

  // Backward over every dependence kind.
  std::deque<NodeId> work{poi};
  std::set<NodeId> seen{poi};
  while (!work.empty()) {
    NodeId v = work.front();
    work.pop_front();
    auto it = rev.find(v);
    if (it == rev.end()) continue;
    for (const auto& [u, kind] : it->second) {
      (void)kind;
      if (seen.insert(u).second) {
        keep.insert(u);
        work.push_back(u);
      }
    }
  }

  // Forward over data flow only (plus interprocedural edges by default);
  // forward control dependence would drag in unrelated statements.
  auto forward_kind = [&](EdgeKind k) {
    if (k == EdgeKind::Data) return true;
    if (!opts.interproc_forward) return false;
    return k == EdgeKind::Call || k == EdgeKind::Return;
  };
  work = {poi};
  seen = {poi};
  while (!work.empty()) {
    NodeId v = work.front();
    work.pop_front();
    auto it = fwd.find(v);
    if (it == fwd.end()) continue;
    for (const auto& [u, kind] : it->second) {
      if (!forward_kind(kind)) continue;
      if (seen.insert(u).second) {
        keep.insert(u);
        work.push_back(u);
      }
    }
  }

  SliceGraph g;
  g.origin = poi;
  for (NodeId id : keep) {
    const StatementIR& s = ipdg.nodes.at(id);
    g.nodes.push_back(s);
    if (g.file.empty()) g.file = s.file;
  }
  std::sort(g.nodes.begin(), g.nodes.end(),
            [](const StatementIR& a, const StatementIR& b) { return a.id < b.id; });
  for (const auto& e : ipdg.edges) {
    if (keep.count(e.src) && keep.count(e.dst)) g.edges.push_back(e);
  }
  return g;
}

std::vector<SliceGraph> slice_all(const depgraph::Ipdg& ipdg, const PoiConfig& config,
                                  const SliceOptions& opts) {
  std::vector<SliceGraph> out;
  std::set<std::set<NodeId>> node_sets;
  for (NodeId poi : find_pois(ipdg, config)) {
    SliceGraph g = slice(ipdg, poi, opts);
    if (node_sets.insert(g.node_ids()).second) out.push_back(std::move(g));
  }
  return out;
}

}  // namespace mvd::slicer
