#pragma once

#include <set>
#include <string>
#include <vector>

#include "mvd/depgraph.hpp"
#include "mvd/ir.hpp"

namespace mvd::slicer {

/// Program points of interest: sensitive API call sites and pointer
/// operations. The API list is configurable; the default ships a compact
/// set of memory-sensitive functions.
struct PoiConfig {
  std::set<std::string> api_names;
  bool enable_pointer_poi = true;

  static PoiConfig defaults();
  /// Plain text, one name per line, `#` comments. Replaces the API list.
  static PoiConfig from_file(const std::string& path, bool enable_pointer_poi = true);
};

std::vector<NodeId> find_pois(const depgraph::Ipdg& ipdg, const PoiConfig& config);

/// A slice graph: the learning sample. Nodes are StatementIR sorted by id;
/// edges are the induced subset of the Ipdg.
struct SliceGraph {
  NodeId origin = -1;
  std::string file;
  std::vector<StatementIR> nodes;
  std::vector<Edge> edges;

  bool has_node(NodeId id) const;
  const StatementIR* node(NodeId id) const;
  std::set<NodeId> node_ids() const;
};

struct SliceOptions {
  // Forward closure traverses Call/Return edges in addition to Data.
  bool interproc_forward = true;
};

SliceGraph slice(const depgraph::Ipdg& ipdg, NodeId poi, const SliceOptions& opts = {});

std::vector<SliceGraph> slice_all(const depgraph::Ipdg& ipdg, const PoiConfig& config,
                                  const SliceOptions& opts = {});

}  // namespace mvd::slicer
