#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "mvd/frontend.hpp"
#include "mvd/ir.hpp"

namespace mvd::depgraph {

/// Control-flow graph of one function. Nodes 0..n-1 are the function's
/// statements (same order as LoweredFunction::statements); `entry` and
/// `exit` are synthetic.
struct Cfg {
  int n = 0;  // statement count
  int entry() const { return n; }
  int exit() const { return n + 1; }
  int size() const { return n + 2; }

  std::vector<std::set<int>> succ;
  std::vector<std::set<int>> pred;
  std::vector<NodeId> stmt_ids;  // local index -> global statement id

  void add_edge(int a, int b);
  bool has_edge(int a, int b) const;
};

Cfg build_cfg(const frontend::LoweredFunction& fn);

struct ControlDepOptions {
  bool loop_carried_self = false;  // emit (c, c) for loop conditions
};

/// Post-dominance based control dependence over statement nodes, returned
/// as (predicate id, dependent id) pairs.
std::set<std::pair<NodeId, NodeId>> control_dependence(
    const Cfg& cfg, const ControlDepOptions& opts = {});

/// Reaching-definitions data dependence: (def id, use id, variable).
/// Out-parameter defs kill but never source an edge; weak defs source
/// edges but never kill.
std::set<std::tuple<NodeId, NodeId, std::string>> data_dependence(
    const Cfg& cfg, const std::vector<StatementIR>& statements);

struct CallSite {
  std::string caller;
  NodeId site = -1;
  std::string callee;
  auto operator<=>(const CallSite&) const = default;
};

struct CallGraph {
  std::set<CallSite> resolved;
  std::set<CallSite> external;  // callee not defined in this program
};

CallGraph build_call_graph(const frontend::LoweredProgram& program);

/// Interprocedural program dependence graph: per-function control and data
/// dependence, Call edges into callee entries, and Return edges from
/// value-carrying callee statements back to call sites.
struct Ipdg {
  std::map<NodeId, StatementIR> nodes;
  std::set<Edge> edges;
  CallGraph call_graph;
};

struct IpdgOptions {
  ControlDepOptions control;
};

Ipdg build_ipdg(const frontend::LoweredProgram& program, const IpdgOptions& opts = {});

std::string to_dot(const Cfg& cfg, const frontend::LoweredFunction& fn);
std::string to_dot(const Ipdg& ipdg);

}  // namespace mvd::depgraph
