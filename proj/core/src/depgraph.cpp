#include "mvd/depgraph.hpp"

#include <algorithm>
#include <deque>
#include <sstream>

namespace mvd::depgraph {

void Cfg::add_edge(int a, int b) {
  succ[static_cast<size_t>(a)].insert(b);
  pred[static_cast<size_t>(b)].insert(a);
}

bool Cfg::has_edge(int a, int b) const {
  return succ[static_cast<size_t>(a)].count(b) > 0;
}

namespace {

using frontend::StmtTree;

// Wires one structured block; `preds` are the nodes that fall into it.
// Returns the nodes that fall out of the block (empty after a return).
std::vector<int> wire(Cfg& cfg, const std::vector<StmtTree>& items, std::vector<int> preds);

std::vector<int> wire_item(Cfg& cfg, const StmtTree& item, std::vector<int> preds) {
  for (int p : preds) cfg.add_edge(p, item.index);
  switch (item.kind) {
    case StmtTree::Kind::Simple:
      if (item.is_return) {
        cfg.add_edge(item.index, cfg.exit());
        return {};
      }
      return {item.index};
    case StmtTree::Kind::If: {
      std::vector<int> out = wire(cfg, item.then_body, {item.index});
      if (item.else_body.empty()) {
        out.push_back(item.index);  // fallthrough when the condition fails
      } else {
        std::vector<int> e = wire(cfg, item.else_body, {item.index});
        out.insert(out.end(), e.begin(), e.end());
      }
      return out;
    }
    case StmtTree::Kind::Loop: {
      std::vector<int> back = wire(cfg, item.loop_body, {item.index});
      for (int b : back) cfg.add_edge(b, item.index);
      return {item.index};  // loop exit
    }
  }
  return {};
}

std::vector<int> wire(Cfg& cfg, const std::vector<StmtTree>& items, std::vector<int> preds) {
  for (const auto& item : items) preds = wire_item(cfg, item, std::move(preds));
  return preds;
}

// Post-dominator sets by iterative intersection over the reversed CFG.
std::vector<std::set<int>> post_dominators(const Cfg& cfg) {
  int n = cfg.size();
  std::set<int> universe;
  for (int i = 0; i < n; ++i) universe.insert(i);

  std::vector<std::set<int>> pd(static_cast<size_t>(n), universe);
  pd[static_cast<size_t>(cfg.exit())] = {cfg.exit()};

  bool changed = true;
  while (changed) {
    changed = false;
    for (int v = 0; v < n; ++v) {
      if (v == cfg.exit()) continue;
      const auto& succs = cfg.succ[static_cast<size_t>(v)];
      std::set<int> meet;
      bool first = true;
      for (int s : succs) {
        if (first) {
          meet = pd[static_cast<size_t>(s)];
          first = false;
        } else {
          std::set<int> tmp;
          std::set_intersection(meet.begin(), meet.end(),
                                pd[static_cast<size_t>(s)].begin(),
                                pd[static_cast<size_t>(s)].end(),
                                std::inserter(tmp, tmp.begin()));
          meet = std::move(tmp);
        }
      }
      if (first) meet = universe;  // no successors: unreachable-to-exit node
      meet.insert(v);
      if (meet != pd[static_cast<size_t>(v)]) {
        pd[static_cast<size_t>(v)] = std::move(meet);
        changed = true;
      }
    }
  }
  return pd;
}

// Immediate post-dominator: the strict post-dominator that every other
// strict post-dominator of v post-dominates.
std::vector<int> immediate_post_dominators(const Cfg& cfg,
                                           const std::vector<std::set<int>>& pd) {
  int n = cfg.size();
  std::vector<int> ipdom(static_cast<size_t>(n), -1);
  for (int v = 0; v < n; ++v) {
    if (v == cfg.exit()) continue;
    std::set<int> strict = pd[static_cast<size_t>(v)];
    strict.erase(v);
    for (int c : strict) {
      bool closest = true;
      for (int d : strict) {
        if (d == c) continue;
        if (!pd[static_cast<size_t>(c)].count(d)) {
          closest = false;
          break;
        }
      }
      if (closest) {
        ipdom[static_cast<size_t>(v)] = c;
        break;
      }
    }
  }
  return ipdom;
}

}  // namespace

Cfg build_cfg(const frontend::LoweredFunction& fn) {
  Cfg cfg;
  cfg.n = static_cast<int>(fn.statements.size());
  cfg.succ.assign(static_cast<size_t>(cfg.size()), {});
  cfg.pred.assign(static_cast<size_t>(cfg.size()), {});
  cfg.stmt_ids.reserve(fn.statements.size());
  for (const auto& s : fn.statements) cfg.stmt_ids.push_back(s.id);

  // entry -> signature node -> body
  cfg.add_edge(cfg.entry(), 0);
  std::vector<int> out = wire(cfg, fn.body, {0});
  for (int p : out) cfg.add_edge(p, cfg.exit());
  if (out.empty() && fn.body.empty()) cfg.add_edge(0, cfg.exit());
  return cfg;
}

std::set<std::pair<NodeId, NodeId>> control_dependence(const Cfg& cfg,
                                                       const ControlDepOptions& opts) {
  std::set<std::pair<NodeId, NodeId>> result;
  auto pd = post_dominators(cfg);
  auto ipdom = immediate_post_dominators(cfg, pd);

  for (int a = 0; a < cfg.n; ++a) {
    if (cfg.succ[static_cast<size_t>(a)].size() < 2) continue;
    for (int b : cfg.succ[static_cast<size_t>(a)]) {
      if (pd[static_cast<size_t>(a)].count(b)) continue;  // b post-dominates a
      int t = b;
      while (t != ipdom[static_cast<size_t>(a)] && t >= 0) {
        bool self = (t == a);
        if (t < cfg.n && (!self || opts.loop_carried_self)) {
          result.emplace(cfg.stmt_ids[static_cast<size_t>(a)],
                         cfg.stmt_ids[static_cast<size_t>(t)]);
        }
        t = ipdom[static_cast<size_t>(t)];
      }
    }
  }
  return result;
}

std::set<std::tuple<NodeId, NodeId, std::string>> data_dependence(
    const Cfg& cfg, const std::vector<StatementIR>& statements) {
  using DefPoint = std::pair<int, std::string>;  // (local node, variable)

  auto kills = [&](const StatementIR& s, const std::string& var) {
    // Weak defs (array/member stores) do not kill.
    return s.defs.count(var) && !s.weak_defs.count(var);
  };

  std::vector<std::set<DefPoint>> in(static_cast<size_t>(cfg.size()));
  std::vector<std::set<DefPoint>> out(static_cast<size_t>(cfg.size()));

  std::deque<int> worklist;
  for (int i = 0; i < cfg.size(); ++i) worklist.push_back(i);

  while (!worklist.empty()) {
    int v = worklist.front();
    worklist.pop_front();

    std::set<DefPoint> newin;
    for (int p : cfg.pred[static_cast<size_t>(v)]) {
      newin.insert(out[static_cast<size_t>(p)].begin(), out[static_cast<size_t>(p)].end());
    }

    std::set<DefPoint> newout;
    if (v < cfg.n) {
      const StatementIR& s = statements[static_cast<size_t>(v)];
      for (const auto& d : newin) {
        if (!kills(s, d.second)) newout.insert(d);
      }
      for (const auto& var : s.defs) newout.emplace(v, var);
    } else {
      newout = newin;
    }

    bool changed = (newin != in[static_cast<size_t>(v)]) ||
                   (newout != out[static_cast<size_t>(v)]);
    in[static_cast<size_t>(v)] = std::move(newin);
    if (changed) {
      out[static_cast<size_t>(v)] = std::move(newout);
      for (int s : cfg.succ[static_cast<size_t>(v)]) worklist.push_back(s);
    }
  }

  std::set<std::tuple<NodeId, NodeId, std::string>> result;
  for (int u = 0; u < cfg.n; ++u) {
    const StatementIR& use_stmt = statements[static_cast<size_t>(u)];
    for (const auto& [d, var] : in[static_cast<size_t>(u)]) {
      if (!use_stmt.uses.count(var)) continue;
      const StatementIR& def_stmt = statements[static_cast<size_t>(d)];
      // Out-parameter defs reach and kill, but the flow into later uses runs
      // through the callee's Return edge, not a direct Data edge.
      if (def_stmt.out_param_defs.count(var)) continue;
      if (d == u) continue;
      result.emplace(cfg.stmt_ids[static_cast<size_t>(d)],
                     cfg.stmt_ids[static_cast<size_t>(u)], var);
    }
  }
  return result;
}

CallGraph build_call_graph(const frontend::LoweredProgram& program) {
  CallGraph cg;
  std::set<std::string> defined;
  for (const auto& fn : program.functions) defined.insert(fn.name);

  for (const auto& fn : program.functions) {
    for (const auto& [site, names] : fn.calls_at) {
      for (const auto& name : names) {
        CallSite cs{fn.name, site, name};
        if (defined.count(name)) cg.resolved.insert(cs);
        else cg.external.insert(cs);
      }
    }
  }
  return cg;
}

Ipdg build_ipdg(const frontend::LoweredProgram& program, const IpdgOptions& opts) {
  Ipdg g;
  g.call_graph = build_call_graph(program);

  for (const auto& fn : program.functions) {
    for (const auto& s : fn.statements) g.nodes.emplace(s.id, s);

    Cfg cfg = build_cfg(fn);
    auto cd = control_dependence(cfg, opts.control);
    std::set<NodeId> has_control_parent;
    for (const auto& [src, dst] : cd) {
      if (src == dst) continue;
      g.edges.insert(Edge{src, dst, EdgeKind::Control, ""});
      has_control_parent.insert(dst);
    }
    // Statements governed by no predicate hang off the function entry,
    // mirroring the usual PDG shape where top-level code depends on entry.
    NodeId sig = fn.statements.front().id;
    for (size_t i = 1; i < fn.statements.size(); ++i) {
      NodeId id = fn.statements[i].id;
      if (!has_control_parent.count(id)) {
        g.edges.insert(Edge{sig, id, EdgeKind::Control, ""});
      }
    }

    for (const auto& [d, u, var] : data_dependence(cfg, fn.statements)) {
      if (d == u) continue;
      g.edges.insert(Edge{d, u, EdgeKind::Data, var});
    }
  }

  // Interprocedural edges, one pair per resolved static call site.
  std::map<std::string, const frontend::LoweredFunction*> by_name;
  for (const auto& fn : program.functions) by_name.emplace(fn.name, &fn);

  for (const auto& cs : g.call_graph.resolved) {
    const frontend::LoweredFunction* callee = by_name.at(cs.callee);
    NodeId entry = callee->statements.front().id;
    if (cs.site != entry) g.edges.insert(Edge{cs.site, entry, EdgeKind::Call, ""});

    for (const auto& s : callee->statements) {
      bool outflow = s.returns_value;
      if (!outflow) {
        for (const auto& v : s.deref_writes) {
          if (callee->pointer_params.count(v)) { outflow = true; break; }
        }
      }
      if (outflow && s.id != cs.site) {
        g.edges.insert(Edge{s.id, cs.site, EdgeKind::Return, ""});
      }
    }
  }
  return g;
}

namespace {

std::string dot_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

}  // namespace

std::string to_dot(const Cfg& cfg, const frontend::LoweredFunction& fn) {
  std::ostringstream os;
  os << "digraph cfg_" << fn.name << " {\n";
  os << "  entry [shape=point];\n  exit [shape=point];\n";
  for (int i = 0; i < cfg.n; ++i) {
    const auto& s = fn.statements[static_cast<size_t>(i)];
    os << "  n" << i << " [label=\"" << s.line << ": " << dot_escape(s.text) << "\"];\n";
  }
  auto name = [&](int v) -> std::string {
    if (v == cfg.entry()) return "entry";
    if (v == cfg.exit()) return "exit";
    return "n" + std::to_string(v);
  };
  for (int v = 0; v < cfg.size(); ++v) {
    for (int s : cfg.succ[static_cast<size_t>(v)]) {
      os << "  " << name(v) << " -> " << name(s) << ";\n";
    }
  }
  os << "}\n";
  return os.str();
}

std::string to_dot(const Ipdg& ipdg) {
  std::ostringstream os;
  os << "digraph ipdg {\n";
  for (const auto& [id, s] : ipdg.nodes) {
    os << "  n" << id << " [label=\"" << s.line << ": " << dot_escape(s.text) << "\"];\n";
  }
  for (const auto& e : ipdg.edges) {
    os << "  n" << e.src << " -> n" << e.dst << " [label=\"" << to_string(e.kind);
    if (e.kind == EdgeKind::Data) os << ":" << e.var;
    os << "\"];\n";
  }
  os << "}\n";
  return os.str();
}

}  // namespace mvd::depgraph
