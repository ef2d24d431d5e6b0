#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace mvd {

using NodeId = int;

enum class StatementKind {
  Decl,
  Assign,
  Call,
  IfCond,
  LoopCond,
  Return,
  FreeLike,
  AllocLike,
  Other,
};

enum class Label { Unlabeled, NonVulnerable, Vulnerable };

std::string to_string(StatementKind k);
std::string to_string(Label l);

/// One program statement (or branch/loop condition) with its def/use sets.
/// This is the node unit of every graph downstream.
struct StatementIR {
  NodeId id = -1;
  std::string function;
  std::string file;
  int line = 0;
  StatementKind kind = StatementKind::Other;
  std::string text;

  std::set<std::string> defs;
  std::set<std::string> uses;
  // Defs that come from `&x` call arguments. They kill earlier definitions
  // but do not source def->use edges; the value arrives through the callee
  // and its Return edge instead.
  std::set<std::string> out_param_defs;
  // Defs from array-element or member stores: partial updates, so they
  // source edges but do not kill.
  std::set<std::string> weak_defs;
  // Base variables written through a deref (`*p = e`), used to decide
  // Return edges for pointer parameters.
  std::set<std::string> deref_writes;
  // True for `return expr;` (a valueless `return;` carries nothing out).
  bool returns_value = false;

  std::optional<std::string> callee;
  // Every call name appearing in the statement, outermost first.
  std::vector<std::string> call_names;
  bool is_pointer_op = false;
  Label label = Label::Unlabeled;
};

enum class EdgeKind { Control, Data, Call, Return };

std::string to_string(EdgeKind k);
std::optional<EdgeKind> edge_kind_from_string(const std::string& s);

/// Directed dependence edge; `var` is set for Data edges only.
struct Edge {
  NodeId src = -1;
  NodeId dst = -1;
  EdgeKind kind = EdgeKind::Control;
  std::string var;

  auto operator<=>(const Edge&) const = default;
};

}  // namespace mvd
