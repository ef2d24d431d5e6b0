#pragma once

#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvd/ir.hpp"

namespace mvd::frontend {

// ---------------------------------------------------------------------------
// Lexing
// ---------------------------------------------------------------------------

enum class TokenKind { Identifier, Keyword, Literal, Operator, Punctuation };

struct Token {
  TokenKind kind = TokenKind::Identifier;
  std::string text;
  int line = 1;
};

struct LexError : std::runtime_error {
  int line;
  LexError(const std::string& msg, int line_)
      : std::runtime_error("lex error at line " + std::to_string(line_) + ": " + msg),
        line(line_) {}
};

struct ParseError : std::runtime_error {
  int line;
  ParseError(const std::string& msg, int line_)
      : std::runtime_error("parse error at line " + std::to_string(line_) + ": " + msg),
        line(line_) {}
};

/// Tokens plus the annotation markers found in comments. A marker is a
/// line-trailing comment whose content is exactly `@vuln`.
struct LexResult {
  std::vector<Token> tokens;
  std::set<int> vuln_marker_lines;
};

LexResult tokenize(const std::string& source);

// ---------------------------------------------------------------------------
// Syntax tree
// ---------------------------------------------------------------------------

struct Expr;
using ExprPtr = std::unique_ptr<Expr>;

struct Expr {
  enum class Kind {
    IntLit,
    FloatLit,
    StrLit,
    CharLit,
    Ident,
    Unary,    // text is one of - ! ~ * &
    Binary,   // text is the operator
    Assign,   // kids = {lhs, rhs}
    Call,     // text is the callee name, kids are arguments
    Index,    // kids = {base, index}
    Member,   // text is the member name, kids = {base}
    Cast,     // text is the rendered type, kids = {operand}
    SizeofType,  // text is the rendered type
    SizeofExpr,  // kids = {operand}
  };
  Kind kind;
  std::string text;
  bool arrow = false;  // Member: `->` vs `.`
  std::vector<ExprPtr> kids;
  int line = 0;
};

struct TypeSpec {
  std::string base;  // e.g. "int", "char", "unsigned long", "struct foo"
  int stars = 0;
  std::string render() const;
};

struct Declarator {
  std::string name;
  int stars = 0;
  bool is_array = false;
  ExprPtr array_size;  // may be null for `[]`
  ExprPtr init;        // may be null
  int line = 0;
};

struct Stmt;
using StmtPtr = std::unique_ptr<Stmt>;

struct Stmt {
  enum class Kind { Decl, ExprStmt, If, While, For, Return, Block, Empty };
  Kind kind;
  int line = 0;

  TypeSpec type;                        // Decl
  std::vector<Declarator> declarators;  // Decl

  ExprPtr expr;  // ExprStmt; If/While/For condition; Return value (may be null)

  StmtPtr then_branch, else_branch;  // If
  StmtPtr body;                      // While / For
  StmtPtr for_init;                  // For (Decl or ExprStmt; may be null)
  ExprPtr for_step;                  // For (may be null)

  std::vector<StmtPtr> stmts;  // Block
};

struct Param {
  TypeSpec type;
  std::string name;
  bool is_pointer = false;
  int line = 0;
};

struct Function {
  TypeSpec return_type;
  std::string name;
  std::vector<Param> params;
  StmtPtr body;  // Block
  int line = 0;
};

struct Program {
  std::vector<Function> functions;
};

Program parse(const std::vector<Token>& tokens);

/// Deterministic structural dump, used to check that parsing is reproducible.
std::string dump(const Program& program);

std::string render_expr(const Expr& e);

// ---------------------------------------------------------------------------
// Lowering to StatementIR
// ---------------------------------------------------------------------------

/// Structured view over the lowered statement list, consumed by the CFG
/// builder. `index` points into LoweredFunction::statements.
struct StmtTree {
  enum class Kind { Simple, If, Loop };
  Kind kind = Kind::Simple;
  int index = -1;
  bool is_return = false;
  std::vector<StmtTree> then_body;
  std::vector<StmtTree> else_body;
  std::vector<StmtTree> loop_body;  // for-loops have the step appended here
};

struct LoweredFunction {
  std::string name;
  std::vector<std::string> params;
  std::set<std::string> pointer_params;
  // statements[0] is the function entry node (the signature, defining the
  // parameters); the rest follow in lexical order.
  std::vector<StatementIR> statements;
  std::vector<StmtTree> body;
  // Every call name appearing in each statement, in lexical order.
  std::map<NodeId, std::vector<std::string>> calls_at;
};

struct LoweredProgram {
  std::string file;
  std::vector<LoweredFunction> functions;

  const StatementIR* find(NodeId id) const;
  StatementIR* find(NodeId id);
};

LoweredProgram lower(const Program& program, const std::string& file = "");

// ---------------------------------------------------------------------------
// Labels
// ---------------------------------------------------------------------------

enum class LabelMode {
  Training,   // unmarked statements become NonVulnerable
  Detection,  // unmarked statements stay Unlabeled
};

/// Applies `// @vuln` markers to the lowered statements. Returns warnings
/// for markers that sit on lines without any statement.
std::vector<std::string> read_labels(const std::string& source,
                                     LoweredProgram& program,
                                     LabelMode mode);

}  // namespace mvd::frontend
