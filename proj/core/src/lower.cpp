#include "mvd/frontend.hpp"

#include <functional>
#include <sstream>

namespace mvd::frontend {
namespace {

const std::set<std::string>& alloc_names() {
  static const std::set<std::string> s = {
      "malloc", "calloc", "realloc", "kmalloc", "kcalloc",
      "krealloc", "kvmalloc", "strdup", "strndup",
  };
  return s;
}

const std::set<std::string>& free_names() {
  static const std::set<std::string> s = {
      "free", "kfree", "kvfree", "cfree", "mempool_free",
  };
  return s;
}

bool is_builtin_const(const std::string& name) {
  return name == "NULL" || name == "true" || name == "false";
}

// ---------------------------------------------------------------------------
// Expression rendering (minimal parentheses, deterministic)
// ---------------------------------------------------------------------------

int expr_precedence(const Expr& e) {
  switch (e.kind) {
    case Expr::Kind::Assign: return 0;
    case Expr::Kind::Binary: {
      const std::string& op = e.text;
      if (op == "||") return 1;
      if (op == "&&") return 2;
      if (op == "|") return 3;
      if (op == "^") return 4;
      if (op == "&") return 5;
      if (op == "==" || op == "!=") return 6;
      if (op == "<" || op == ">" || op == "<=" || op == ">=") return 7;
      if (op == "<<" || op == ">>") return 8;
      if (op == "+" || op == "-") return 9;
      return 10;  // * / %
    }
    case Expr::Kind::Unary:
    case Expr::Kind::Cast: return 11;
    default: return 12;  // postfix and primary
  }
}

void render_rec(const Expr& e, int parent_prec, std::string& out) {
  int prec = expr_precedence(e);
  bool paren = prec < parent_prec;
  if (paren) out += '(';
  switch (e.kind) {
    case Expr::Kind::IntLit:
    case Expr::Kind::FloatLit:
    case Expr::Kind::StrLit:
    case Expr::Kind::CharLit:
    case Expr::Kind::Ident:
      out += e.text;
      break;
    case Expr::Kind::Unary: {
      out += e.text;
      std::string kid;
      render_rec(*e.kids[0], prec, kid);
      if (!kid.empty() && !e.text.empty() && kid[0] == e.text[0]) out += ' ';
      out += kid;
      break;
    }
    case Expr::Kind::Binary:
      render_rec(*e.kids[0], prec, out);
      out += ' ';
      out += e.text;
      out += ' ';
      render_rec(*e.kids[1], prec + 1, out);
      break;
    case Expr::Kind::Assign:
      render_rec(*e.kids[0], 1, out);
      out += " = ";
      render_rec(*e.kids[1], 0, out);
      break;
    case Expr::Kind::Call: {
      out += e.text;
      out += '(';
      for (size_t i = 0; i < e.kids.size(); ++i) {
        if (i) out += ", ";
        render_rec(*e.kids[i], 0, out);
      }
      out += ')';
      break;
    }
    case Expr::Kind::Index:
      render_rec(*e.kids[0], 12, out);
      out += '[';
      render_rec(*e.kids[1], 0, out);
      out += ']';
      break;
    case Expr::Kind::Member:
      render_rec(*e.kids[0], 12, out);
      out += e.arrow ? "->" : ".";
      out += e.text;
      break;
    case Expr::Kind::Cast:
      out += '(';
      out += e.text;
      out += ')';
      render_rec(*e.kids[0], 11, out);
      break;
    case Expr::Kind::SizeofType:
      out += "sizeof(";
      out += e.text;
      out += ')';
      break;
    case Expr::Kind::SizeofExpr:
      out += "sizeof(";
      render_rec(*e.kids[0], 0, out);
      out += ')';
      break;
  }
  if (paren) out += ')';
}

// ---------------------------------------------------------------------------
// Def/use extraction
// ---------------------------------------------------------------------------

struct FnContext {
  std::set<std::string> pointer_vars;  // params and declared pointers/arrays
  // var -> unique `p = &x` target, when that is the only assignment to p.
  std::map<std::string, std::string> evident_pointee;
};

void walk_expr(const Expr& e, const std::function<void(const Expr&)>& fn) {
  fn(e);
  for (const auto& k : e.kids) walk_expr(*k, fn);
}

// Collects variable reads; `&x` used as a call argument is recorded as an
// out-parameter definition instead of a plain read.
struct DefUseCollector {
  const FnContext& ctx;
  StatementIR& ir;
  bool has_pointer_syntax = false;

  void reads(const Expr& e) {
    switch (e.kind) {
      case Expr::Kind::Ident:
        if (!is_builtin_const(e.text)) ir.uses.insert(e.text);
        break;
      case Expr::Kind::Unary:
        has_pointer_syntax |= (e.text == "*" || e.text == "&");
        reads(*e.kids[0]);
        break;
      case Expr::Kind::Index:
        has_pointer_syntax = true;
        reads(*e.kids[0]);
        reads(*e.kids[1]);
        break;
      case Expr::Kind::Member:
        if (e.arrow) has_pointer_syntax = true;
        reads(*e.kids[0]);
        break;
      case Expr::Kind::Call: {
        ir.call_names.push_back(e.text);
        for (const auto& arg : e.kids) {
          if (arg->kind == Expr::Kind::Unary && arg->text == "&" &&
              arg->kids[0]->kind == Expr::Kind::Ident &&
              !is_builtin_const(arg->kids[0]->text)) {
            // &x handed to a callee: the callee may write through it.
            const std::string& v = arg->kids[0]->text;
            ir.defs.insert(v);
            ir.out_param_defs.insert(v);
            ir.uses.insert(v);
            has_pointer_syntax = true;
            continue;
          }
          reads(*arg);
        }
        break;
      }
      case Expr::Kind::Assign:
        assigns(*e.kids[0]);
        reads(*e.kids[1]);
        break;
      case Expr::Kind::Binary:
        reads(*e.kids[0]);
        reads(*e.kids[1]);
        break;
      case Expr::Kind::Cast:
      case Expr::Kind::SizeofExpr:
        reads(*e.kids[0]);
        break;
      default:
        break;
    }
  }

  void assigns(const Expr& lhs) {
    switch (lhs.kind) {
      case Expr::Kind::Ident:
        ir.defs.insert(lhs.text);
        if (ctx.pointer_vars.count(lhs.text)) has_pointer_syntax = true;
        break;
      case Expr::Kind::Unary:
        if (lhs.text == "*" && lhs.kids[0]->kind == Expr::Kind::Ident) {
          has_pointer_syntax = true;
          const std::string& p = lhs.kids[0]->text;
          ir.uses.insert(p);
          auto it = ctx.evident_pointee.find(p);
          if (it != ctx.evident_pointee.end()) {
            ir.defs.insert(it->second);
          } else {
            ir.defs.insert(p);
            ir.deref_writes.insert(p);
          }
        } else {
          has_pointer_syntax |= (lhs.text == "*" || lhs.text == "&");
          reads(*lhs.kids[0]);
        }
        break;
      case Expr::Kind::Index:
        has_pointer_syntax = true;
        if (lhs.kids[0]->kind == Expr::Kind::Ident) {
          const std::string& a = lhs.kids[0]->text;
          ir.defs.insert(a);
          ir.weak_defs.insert(a);
          ir.uses.insert(a);
        } else {
          reads(*lhs.kids[0]);
        }
        reads(*lhs.kids[1]);
        break;
      case Expr::Kind::Member:
        if (lhs.arrow) has_pointer_syntax = true;
        if (lhs.kids[0]->kind == Expr::Kind::Ident) {
          const std::string& s = lhs.kids[0]->text;
          ir.defs.insert(s);
          ir.weak_defs.insert(s);
          ir.uses.insert(s);
        } else {
          reads(*lhs.kids[0]);
        }
        break;
      default:
        // Not an lvalue we model; treat as reads.
        reads(lhs);
        break;
    }
  }
};

// ---------------------------------------------------------------------------
// Lowering driver
// ---------------------------------------------------------------------------

struct Lowerer {
  const std::string& file;
  NodeId next_id = 0;

  StatementIR base_ir(const std::string& fn_name, int line, StatementKind kind) {
    StatementIR ir;
    ir.id = next_id++;
    ir.function = fn_name;
    ir.file = file;
    ir.line = line;
    ir.kind = kind;
    return ir;
  }

  static void classify_calls(StatementIR& ir) {
    if (!ir.call_names.empty()) {
      ir.callee = ir.call_names.front();
      for (const auto& name : ir.call_names) {
        if (alloc_names().count(name)) ir.kind = StatementKind::AllocLike;
      }
      for (const auto& name : ir.call_names) {
        if (free_names().count(name)) ir.kind = StatementKind::FreeLike;
      }
    }
  }

  void finish(LoweredFunction& lf, StatementIR ir) {
    classify_calls(ir);
    if (!ir.call_names.empty()) {
      lf.calls_at[ir.id] = ir.call_names;
    }
    lf.statements.push_back(std::move(ir));
  }

  int lower_expr_stmt(LoweredFunction& lf, const FnContext& ctx, const Expr& e, int line,
                      StatementKind kind) {
    StatementIR ir = base_ir(lf.name, line, kind);
    std::string text;
    render_rec(e, 0, text);
    ir.text = text + ";";
    DefUseCollector col{ctx, ir};
    col.reads(e);
    ir.is_pointer_op = col.has_pointer_syntax;
    int index = static_cast<int>(lf.statements.size());
    finish(lf, std::move(ir));
    return index;
  }

  void lower_decl(LoweredFunction& lf, const FnContext& ctx, const Stmt& s,
                  std::vector<StmtTree>& items) {
    for (const auto& d : s.declarators) {
      StatementIR ir = base_ir(lf.name, d.line, StatementKind::Decl);
      std::ostringstream text;
      text << s.type.base << ' ' << std::string(static_cast<size_t>(d.stars), '*') << d.name;
      if (d.is_array) {
        text << '[';
        if (d.array_size) {
          std::string sz;
          render_rec(*d.array_size, 0, sz);
          text << sz;
        }
        text << ']';
      }
      DefUseCollector col{ctx, ir};
      if (d.init) {
        std::string init;
        render_rec(*d.init, 0, init);
        text << " = " << init;
        col.reads(*d.init);
      }
      text << ';';
      ir.text = text.str();
      ir.defs.insert(d.name);
      if (d.array_size) col.reads(*d.array_size);
      ir.is_pointer_op = col.has_pointer_syntax || d.stars > 0 || d.is_array;
      int index = static_cast<int>(lf.statements.size());
      finish(lf, std::move(ir));
      items.push_back(StmtTree{StmtTree::Kind::Simple, index, false, {}, {}, {}});
    }
  }

  int lower_condition(LoweredFunction& lf, const FnContext& ctx, const Expr* cond,
                      int line, const char* keyword, StatementKind kind) {
    StatementIR ir = base_ir(lf.name, line, kind);
    std::string text;
    if (cond) render_rec(*cond, 0, text);
    else text = "1";  // `for (;;)` style
    ir.text = std::string(keyword) + " (" + text + ")";
    DefUseCollector col{ctx, ir};
    if (cond) col.reads(*cond);
    ir.is_pointer_op = col.has_pointer_syntax;
    int index = static_cast<int>(lf.statements.size());
    finish(lf, std::move(ir));
    return index;
  }

  void lower_stmt(LoweredFunction& lf, const FnContext& ctx, const Stmt& s,
                  std::vector<StmtTree>& items) {
    switch (s.kind) {
      case Stmt::Kind::Decl:
        lower_decl(lf, ctx, s, items);
        break;
      case Stmt::Kind::ExprStmt: {
        StatementKind kind = StatementKind::Other;
        if (s.expr->kind == Expr::Kind::Assign) kind = StatementKind::Assign;
        else if (s.expr->kind == Expr::Kind::Call) kind = StatementKind::Call;
        int index = lower_expr_stmt(lf, ctx, *s.expr, s.line, kind);
        items.push_back(StmtTree{StmtTree::Kind::Simple, index, false, {}, {}, {}});
        break;
      }
      case Stmt::Kind::Return: {
        StatementIR ir = base_ir(lf.name, s.line, StatementKind::Return);
        if (s.expr) {
          std::string text;
          render_rec(*s.expr, 0, text);
          ir.text = "return " + text + ";";
          DefUseCollector col{ctx, ir};
          col.reads(*s.expr);
          ir.is_pointer_op = col.has_pointer_syntax;
          ir.returns_value = true;
        } else {
          ir.text = "return;";
        }
        int index = static_cast<int>(lf.statements.size());
        finish(lf, std::move(ir));
        items.push_back(StmtTree{StmtTree::Kind::Simple, index, true, {}, {}, {}});
        break;
      }
      case Stmt::Kind::If: {
        int cond = lower_condition(lf, ctx, s.expr.get(), s.line, "if", StatementKind::IfCond);
        StmtTree node{StmtTree::Kind::If, cond, false, {}, {}, {}};
        lower_stmt(lf, ctx, *s.then_branch, node.then_body);
        if (s.else_branch) lower_stmt(lf, ctx, *s.else_branch, node.else_body);
        items.push_back(std::move(node));
        break;
      }
      case Stmt::Kind::While: {
        int cond =
            lower_condition(lf, ctx, s.expr.get(), s.line, "while", StatementKind::LoopCond);
        StmtTree node{StmtTree::Kind::Loop, cond, false, {}, {}, {}};
        lower_stmt(lf, ctx, *s.body, node.loop_body);
        items.push_back(std::move(node));
        break;
      }
      case Stmt::Kind::For: {
        if (s.for_init) lower_stmt(lf, ctx, *s.for_init, items);
        int cond =
            lower_condition(lf, ctx, s.expr.get(), s.line, "for", StatementKind::LoopCond);
        int step = -1;
        if (s.for_step) {
          StatementKind k = s.for_step->kind == Expr::Kind::Assign ? StatementKind::Assign
                                                                   : StatementKind::Other;
          step = lower_expr_stmt(lf, ctx, *s.for_step, s.for_step->line, k);
        }
        StmtTree node{StmtTree::Kind::Loop, cond, false, {}, {}, {}};
        lower_stmt(lf, ctx, *s.body, node.loop_body);
        if (step >= 0) node.loop_body.push_back(StmtTree{StmtTree::Kind::Simple, step, false, {}, {}, {}});
        items.push_back(std::move(node));
        break;
      }
      case Stmt::Kind::Block:
        for (const auto& k : s.stmts) lower_stmt(lf, ctx, *k, items);
        break;
      case Stmt::Kind::Empty:
        break;
    }
  }
};

// Scans a function for pointer-typed names and for variables whose only
// assignment has the shape `p = &x` (the evident-pointee approximation).
FnContext build_context(const Function& fn) {
  FnContext ctx;
  for (const auto& p : fn.params) {
    if (p.is_pointer && !p.name.empty()) ctx.pointer_vars.insert(p.name);
  }
  std::map<std::string, int> assign_count;
  std::map<std::string, std::string> addr_target;

  std::function<void(const Expr&)> scan_expr = [&](const Expr& e) {
    if (e.kind == Expr::Kind::Assign && e.kids[0]->kind == Expr::Kind::Ident) {
      const std::string& name = e.kids[0]->text;
      assign_count[name]++;
      const Expr& rhs = *e.kids[1];
      if (rhs.kind == Expr::Kind::Unary && rhs.text == "&" &&
          rhs.kids[0]->kind == Expr::Kind::Ident) {
        addr_target[name] = rhs.kids[0]->text;
      }
    }
    if (e.kind == Expr::Kind::Call) {
      for (const auto& arg : e.kids) {
        if (arg->kind == Expr::Kind::Unary && arg->text == "&" &&
            arg->kids[0]->kind == Expr::Kind::Ident) {
          assign_count[arg->kids[0]->text]++;
        }
      }
    }
    for (const auto& k : e.kids) scan_expr(*k);
  };

  std::function<void(const Stmt&)> scan_stmt = [&](const Stmt& s) {
    switch (s.kind) {
      case Stmt::Kind::Decl:
        for (const auto& d : s.declarators) {
          if (d.stars > 0 || d.is_array) ctx.pointer_vars.insert(d.name);
          if (d.init) {
            assign_count[d.name]++;
            if (d.init->kind == Expr::Kind::Unary && d.init->text == "&" &&
                d.init->kids[0]->kind == Expr::Kind::Ident) {
              addr_target[d.name] = d.init->kids[0]->text;
            }
            scan_expr(*d.init);
          }
        }
        break;
      case Stmt::Kind::ExprStmt:
        scan_expr(*s.expr);
        break;
      case Stmt::Kind::Return:
        if (s.expr) scan_expr(*s.expr);
        break;
      case Stmt::Kind::If:
        scan_expr(*s.expr);
        scan_stmt(*s.then_branch);
        if (s.else_branch) scan_stmt(*s.else_branch);
        break;
      case Stmt::Kind::While:
        scan_expr(*s.expr);
        scan_stmt(*s.body);
        break;
      case Stmt::Kind::For:
        if (s.for_init) scan_stmt(*s.for_init);
        if (s.expr) scan_expr(*s.expr);
        if (s.for_step) scan_expr(*s.for_step);
        scan_stmt(*s.body);
        break;
      case Stmt::Kind::Block:
        for (const auto& k : s.stmts) scan_stmt(*k);
        break;
      case Stmt::Kind::Empty:
        break;
    }
  };
  scan_stmt(*fn.body);

  for (const auto& [name, target] : addr_target) {
    if (assign_count[name] == 1) ctx.evident_pointee[name] = target;
  }
  return ctx;
}

}  // namespace

std::string render_expr(const Expr& e) {
  std::string out;
  render_rec(e, 0, out);
  return out;
}

const StatementIR* LoweredProgram::find(NodeId id) const {
  for (const auto& fn : functions) {
    for (const auto& s : fn.statements) {
      if (s.id == id) return &s;
    }
  }
  return nullptr;
}

StatementIR* LoweredProgram::find(NodeId id) {
  return const_cast<StatementIR*>(static_cast<const LoweredProgram*>(this)->find(id));
}

LoweredProgram lower(const Program& program, const std::string& file) {
  LoweredProgram out;
  out.file = file;
  Lowerer lw{file};
  for (const auto& fn : program.functions) {
    LoweredFunction lf;
    lf.name = fn.name;
    FnContext ctx = build_context(fn);
    lf.pointer_params = {};
    for (const auto& p : fn.params) {
      if (!p.name.empty()) {
        lf.params.push_back(p.name);
        if (p.is_pointer) lf.pointer_params.insert(p.name);
      }
    }

    // Entry node: the signature, defining the parameters.
    StatementIR sig = lw.base_ir(fn.name, fn.line, StatementKind::Decl);
    {
      std::ostringstream text;
      text << fn.return_type.render() << ' ' << fn.name << '(';
      for (size_t i = 0; i < fn.params.size(); ++i) {
        if (i) text << ", ";
        text << fn.params[i].type.render();
        if (!fn.params[i].name.empty()) {
          if (fn.params[i].type.stars == 0) text << ' ';
          text << fn.params[i].name;
        }
      }
      text << ')';
      sig.text = text.str();
      for (const auto& p : fn.params) {
        if (!p.name.empty()) sig.defs.insert(p.name);
        if (p.is_pointer) sig.is_pointer_op = true;
      }
    }
    lf.statements.push_back(std::move(sig));

    lw.lower_stmt(lf, ctx, *fn.body, lf.body);
    out.functions.push_back(std::move(lf));
  }
  return out;
}

std::vector<std::string> read_labels(const std::string& source, LoweredProgram& program,
                                     LabelMode mode) {
  LexResult lex = tokenize(source);
  std::vector<std::string> warnings;
  std::set<int> used;
  for (auto& fn : program.functions) {
    for (auto& s : fn.statements) {
      if (lex.vuln_marker_lines.count(s.line)) {
        s.label = Label::Vulnerable;
        used.insert(s.line);
      } else {
        s.label = (mode == LabelMode::Training) ? Label::NonVulnerable : Label::Unlabeled;
      }
    }
  }
  for (int line : lex.vuln_marker_lines) {
    if (!used.count(line)) {
      warnings.push_back("line " + std::to_string(line) +
                         ": @vuln marker on a line with no statement; ignored");
    }
  }
  return warnings;
}

}  // namespace mvd::frontend
