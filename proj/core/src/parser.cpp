#include "mvd/frontend.hpp"

#include <sstream>

namespace mvd::frontend {
namespace {

const std::set<std::string>& type_keywords() {
  static const std::set<std::string> kw = {
      "void", "int", "char", "float", "double", "long", "short",
      "unsigned", "signed", "const", "struct",
  };
  return kw;
}

const std::set<std::string>& unsupported_keywords() {
  static const std::set<std::string> kw = {
      "goto", "switch", "case", "default", "break", "continue",
      "do", "typedef", "union", "enum", "static", "extern",
  };
  return kw;
}

struct Parser {
  const std::vector<Token>& toks;
  size_t pos = 0;

  explicit Parser(const std::vector<Token>& t) : toks(t) {}

  const Token* peek(int ahead = 0) const {
    size_t p = pos + static_cast<size_t>(ahead);
    return p < toks.size() ? &toks[p] : nullptr;
  }
  int line() const {
    if (const Token* t = peek()) return t->line;
    return toks.empty() ? 1 : toks.back().line;
  }
  bool at(const std::string& text) const {
    const Token* t = peek();
    return t && t->text == text;
  }
  bool at_kind(TokenKind k) const {
    const Token* t = peek();
    return t && t->kind == k;
  }
  Token next() {
    if (pos >= toks.size()) throw ParseError("unexpected end of input", line());
    return toks[pos++];
  }
  Token expect(const std::string& text) {
    if (!at(text)) {
      throw ParseError("expected '" + text + "'" +
                           (peek() ? " before '" + peek()->text + "'" : ""),
                       line());
    }
    return next();
  }
  void check_supported() const {
    const Token* t = peek();
    if (t && t->kind == TokenKind::Keyword && unsupported_keywords().count(t->text)) {
      throw ParseError("unsupported construct: " + t->text, t->line);
    }
  }

  bool at_type_start() const {
    const Token* t = peek();
    return t && t->kind == TokenKind::Keyword && type_keywords().count(t->text);
  }

  TypeSpec parse_type_base() {
    TypeSpec ty;
    std::ostringstream base;
    bool first = true;
    while (at_type_start()) {
      Token t = next();
      if (t.text == "const") continue;  // const is accepted and dropped
      if (!first) base << ' ';
      base << t.text;
      first = false;
      if (t.text == "struct") {
        if (!at_kind(TokenKind::Identifier)) throw ParseError("expected struct tag", line());
        base << ' ' << next().text;
      }
    }
    ty.base = base.str();
    if (ty.base.empty()) throw ParseError("expected type name", line());
    return ty;
  }

  int parse_stars() {
    int stars = 0;
    while (at("*")) {
      next();
      ++stars;
    }
    return stars;
  }

  TypeSpec parse_full_type() {
    TypeSpec ty = parse_type_base();
    ty.stars = parse_stars();
    return ty;
  }

  // A cast or sizeof type operand: type keywords followed by stars.
  bool looks_like_type(int ahead = 0) const {
    const Token* t = peek(ahead);
    return t && t->kind == TokenKind::Keyword && type_keywords().count(t->text);
  }

  ExprPtr make(Expr::Kind k, std::string text, int ln) {
    auto e = std::make_unique<Expr>();
    e->kind = k;
    e->text = std::move(text);
    e->line = ln;
    return e;
  }

  ExprPtr parse_primary() {
    check_supported();
    const Token* t = peek();
    if (!t) throw ParseError("unexpected end of expression", line());
    int ln = t->line;
    if (t->text == "(") {
      // Either a parenthesized expression or a cast.
      if (looks_like_type(1)) {
        next();  // (
        TypeSpec ty = parse_full_type();
        expect(")");
        ExprPtr e = make(Expr::Kind::Cast, ty.render(), ln);
        e->kids.push_back(parse_unary());
        return e;
      }
      next();
      ExprPtr inner = parse_assignment();
      expect(")");
      return inner;
    }
    if (t->kind == TokenKind::Keyword && t->text == "sizeof") {
      next();
      expect("(");
      ExprPtr e;
      if (looks_like_type()) {
        TypeSpec ty = parse_full_type();
        e = make(Expr::Kind::SizeofType, ty.render(), ln);
      } else {
        e = make(Expr::Kind::SizeofExpr, "", ln);
        e->kids.push_back(parse_assignment());
      }
      expect(")");
      return parse_postfix_tail(std::move(e));
    }
    if (t->kind == TokenKind::Literal) {
      Token tok = next();
      Expr::Kind k = Expr::Kind::IntLit;
      if (!tok.text.empty() && tok.text[0] == '"') k = Expr::Kind::StrLit;
      else if (!tok.text.empty() && tok.text[0] == '\'') k = Expr::Kind::CharLit;
      else if (tok.text.find('.') != std::string::npos) k = Expr::Kind::FloatLit;
      return parse_postfix_tail(make(k, tok.text, ln));
    }
    if (t->kind == TokenKind::Identifier) {
      Token tok = next();
      if (at("(")) {
        next();
        ExprPtr call = make(Expr::Kind::Call, tok.text, ln);
        if (!at(")")) {
          while (true) {
            call->kids.push_back(parse_assignment());
            if (at(",")) { next(); continue; }
            break;
          }
        }
        expect(")");
        return parse_postfix_tail(std::move(call));
      }
      return parse_postfix_tail(make(Expr::Kind::Ident, tok.text, ln));
    }
    if (t->kind == TokenKind::Keyword) {
      throw ParseError("unsupported construct: " + t->text, t->line);
    }
    throw ParseError("unexpected token '" + t->text + "' in expression", t->line);
  }

  ExprPtr parse_postfix_tail(ExprPtr base) {
    while (true) {
      if (at("[")) {
        int ln = line();
        next();
        ExprPtr e = make(Expr::Kind::Index, "", ln);
        e->kids.push_back(std::move(base));
        e->kids.push_back(parse_assignment());
        expect("]");
        base = std::move(e);
        continue;
      }
      if (at(".") || at("->")) {
        bool arrow = at("->");
        int ln = line();
        next();
        if (!at_kind(TokenKind::Identifier)) throw ParseError("expected member name", line());
        Token m = next();
        ExprPtr e = make(Expr::Kind::Member, m.text, ln);
        e->arrow = arrow;
        e->kids.push_back(std::move(base));
        base = std::move(e);
        continue;
      }
      if (at("++") || at("--")) {
        throw ParseError("unsupported construct: increment/decrement", line());
      }
      break;
    }
    return base;
  }

  ExprPtr parse_unary() {
    const Token* t = peek();
    if (t && (t->text == "-" || t->text == "!" || t->text == "~" || t->text == "*" ||
              t->text == "&") &&
        t->kind == TokenKind::Operator) {
      int ln = t->line;
      std::string op = next().text;
      ExprPtr e = make(Expr::Kind::Unary, op, ln);
      e->kids.push_back(parse_unary());
      return e;
    }
    if (t && (t->text == "++" || t->text == "--")) {
      throw ParseError("unsupported construct: increment/decrement", t->line);
    }
    return parse_primary();
  }

  // Precedence-climbing over binary operators.
  int binary_precedence(const std::string& op) const {
    if (op == "*" || op == "/" || op == "%") return 10;
    if (op == "+" || op == "-") return 9;
    if (op == "<<" || op == ">>") return 8;
    if (op == "<" || op == ">" || op == "<=" || op == ">=") return 7;
    if (op == "==" || op == "!=") return 6;
    if (op == "&") return 5;
    if (op == "^") return 4;
    if (op == "|") return 3;
    if (op == "&&") return 2;
    if (op == "||") return 1;
    return -1;
  }

  ExprPtr parse_binary(int min_prec) {
    ExprPtr lhs = parse_unary();
    while (true) {
      const Token* t = peek();
      if (!t || t->kind != TokenKind::Operator) break;
      if (t->text == "?" || t->text == ":")
        throw ParseError("unsupported construct: conditional operator", t->line);
      int prec = binary_precedence(t->text);
      if (prec < min_prec) break;
      std::string op = next().text;
      ExprPtr rhs = parse_binary(prec + 1);
      ExprPtr e = make(Expr::Kind::Binary, op, lhs->line);
      e->kids.push_back(std::move(lhs));
      e->kids.push_back(std::move(rhs));
      lhs = std::move(e);
    }
    return lhs;
  }

  ExprPtr parse_assignment() {
    ExprPtr lhs = parse_binary(1);
    if (at("=")) {
      int ln = line();
      next();
      ExprPtr rhs = parse_assignment();
      ExprPtr e = make(Expr::Kind::Assign, "=", ln);
      e->kids.push_back(std::move(lhs));
      e->kids.push_back(std::move(rhs));
      return e;
    }
    const Token* t = peek();
    if (t && t->kind == TokenKind::Operator &&
        (t->text == "+=" || t->text == "-=" || t->text == "*=" || t->text == "/=" ||
         t->text == "%=" || t->text == "&=" || t->text == "|=" || t->text == "^=")) {
      throw ParseError("unsupported construct: compound assignment", t->line);
    }
    return lhs;
  }

  StmtPtr make_stmt(Stmt::Kind k, int ln) {
    auto s = std::make_unique<Stmt>();
    s->kind = k;
    s->line = ln;
    return s;
  }

  StmtPtr parse_decl_stmt() {
    int ln = line();
    StmtPtr s = make_stmt(Stmt::Kind::Decl, ln);
    s->type = parse_type_base();
    while (true) {
      Declarator d;
      d.line = line();
      d.stars = parse_stars();
      if (!at_kind(TokenKind::Identifier)) throw ParseError("expected declarator name", line());
      d.name = next().text;
      if (at("[")) {
        next();
        d.is_array = true;
        if (!at("]")) d.array_size = parse_assignment();
        expect("]");
      }
      if (at("=")) {
        next();
        d.init = parse_assignment();
      }
      s->declarators.push_back(std::move(d));
      if (at(",")) { next(); continue; }
      break;
    }
    expect(";");
    return s;
  }

  StmtPtr parse_stmt() {
    check_supported();
    const Token* t = peek();
    if (!t) throw ParseError("unexpected end of input in statement", line());
    int ln = t->line;
    if (t->text == "{") return parse_block();
    if (t->text == ";") {
      next();
      return make_stmt(Stmt::Kind::Empty, ln);
    }
    if (at_type_start()) return parse_decl_stmt();
    if (t->kind == TokenKind::Keyword && t->text == "if") {
      next();
      StmtPtr s = make_stmt(Stmt::Kind::If, ln);
      expect("(");
      s->expr = parse_assignment();
      expect(")");
      s->then_branch = parse_stmt();
      if (at("else")) {
        next();
        s->else_branch = parse_stmt();
      }
      return s;
    }
    if (t->kind == TokenKind::Keyword && t->text == "while") {
      next();
      StmtPtr s = make_stmt(Stmt::Kind::While, ln);
      expect("(");
      s->expr = parse_assignment();
      expect(")");
      s->body = parse_stmt();
      return s;
    }
    if (t->kind == TokenKind::Keyword && t->text == "for") {
      next();
      StmtPtr s = make_stmt(Stmt::Kind::For, ln);
      expect("(");
      if (!at(";")) {
        if (at_type_start()) {
          s->for_init = parse_decl_stmt();  // consumes its ';'
        } else {
          StmtPtr init = make_stmt(Stmt::Kind::ExprStmt, line());
          init->expr = parse_assignment();
          s->for_init = std::move(init);
          expect(";");
        }
      } else {
        expect(";");
      }
      if (!at(";")) s->expr = parse_assignment();
      expect(";");
      if (!at(")")) s->for_step = parse_assignment();
      expect(")");
      s->body = parse_stmt();
      return s;
    }
    if (t->kind == TokenKind::Keyword && t->text == "return") {
      next();
      StmtPtr s = make_stmt(Stmt::Kind::Return, ln);
      if (!at(";")) s->expr = parse_assignment();
      expect(";");
      return s;
    }
    StmtPtr s = make_stmt(Stmt::Kind::ExprStmt, ln);
    s->expr = parse_assignment();
    expect(";");
    return s;
  }

  StmtPtr parse_block() {
    int ln = line();
    expect("{");
    StmtPtr b = make_stmt(Stmt::Kind::Block, ln);
    while (!at("}")) {
      if (!peek()) throw ParseError("unterminated block", ln);
      b->stmts.push_back(parse_stmt());
    }
    expect("}");
    return b;
  }

  Function parse_function() {
    Function fn;
    fn.line = line();
    fn.return_type = parse_full_type();
    if (!at_kind(TokenKind::Identifier)) throw ParseError("expected function name", line());
    fn.name = next().text;
    expect("(");
    if (!at(")")) {
      // `void` alone means an empty parameter list.
      if (at("void") && peek(1) && peek(1)->text == ")") {
        next();
      } else {
        while (true) {
          Param p;
          p.line = line();
          p.type = parse_full_type();
          if (at_kind(TokenKind::Identifier)) p.name = next().text;
          if (at("[")) {
            next();
            if (!at("]")) parse_assignment();
            expect("]");
            p.is_pointer = true;
          }
          p.is_pointer = p.is_pointer || p.type.stars > 0;
          fn.params.push_back(std::move(p));
          if (at(",")) { next(); continue; }
          break;
        }
      }
    }
    expect(")");
    fn.body = parse_block();
    return fn;
  }
};

void dump_expr(const Expr& e, std::ostringstream& os);

void dump_stmt(const Stmt& s, std::ostringstream& os) {
  os << '(' << static_cast<int>(s.kind) << '@' << s.line;
  switch (s.kind) {
    case Stmt::Kind::Decl:
      os << ' ' << s.type.render();
      for (const auto& d : s.declarators) {
        os << " [" << std::string(static_cast<size_t>(d.stars), '*') << d.name;
        if (d.is_array) {
          os << "[]";
          if (d.array_size) { os << ':'; dump_expr(*d.array_size, os); }
        }
        if (d.init) { os << '='; dump_expr(*d.init, os); }
        os << ']';
      }
      break;
    case Stmt::Kind::ExprStmt:
    case Stmt::Kind::Return:
      if (s.expr) { os << ' '; dump_expr(*s.expr, os); }
      break;
    case Stmt::Kind::If:
      os << ' '; dump_expr(*s.expr, os);
      os << ' '; dump_stmt(*s.then_branch, os);
      if (s.else_branch) { os << ' '; dump_stmt(*s.else_branch, os); }
      break;
    case Stmt::Kind::While:
      os << ' '; dump_expr(*s.expr, os);
      os << ' '; dump_stmt(*s.body, os);
      break;
    case Stmt::Kind::For:
      if (s.for_init) { os << " init:"; dump_stmt(*s.for_init, os); }
      if (s.expr) { os << " cond:"; dump_expr(*s.expr, os); }
      if (s.for_step) { os << " step:"; dump_expr(*s.for_step, os); }
      os << ' '; dump_stmt(*s.body, os);
      break;
    case Stmt::Kind::Block:
      for (const auto& k : s.stmts) { os << ' '; dump_stmt(*k, os); }
      break;
    case Stmt::Kind::Empty:
      break;
  }
  os << ')';
}

void dump_expr(const Expr& e, std::ostringstream& os) {
  os << '(' << static_cast<int>(e.kind) << ':' << e.text;
  if (e.kind == Expr::Kind::Member) os << (e.arrow ? "->" : ".");
  for (const auto& k : e.kids) dump_expr(*k, os);
  os << ')';
}

}  // namespace

std::string TypeSpec::render() const {
  std::string s = base;
  for (int i = 0; i < stars; ++i) s += (i == 0 ? " *" : "*");
  return s;
}

Program parse(const std::vector<Token>& tokens) {
  Parser p(tokens);
  Program prog;
  std::set<std::string> names;
  while (p.peek()) {
    p.check_supported();
    Function fn = p.parse_function();
    if (!names.insert(fn.name).second) {
      throw ParseError("duplicate function name '" + fn.name + "'", fn.line);
    }
    prog.functions.push_back(std::move(fn));
  }
  return prog;
}

std::string dump(const Program& program) {
  std::ostringstream os;
  for (const auto& fn : program.functions) {
    os << "(fn " << fn.name << '@' << fn.line << " ret:" << fn.return_type.render();
    for (const auto& p : fn.params) {
      os << " (param " << p.type.render() << ' ' << p.name << (p.is_pointer ? " ptr" : "")
         << ')';
    }
    os << ' ';
    dump_stmt(*fn.body, os);
    os << ")\n";
  }
  return os.str();
}

}  // namespace mvd::frontend
