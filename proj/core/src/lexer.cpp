#include "mvd/frontend.hpp"

#include <array>
#include <cctype>

namespace mvd::frontend {
namespace {

const std::set<std::string>& keywords() {
  static const std::set<std::string> kw = {
      "void",   "int",      "char",   "float",  "double", "long",
      "short",  "unsigned", "signed", "const",  "struct", "union",
      "enum",   "typedef",  "static", "extern", "if",     "else",
      "while",  "for",      "return", "sizeof", "goto",   "switch",
      "case",   "default",  "break",  "continue", "do",
  };
  return kw;
}

// Multi-character operators, longest first.
const std::array<const char*, 19> kMultiOps = {
    "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&",
    "||", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=",
};

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

LexResult tokenize(const std::string& source) {
  LexResult out;
  size_t i = 0;
  int line = 1;
  const size_t n = source.size();

  auto push = [&](TokenKind kind, std::string text) {
    out.tokens.push_back(Token{kind, std::move(text), line});
  };

  while (i < n) {
    char c = source[i];
    if (c == '\n') {
      ++line;
      ++i;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    // Line comment; a trailing `// @vuln` is an annotation marker.
    if (c == '/' && i + 1 < n && source[i + 1] == '/') {
      size_t end = source.find('\n', i);
      std::string body = source.substr(i + 2, (end == std::string::npos ? n : end) - i - 2);
      if (trim(body) == "@vuln") out.vuln_marker_lines.insert(line);
      i = (end == std::string::npos) ? n : end;
      continue;
    }
    if (c == '/' && i + 1 < n && source[i + 1] == '*') {
      int start_line = line;
      size_t j = i + 2;
      while (j + 1 < n && !(source[j] == '*' && source[j + 1] == '/')) {
        if (source[j] == '\n') ++line;
        ++j;
      }
      if (j + 1 >= n) throw LexError("unterminated block comment", start_line);
      i = j + 2;
      continue;
    }
    if (c == '"' || c == '\'') {
      int start_line = line;
      char quote = c;
      std::string text(1, quote);
      size_t j = i + 1;
      while (j < n && source[j] != quote) {
        if (source[j] == '\n') throw LexError("unterminated string literal", start_line);
        if (source[j] == '\\' && j + 1 < n) {
          text += source[j];
          text += source[j + 1];
          j += 2;
          continue;
        }
        text += source[j];
        ++j;
      }
      if (j >= n) throw LexError("unterminated string literal", start_line);
      text += quote;
      push(TokenKind::Literal, text);
      i = j + 1;
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      size_t j = i;
      bool is_float = false;
      if (c == '0' && j + 1 < n && (source[j + 1] == 'x' || source[j + 1] == 'X')) {
        j += 2;
        while (j < n && std::isxdigit(static_cast<unsigned char>(source[j]))) ++j;
      } else {
        while (j < n && std::isdigit(static_cast<unsigned char>(source[j]))) ++j;
        if (j < n && source[j] == '.') {
          is_float = true;
          ++j;
          while (j < n && std::isdigit(static_cast<unsigned char>(source[j]))) ++j;
        }
      }
      while (j < n && std::isalpha(static_cast<unsigned char>(source[j]))) ++j;  // suffixes
      push(TokenKind::Literal, source.substr(i, j - i));
      (void)is_float;
      i = j;
      continue;
    }
    if (is_ident_start(c)) {
      size_t j = i;
      while (j < n && is_ident_char(source[j])) ++j;
      std::string text = source.substr(i, j - i);
      push(keywords().count(text) ? TokenKind::Keyword : TokenKind::Identifier, text);
      i = j;
      continue;
    }
    bool matched = false;
    for (const char* op : kMultiOps) {
      size_t len = std::char_traits<char>::length(op);
      if (source.compare(i, len, op) == 0) {
        push(TokenKind::Operator, op);
        i += len;
        matched = true;
        break;
      }
    }
    if (matched) continue;
    switch (c) {
      case '(': case ')': case '{': case '}': case '[': case ']': case ';': case ',':
        push(TokenKind::Punctuation, std::string(1, c));
        break;
      case '+': case '-': case '*': case '/': case '%': case '<': case '>':
      case '=': case '!': case '&': case '|': case '^': case '~': case '.':
      case '?': case ':':
        push(TokenKind::Operator, std::string(1, c));
        break;
      default:
        throw LexError(std::string("unexpected character '") + c + "'", line);
    }
    ++i;
  }
  return out;
}

}  // namespace mvd::frontend

namespace mvd {

std::string to_string(StatementKind k) {
  switch (k) {
    case StatementKind::Decl: return "decl";
    case StatementKind::Assign: return "assign";
    case StatementKind::Call: return "call";
    case StatementKind::IfCond: return "if-cond";
    case StatementKind::LoopCond: return "loop-cond";
    case StatementKind::Return: return "return";
    case StatementKind::FreeLike: return "free-like";
    case StatementKind::AllocLike: return "alloc-like";
    case StatementKind::Other: return "other";
  }
  return "other";
}

std::string to_string(Label l) {
  switch (l) {
    case Label::Unlabeled: return "unlabeled";
    case Label::NonVulnerable: return "non-vulnerable";
    case Label::Vulnerable: return "vulnerable";
  }
  return "unlabeled";
}

std::string to_string(EdgeKind k) {
  switch (k) {
    case EdgeKind::Control: return "Control";
    case EdgeKind::Data: return "Data";
    case EdgeKind::Call: return "Call";
    case EdgeKind::Return: return "Return";
  }
  return "Control";
}

std::optional<EdgeKind> edge_kind_from_string(const std::string& s) {
  if (s == "Control") return EdgeKind::Control;
  if (s == "Data") return EdgeKind::Data;
  if (s == "Call") return EdgeKind::Call;
  if (s == "Return") return EdgeKind::Return;
  return std::nullopt;
}

}  // namespace mvd
