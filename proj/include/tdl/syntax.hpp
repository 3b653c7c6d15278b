#pragma once

// Surface syntax of the type description language: tokens, abstract syntax,
// a recursive-descent parser, template expansion and an expression printer.

#include <cctype>
#include <charconv>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace tdl {

/// Source position, 1-based.
struct SourcePos {
  int line = 1;
  int column = 1;
};

/// Any diagnostic raised while reading grammar text.
class SyntaxError : public std::runtime_error {
 public:
  SyntaxError(const std::string& msg, SourcePos pos)
      : std::runtime_error("line " + std::to_string(pos.line) + ", column " +
                           std::to_string(pos.column) + ": " + msg),
        pos_(pos) {}
  SourcePos pos() const { return pos_; }

 private:
  SourcePos pos_;
};

/// Raised by template expansion (unknown template, arity, recursion).
class TemplateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::string_view kTopName = "*top*";
inline constexpr std::string_view kBottomName = "*bottom*";

// ---------------------------------------------------------------------------
// Tokens

enum class Tok {
  Symbol,      // type names, attribute names, keywords
  SymbolAtom,  // 'sg
  String,      // "..."
  Number,      // 3, -1.5
  Coref,       // #x
  Template,    // @name
  And,         // &
  Or,          // |
  Not,         // ~
  Xor,         // (+)
  LBracket,
  RBracket,
  LAngle,
  RAngle,
  LParen,
  RParen,
  Comma,
  Define,      // :=
  Partition,   // :<
  Equals,      // =
  Dot,         // .
};

struct Token {
  Tok kind;
  std::string text;
  SourcePos pos;

  bool operator==(const Token& o) const { return kind == o.kind && text == o.text; }
};

inline const char* token_name(Tok t) {
  switch (t) {
    case Tok::Symbol: return "symbol";
    case Tok::SymbolAtom: return "quoted symbol";
    case Tok::String: return "string";
    case Tok::Number: return "number";
    case Tok::Coref: return "coreference tag";
    case Tok::Template: return "template call";
    case Tok::And: return "'&'";
    case Tok::Or: return "'|'";
    case Tok::Not: return "'~'";
    case Tok::Xor: return "'(+)'";
    case Tok::LBracket: return "'['";
    case Tok::RBracket: return "']'";
    case Tok::LAngle: return "'<'";
    case Tok::RAngle: return "'>'";
    case Tok::LParen: return "'('";
    case Tok::RParen: return "')'";
    case Tok::Comma: return "','";
    case Tok::Define: return "':='";
    case Tok::Partition: return "':<'";
    case Tok::Equals: return "'='";
    case Tok::Dot: return "'.'";
  }
  return "?";
}

inline bool is_symbol_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '\'' ||
         c == '*' || c == '$' || c == '+' || c == '!' || c == '?' ||
         static_cast<unsigned char>(c) >= 0x80;
}

inline bool looks_numeric(std::string_view s) {
  if (s.empty()) return false;
  std::size_t i = 0;
  if (s[0] == '-' || s[0] == '+') i = 1;
  if (i == s.size()) return false;
  bool digits = false, dot = false;
  for (; i < s.size(); ++i) {
    if (std::isdigit(static_cast<unsigned char>(s[i]))) {
      digits = true;
    } else if (s[i] == '.' && !dot) {
      dot = true;
    } else {
      return false;
    }
  }
  return digits && s.back() != '.';
}

/// Splits grammar text into tokens. `;` starts a comment running to the end
/// of the line.
inline std::vector<Token> tokenize(std::string_view src, SourcePos start = {}) {
  std::vector<Token> out;
  SourcePos pos = start;
  std::size_t i = 0;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n && i < src.size(); ++k, ++i) {
      if (src[i] == '\n') {
        ++pos.line;
        pos.column = 1;
      } else {
        ++pos.column;
      }
    }
  };
  auto emit = [&](Tok kind, std::string text, SourcePos at) {
    out.push_back(Token{kind, std::move(text), at});
  };

  while (i < src.size()) {
    char c = src[i];
    SourcePos at = pos;
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    if (c == ';') {
      while (i < src.size() && src[i] != '\n') advance(1);
      continue;
    }
    if (c == '"') {
      std::string text;
      advance(1);
      bool closed = false;
      while (i < src.size()) {
        char d = src[i];
        if (d == '"') {
          closed = true;
          advance(1);
          break;
        }
        if (d == '\\' && i + 1 < src.size()) {
          advance(1);
          d = src[i];
        }
        text.push_back(d);
        advance(1);
      }
      if (!closed) throw SyntaxError("unterminated string", at);
      emit(Tok::String, std::move(text), at);
      continue;
    }
    if (c == '(' && src.substr(i, 3) == "(+)") {
      advance(3);
      emit(Tok::Xor, "(+)", at);
      continue;
    }
    if (c == ':' && i + 1 < src.size() && (src[i + 1] == '=' || src[i + 1] == '<')) {
      Tok k = src[i + 1] == '=' ? Tok::Define : Tok::Partition;
      emit(k, std::string(src.substr(i, 2)), at);
      advance(2);
      continue;
    }
    if (c == '#' || c == '@' || c == '\'') {
      advance(1);
      std::size_t b = i;
      while (i < src.size() && is_symbol_char(src[i])) advance(1);
      if (b == i) throw SyntaxError(std::string("expected a name after '") + c + "'", at);
      Tok k = c == '#' ? Tok::Coref : c == '@' ? Tok::Template : Tok::SymbolAtom;
      emit(k, std::string(src.substr(b, i - b)), at);
      continue;
    }
    if (is_symbol_char(c)) {
      std::size_t b = i;
      while (i < src.size() && is_symbol_char(src[i])) advance(1);
      // Decimal numbers: a dot followed by a digit continues the number.
      if (i + 1 < src.size() && src[i] == '.' &&
          std::isdigit(static_cast<unsigned char>(src[i + 1])) && looks_numeric(src.substr(b, i - b))) {
        advance(1);
        while (i < src.size() && std::isdigit(static_cast<unsigned char>(src[i]))) advance(1);
      }
      std::string text(src.substr(b, i - b));
      Tok k = looks_numeric(text) ? Tok::Number : Tok::Symbol;
      emit(k, std::move(text), at);
      continue;
    }
    Tok k;
    switch (c) {
      case '&': k = Tok::And; break;
      case '|': k = Tok::Or; break;
      case '~': k = Tok::Not; break;
      case '[': k = Tok::LBracket; break;
      case ']': k = Tok::RBracket; break;
      case '<': k = Tok::LAngle; break;
      case '>': k = Tok::RAngle; break;
      case '(': k = Tok::LParen; break;
      case ')': k = Tok::RParen; break;
      case ',': k = Tok::Comma; break;
      case '=': k = Tok::Equals; break;
      case '.': k = Tok::Dot; break;
      default:
        throw SyntaxError(std::string("illegal character '") + c + "'", at);
    }
    emit(k, std::string(1, c), at);
    advance(1);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Abstract syntax

enum class AtomKind { Symbol, String, Number };

struct AtomValue {
  AtomKind kind = AtomKind::Symbol;
  std::string text;    // symbol/string payload, or the canonical number text
  double number = 0;

  static AtomValue symbol(std::string s) { return {AtomKind::Symbol, std::move(s), 0}; }
  static AtomValue string(std::string s) { return {AtomKind::String, std::move(s), 0}; }
  static AtomValue num(double v) {
    std::ostringstream os;
    if (std::floor(v) == v && std::fabs(v) < 1e15) {
      os << static_cast<long long>(v);
    } else {
      os.precision(17);
      os << v;
    }
    return {AtomKind::Number, os.str(), v};
  }

  bool operator==(const AtomValue& o) const {
    if (kind != o.kind) return false;
    return kind == AtomKind::Number ? number == o.number : text == o.text;
  }
};

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

enum class ExprKind { TypeName, Atom, Coref, FeatureTerm, List, Conj, Disj, Xor, Neg, TemplateCall };

/// One node of a type expression. Which fields are meaningful depends on
/// `kind`; the factory functions below are the intended way to build them.
struct Expr {
  ExprKind kind;
  std::string name;                                     // TypeName, Coref, TemplateCall
  AtomValue atom;                                       // Atom
  std::vector<std::pair<std::string, ExprPtr>> features;  // FeatureTerm
  std::vector<ExprPtr> args;  // Conj/Disj/Xor operands, Neg operand, List elements, call args
  ExprPtr tail;               // List tail, may be null

  static ExprPtr type(std::string n) {
    return std::make_shared<Expr>(Expr{ExprKind::TypeName, std::move(n), {}, {}, {}, nullptr});
  }
  static ExprPtr atom_of(AtomValue a) {
    return std::make_shared<Expr>(Expr{ExprKind::Atom, {}, std::move(a), {}, {}, nullptr});
  }
  static ExprPtr coref(std::string tag) {
    return std::make_shared<Expr>(Expr{ExprKind::Coref, std::move(tag), {}, {}, {}, nullptr});
  }
  static ExprPtr feature_term(std::vector<std::pair<std::string, ExprPtr>> fs) {
    return std::make_shared<Expr>(Expr{ExprKind::FeatureTerm, {}, {}, std::move(fs), {}, nullptr});
  }
  static ExprPtr list(std::vector<ExprPtr> elems, ExprPtr tail = nullptr) {
    return std::make_shared<Expr>(Expr{ExprKind::List, {}, {}, {}, std::move(elems), std::move(tail)});
  }
  static ExprPtr nary(ExprKind k, std::vector<ExprPtr> ops) {
    return std::make_shared<Expr>(Expr{k, {}, {}, {}, std::move(ops), nullptr});
  }
  static ExprPtr conj(std::vector<ExprPtr> ops) { return nary(ExprKind::Conj, std::move(ops)); }
  static ExprPtr disj(std::vector<ExprPtr> ops) { return nary(ExprKind::Disj, std::move(ops)); }
  static ExprPtr xor_of(ExprPtr a, ExprPtr b) { return nary(ExprKind::Xor, {std::move(a), std::move(b)}); }
  static ExprPtr neg(ExprPtr a) { return nary(ExprKind::Neg, {std::move(a)}); }
  static ExprPtr call(std::string n, std::vector<ExprPtr> a) {
    return std::make_shared<Expr>(Expr{ExprKind::TemplateCall, std::move(n), {}, {}, std::move(a), nullptr});
  }
};

inline bool structurally_equal(const ExprPtr& a, const ExprPtr& b) {
  if (!a || !b) return !a && !b;
  if (a->kind != b->kind || a->name != b->name) return false;
  if (a->kind == ExprKind::Atom && !(a->atom == b->atom)) return false;
  if (a->features.size() != b->features.size() || a->args.size() != b->args.size()) return false;
  for (std::size_t i = 0; i < a->features.size(); ++i) {
    if (a->features[i].first != b->features[i].first) return false;
    if (!structurally_equal(a->features[i].second, b->features[i].second)) return false;
  }
  for (std::size_t i = 0; i < a->args.size(); ++i)
    if (!structurally_equal(a->args[i], b->args[i])) return false;
  return structurally_equal(a->tail, b->tail);
}

enum class KindHint { Avm, Sort };

struct TypeDef {
  std::string name;
  KindHint kind = KindHint::Avm;
  ExprPtr body;  // null for a bare `sort s.` declaration
};
struct InstanceDef {
  std::string name;
  ExprPtr body;
};
struct TemplateDef {
  std::string name;
  std::vector<std::string> params;
  ExprPtr body;
};
struct IncompatibilityDecl {
  std::vector<std::string> types;
};
struct PartitionDecl {
  std::string supertype;
  std::vector<std::string> members;
};

using DefinitionAst = std::variant<TypeDef, InstanceDef, TemplateDef, IncompatibilityDecl, PartitionDecl>;

/// A definition together with where it started, for diagnostics.
struct Located {
  DefinitionAst def;
  SourcePos pos;
};

// ---------------------------------------------------------------------------
// Parser

namespace detail {

inline bool mentions_structure(const ExprPtr& e) {
  if (!e) return false;
  switch (e->kind) {
    case ExprKind::FeatureTerm:
    case ExprKind::List:
    case ExprKind::Coref:
      return true;
    default:
      break;
  }
  for (const auto& a : e->args)
    if (mentions_structure(a)) return true;
  return false;
}

class Parser {
 public:
  Parser(const std::vector<Token>& toks, bool instances) : toks_(toks), instances_(instances) {}

  std::vector<Located> definitions() {
    std::vector<Located> out;
    while (!at_end()) out.push_back(definition());
    return out;
  }

  ExprPtr lone_expression() {
    ExprPtr e = expr();
    if (!at_end()) fail("end of expression", peek());
    return e;
  }

  bool at_end() const { return i_ >= toks_.size(); }

 private:
  const Token& peek(std::size_t k = 0) const {
    static const Token eof{Tok::Dot, "<end of input>", {}};
    if (i_ + k < toks_.size()) return toks_[i_ + k];
    if (!toks_.empty()) {
      static thread_local Token last;
      last = Token{Tok::Dot, "<end of input>", toks_.back().pos};
      return last;
    }
    return eof;
  }
  bool peek_is(Tok k, std::size_t ahead = 0) const { return i_ + ahead < toks_.size() && toks_[i_ + ahead].kind == k; }
  bool peek_symbol(std::string_view s) const { return peek_is(Tok::Symbol) && toks_[i_].text == s; }

  [[noreturn]] void fail(const std::string& expected, const Token& got) const {
    std::string what = i_ >= toks_.size() ? "end of input" : "'" + got.text + "'";
    throw SyntaxError("unexpected " + what + ", expected " + expected, got.pos);
  }

  Token expect(Tok k) {
    if (!peek_is(k)) fail(token_name(k), peek());
    return toks_[i_++];
  }

  std::string symbol() { return expect(Tok::Symbol).text; }

  Located definition() {
    SourcePos start = peek().pos;
    if (instances_) {
      std::string name = symbol();
      expect(Tok::Define);
      ExprPtr body = expr();
      expect(Tok::Dot);
      return {InstanceDef{std::move(name), std::move(body)}, start};
    }
    if (peek_symbol("bottom") && peek_is(Tok::Equals, 1)) {
      i_ += 2;
      IncompatibilityDecl d;
      d.types.push_back(symbol());
      while (peek_is(Tok::And)) {
        ++i_;
        d.types.push_back(symbol());
      }
      expect(Tok::Dot);
      if (d.types.size() < 2) throw SyntaxError("an incompatibility needs at least two types", start);
      return {std::move(d), start};
    }
    KindHint hint = KindHint::Avm;
    if ((peek_symbol("sort") || peek_symbol("avm")) && peek_is(Tok::Symbol, 1)) {
      hint = toks_[i_].text == "sort" ? KindHint::Sort : KindHint::Avm;
      ++i_;
    }
    std::string name = symbol();
    if (peek_is(Tok::Partition)) {
      ++i_;
      PartitionDecl d{name, {}};
      d.members.push_back(symbol());
      while (peek_is(Tok::Or)) {
        ++i_;
        d.members.push_back(symbol());
      }
      expect(Tok::Dot);
      if (d.members.size() < 2) throw SyntaxError("a partition needs at least two members", start);
      return {std::move(d), start};
    }
    if (peek_is(Tok::Dot)) {
      ++i_;
      return {TypeDef{std::move(name), hint, nullptr}, start};
    }
    if (peek_is(Tok::LParen)) {
      ++i_;
      TemplateDef t{name, {}, nullptr};
      if (!peek_is(Tok::RParen)) {
        t.params.push_back(symbol());
        while (peek_is(Tok::Comma)) {
          ++i_;
          t.params.push_back(symbol());
        }
      }
      expect(Tok::RParen);
      std::set<std::string> seen;
      for (const auto& p : t.params)
        if (!seen.insert(p).second) throw SyntaxError("duplicate template parameter " + p, start);
      expect(Tok::Define);
      t.body = expr();
      expect(Tok::Dot);
      return {std::move(t), start};
    }
    if (!peek_is(Tok::Define)) fail("':=', ':<', '(' or '.'", peek());
    ++i_;
    ExprPtr body = expr();
    expect(Tok::Dot);
    return {TypeDef{std::move(name), hint, std::move(body)}, start};
  }

  // disj := xor { '|' xor }
  ExprPtr expr() {
    std::vector<ExprPtr> ops{xor_expr()};
    while (peek_is(Tok::Or)) {
      ++i_;
      ops.push_back(xor_expr());
    }
    return ops.size() == 1 ? ops[0] : Expr::disj(std::move(ops));
  }

  ExprPtr xor_expr() {
    ExprPtr lhs = conj();
    while (peek_is(Tok::Xor)) {
      Token op = toks_[i_++];
      ExprPtr rhs = conj();
      if (lhs->kind == ExprKind::Coref || rhs->kind == ExprKind::Coref)
        throw SyntaxError("'(+)' over coreference tags is not supported", op.pos);
      lhs = Expr::xor_of(lhs, rhs);
    }
    return lhs;
  }

  ExprPtr conj() {
    std::vector<ExprPtr> ops{unary()};
    while (peek_is(Tok::And)) {
      ++i_;
      ops.push_back(unary());
    }
    return ops.size() == 1 ? ops[0] : Expr::conj(std::move(ops));
  }

  ExprPtr unary() {
    if (peek_is(Tok::Not)) {
      Token op = toks_[i_++];
      ExprPtr e = unary();
      if (mentions_structure(e))
        throw SyntaxError("negation applies to type symbols only, not to feature terms or tags", op.pos);
      return Expr::neg(std::move(e));
    }
    return primary();
  }

  ExprPtr primary() {
    const Token& t = peek();
    if (at_end()) fail("an expression", t);
    switch (t.kind) {
      case Tok::Symbol:
        ++i_;
        return Expr::type(t.text);
      case Tok::SymbolAtom:
        ++i_;
        return Expr::atom_of(AtomValue::symbol(t.text));
      case Tok::String:
        ++i_;
        return Expr::atom_of(AtomValue::string(t.text));
      case Tok::Number: {
        ++i_;
        return Expr::atom_of(AtomValue::num(std::stod(t.text)));
      }
      case Tok::Coref:
        ++i_;
        return Expr::coref(t.text);
      case Tok::Template: {
        ++i_;
        std::vector<ExprPtr> args;
        if (peek_is(Tok::LParen)) {
          ++i_;
          if (!peek_is(Tok::RParen)) {
            args.push_back(expr());
            while (peek_is(Tok::Comma)) {
              ++i_;
              args.push_back(expr());
            }
          }
          expect(Tok::RParen);
        }
        return Expr::call(t.text, std::move(args));
      }
      case Tok::LParen: {
        ++i_;
        ExprPtr e = expr();
        expect(Tok::RParen);
        return e;
      }
      case Tok::LBracket: {
        ++i_;
        std::vector<std::pair<std::string, ExprPtr>> fs;
        std::set<std::string> seen;
        if (!peek_is(Tok::RBracket)) {
          do {
            if (!fs.empty()) ++i_;
            Token attr = expect(Tok::Symbol);
            if (!seen.insert(attr.text).second)
              throw SyntaxError("duplicate attribute " + attr.text + " in feature term", attr.pos);
            fs.emplace_back(attr.text, expr());
          } while (peek_is(Tok::Comma));
        }
        expect(Tok::RBracket);
        return Expr::feature_term(std::move(fs));
      }
      case Tok::LAngle: {
        ++i_;
        std::vector<ExprPtr> elems;
        ExprPtr tail;
        if (!peek_is(Tok::RAngle)) {
          elems.push_back(expr());
          while (peek_is(Tok::Comma)) {
            ++i_;
            elems.push_back(expr());
          }
          if (peek_is(Tok::Dot)) {
            ++i_;
            tail = expr();
          }
        }
        expect(Tok::RAngle);
        return Expr::list(std::move(elems), std::move(tail));
      }
      default:
        fail("an expression", t);
    }
  }

  const std::vector<Token>& toks_;
  std::size_t i_ = 0;
  bool instances_;
};

}  // namespace detail

/// Parses a token sequence into definitions. `instances` selects the
/// instance-section reading where every `name := body.` is an InstanceDef.
inline std::vector<Located> parse_definitions(const std::vector<Token>& tokens, bool instances = false) {
  return detail::Parser(tokens, instances).definitions();
}

inline ExprPtr parse_expression(std::string_view text) {
  auto toks = tokenize(text);
  return detail::Parser(toks, false).lone_expression();
}

// ---------------------------------------------------------------------------
// Grammar files: sections opened by `%instances.`, `%types.` and `%control.`

enum class SectionKind { Types, Instances, Control };

struct Section {
  SectionKind kind;
  std::string text;
  SourcePos start;
};

/// Splits a grammar file at directive lines. Control sections keep their
/// raw text since they are line oriented.
inline std::vector<Section> split_sections(std::string_view src) {
  std::vector<Section> out;
  Section cur{SectionKind::Types, {}, {1, 1}};
  int line = 1;
  std::size_t i = 0;
  while (i <= src.size()) {
    std::size_t nl = src.find('\n', i);
    std::string_view l = src.substr(i, nl == std::string_view::npos ? std::string_view::npos : nl - i);
    std::string_view trimmed = l;
    while (!trimmed.empty() && std::isspace(static_cast<unsigned char>(trimmed.front()))) trimmed.remove_prefix(1);
    while (!trimmed.empty() && std::isspace(static_cast<unsigned char>(trimmed.back()))) trimmed.remove_suffix(1);
    if (!trimmed.empty() && trimmed.front() == '%') {
      std::optional<SectionKind> next;
      if (trimmed == "%instances.") next = SectionKind::Instances;
      else if (trimmed == "%types.") next = SectionKind::Types;
      else if (trimmed == "%control.") next = SectionKind::Control;
      else throw SyntaxError("unknown directive " + std::string(trimmed), {line, 1});
      out.push_back(std::move(cur));
      cur = Section{*next, {}, {line + 1, 1}};
    } else {
      cur.text.append(l);
      cur.text.push_back('\n');
    }
    if (nl == std::string_view::npos) break;
    i = nl + 1;
    ++line;
  }
  out.push_back(std::move(cur));
  return out;
}

// ---------------------------------------------------------------------------
// Templates

namespace detail {

inline ExprPtr substitute(const ExprPtr& e, const std::map<std::string, ExprPtr>& params,
                          const std::map<std::string, std::string>& tags) {
  if (!e) return e;
  switch (e->kind) {
    case ExprKind::TypeName: {
      auto it = params.find(e->name);
      return it == params.end() ? e : it->second;
    }
    case ExprKind::Coref: {
      auto it = tags.find(e->name);
      return it == tags.end() ? e : Expr::coref(it->second);
    }
    case ExprKind::Atom:
      return e;
    default:
      break;
  }
  Expr copy = *e;
  for (auto& [attr, v] : copy.features) v = substitute(v, params, tags);
  for (auto& a : copy.args) a = substitute(a, params, tags);
  copy.tail = substitute(copy.tail, params, tags);
  return std::make_shared<Expr>(std::move(copy));
}

inline void collect_tags(const ExprPtr& e, std::set<std::string>& out) {
  if (!e) return;
  if (e->kind == ExprKind::Coref) out.insert(e->name);
  for (const auto& [attr, v] : e->features) collect_tags(v, out);
  for (const auto& a : e->args) collect_tags(a, out);
  collect_tags(e->tail, out);
}

class TemplateExpander {
 public:
  explicit TemplateExpander(const std::map<std::string, TemplateDef>& templates) : templates_(templates) {}

  ExprPtr run(const ExprPtr& e) {
    if (!e) return e;
    if (e->kind == ExprKind::TemplateCall) {
      auto it = templates_.find(e->name);
      if (it == templates_.end()) throw TemplateError("unknown template @" + e->name);
      const TemplateDef& t = it->second;
      if (t.params.size() != e->args.size())
        throw TemplateError("template @" + e->name + " expects " + std::to_string(t.params.size()) +
                            " argument(s), got " + std::to_string(e->args.size()));
      for (const auto& active : stack_)
        if (active == e->name) throw TemplateError("template @" + e->name + " is recursive");
      std::map<std::string, ExprPtr> params;
      for (std::size_t i = 0; i < t.params.size(); ++i) params[t.params[i]] = run(e->args[i]);
      std::set<std::string> body_tags;
      collect_tags(t.body, body_tags);
      std::map<std::string, std::string> renamed;
      ++instantiations_;
      for (const auto& tag : body_tags) renamed[tag] = tag + "_" + std::to_string(instantiations_);
      stack_.push_back(e->name);
      ExprPtr out = run(substitute(t.body, params, renamed));
      stack_.pop_back();
      return out;
    }
    if (e->kind == ExprKind::TypeName || e->kind == ExprKind::Atom || e->kind == ExprKind::Coref) return e;
    Expr copy = *e;
    bool changed = false;
    for (auto& [attr, v] : copy.features) {
      auto n = run(v);
      changed |= n != v;
      v = n;
    }
    for (auto& a : copy.args) {
      auto n = run(a);
      changed |= n != a;
      a = n;
    }
    auto nt = run(copy.tail);
    changed |= nt != copy.tail;
    copy.tail = nt;
    return changed ? std::make_shared<Expr>(std::move(copy)) : e;
  }

 private:
  const std::map<std::string, TemplateDef>& templates_;
  std::vector<std::string> stack_;
  int instantiations_ = 0;
};

}  // namespace detail

/// Replaces every template call in a definition by the instantiated body.
/// Coreference tags in a template body are renamed per instantiation.
inline DefinitionAst expand_templates(const DefinitionAst& ast, const std::map<std::string, TemplateDef>& templates) {
  detail::TemplateExpander ex(templates);
  return std::visit(
      [&](const auto& d) -> DefinitionAst {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, TypeDef> || std::is_same_v<T, InstanceDef>) {
          T copy = d;
          copy.body = ex.run(d.body);
          return copy;
        } else if constexpr (std::is_same_v<T, TemplateDef>) {
          // Calls inside a template body are checked for recursion by
          // expanding them with the template itself on the stack.
          TemplateDef copy = d;
          copy.body = ex.run(Expr::call(d.name, [&] {
                           std::vector<ExprPtr> a;
                           for (const auto& p : d.params) a.push_back(Expr::type(p));
                           return a;
                         }()));
          return copy;
        } else {
          return d;
        }
      },
      ast);
}

inline ExprPtr expand_templates(const ExprPtr& e, const std::map<std::string, TemplateDef>& templates) {
  return detail::TemplateExpander(templates).run(e);
}

// ---------------------------------------------------------------------------
// Printing

inline std::string quote_string(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline std::string print_atom(const AtomValue& a) {
  switch (a.kind) {
    case AtomKind::Symbol: return "'" + a.text;
    case AtomKind::String: return quote_string(a.text);
    case AtomKind::Number: return a.text;
  }
  return a.text;
}

namespace detail {

inline int precedence(ExprKind k) {
  switch (k) {
    case ExprKind::Disj: return 1;
    case ExprKind::Xor: return 2;
    case ExprKind::Conj: return 3;
    case ExprKind::Neg: return 4;
    default: return 5;
  }
}

inline void print(std::ostream& os, const ExprPtr& e, int context);

inline void print_child(std::ostream& os, const ExprPtr& child, int parent_prec, bool allow_equal) {
  int p = precedence(child->kind);
  bool parens = p < parent_prec || (p == parent_prec && !allow_equal);
  if (parens) os << '(';
  print(os, child, 0);
  if (parens) os << ')';
}

inline void print(std::ostream& os, const ExprPtr& e, int /*context*/) {
  switch (e->kind) {
    case ExprKind::TypeName: os << e->name; return;
    case ExprKind::Atom: os << print_atom(e->atom); return;
    case ExprKind::Coref: os << '#' << e->name; return;
    case ExprKind::FeatureTerm: {
      os << '[';
      for (std::size_t i = 0; i < e->features.size(); ++i) {
        if (i) os << ", ";
        os << e->features[i].first << ' ';
        print(os, e->features[i].second, 0);
      }
      os << ']';
      return;
    }
    case ExprKind::List: {
      os << '<';
      for (std::size_t i = 0; i < e->args.size(); ++i) {
        os << (i ? ", " : " ");
        print(os, e->args[i], 0);
      }
      if (e->tail) {
        os << " . ";
        print(os, e->tail, 0);
      }
      os << " >";
      return;
    }
    case ExprKind::Conj:
    case ExprKind::Disj: {
      const char* op = e->kind == ExprKind::Conj ? " & " : " | ";
      int prec = precedence(e->kind);
      for (std::size_t i = 0; i < e->args.size(); ++i) {
        if (i) os << op;
        print_child(os, e->args[i], prec, false);
      }
      return;
    }
    case ExprKind::Xor:
      print_child(os, e->args[0], 2, true);
      os << " (+) ";
      print_child(os, e->args[1], 2, false);
      return;
    case ExprKind::Neg:
      os << '~';
      print_child(os, e->args[0], 4, true);
      return;
    case ExprKind::TemplateCall: {
      os << '@' << e->name << '(';
      for (std::size_t i = 0; i < e->args.size(); ++i) {
        if (i) os << ", ";
        print(os, e->args[i], 0);
      }
      os << ')';
      return;
    }
  }
}

}  // namespace detail

inline std::string print_expr(const ExprPtr& e) {
  if (!e) return std::string(kTopName);
  std::ostringstream os;
  detail::print(os, e, 0);
  return os.str();
}

inline std::string print_definition(const DefinitionAst& d) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, TypeDef>) {
          std::string head = (x.kind == KindHint::Sort ? "sort " : "") + x.name;
          return x.body ? head + " := " + print_expr(x.body) + "." : head + ".";
        } else if constexpr (std::is_same_v<T, InstanceDef>) {
          return x.name + " := " + print_expr(x.body) + ".";
        } else if constexpr (std::is_same_v<T, TemplateDef>) {
          std::string s = x.name + "(";
          for (std::size_t i = 0; i < x.params.size(); ++i) s += (i ? ", " : "") + x.params[i];
          return s + ") := " + print_expr(x.body) + ".";
        } else if constexpr (std::is_same_v<T, IncompatibilityDecl>) {
          std::string s = "bottom = ";
          for (std::size_t i = 0; i < x.types.size(); ++i) s += (i ? " & " : "") + x.types[i];
          return s + ".";
        } else {
          std::string s = x.supertype + " :< ";
          for (std::size_t i = 0; i < x.members.size(); ++i) s += (i ? " | " : "") + x.members[i];
          return s + ".";
        }
      },
      d);
}

inline bool structurally_equal(const DefinitionAst& a, const DefinitionAst& b) {
  if (a.index() != b.index()) return false;
  return std::visit(
      [&](const auto& x) -> bool {
        using T = std::decay_t<decltype(x)>;
        const auto& y = std::get<T>(b);
        if constexpr (std::is_same_v<T, TypeDef>) {
          return x.name == y.name && x.kind == y.kind && structurally_equal(x.body, y.body);
        } else if constexpr (std::is_same_v<T, InstanceDef>) {
          return x.name == y.name && structurally_equal(x.body, y.body);
        } else if constexpr (std::is_same_v<T, TemplateDef>) {
          return x.name == y.name && x.params == y.params && structurally_equal(x.body, y.body);
        } else if constexpr (std::is_same_v<T, IncompatibilityDecl>) {
          return x.types == y.types;
        } else {
          return x.supertype == y.supertype && x.members == y.members;
        }
      },
      a);
}

}  // namespace tdl
