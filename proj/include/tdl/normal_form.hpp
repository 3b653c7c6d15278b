#pragma once

// Symbolic simplification of type expressions into sorted conjunctive or
// disjunctive normal form, with optional hierarchy-aware reduction rules and
// memoization of simplified subexpressions.

#include <algorithm>
#include <compare>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "tdl/syntax.hpp"

namespace tdl {

enum class Form { CNF, DNF };

inline const char* form_name(Form f) { return f == Form::CNF ? "cnf" : "dnf"; }

enum class LitKind : std::uint8_t { Type, NegType, Feature, Symbol, String, Number };

/// A possibly negated type symbol, an atom, or an opaque feature-term handle.
struct Literal {
  LitKind kind = LitKind::Type;
  std::string text;
  double number = 0;
  ExprPtr feature;  // only for LitKind::Feature

  static Literal type(std::string n) { return {LitKind::Type, std::move(n), 0, nullptr}; }
  static Literal neg(std::string n) { return {LitKind::NegType, std::move(n), 0, nullptr}; }
  static Literal atom(const AtomValue& a) {
    switch (a.kind) {
      case AtomKind::Symbol: return {LitKind::Symbol, a.text, 0, nullptr};
      case AtomKind::String: return {LitKind::String, a.text, 0, nullptr};
      case AtomKind::Number: return {LitKind::Number, a.text, a.number, nullptr};
    }
    return {};
  }

  bool is_type() const { return kind == LitKind::Type; }
  bool is_negated() const { return kind == LitKind::NegType; }
  bool is_atom() const { return kind == LitKind::Symbol || kind == LitKind::String || kind == LitKind::Number; }
  bool positive() const { return kind != LitKind::NegType; }

  AtomValue atom_value() const {
    switch (kind) {
      case LitKind::Symbol: return AtomValue::symbol(text);
      case LitKind::String: return AtomValue::string(text);
      default: return AtomValue::num(number);
    }
  }

  /// The positive literal underlying a negated one.
  Literal base() const { return kind == LitKind::NegType ? type(text) : *this; }

  friend bool operator==(const Literal& a, const Literal& b) {
    if (a.kind != b.kind) return false;
    return a.kind == LitKind::Number ? a.number == b.number : a.text == b.text;
  }
};

inline std::string print_literal(const Literal& l) {
  switch (l.kind) {
    case LitKind::Type: return l.text;
    case LitKind::NegType: return "~" + l.text;
    case LitKind::Feature: return l.text;
    default: return print_atom(l.atom_value());
  }
}

// ---------------------------------------------------------------------------
// The total order on normal-form terms

/// A view of a normal-form term used for ordering: a literal, or a flat
/// conjunction/disjunction of terms.
struct NfTerm {
  enum class Kind { Lit, And, Or };
  Kind kind = Kind::Lit;
  Literal lit;
  std::vector<NfTerm> items;

  static NfTerm of(Literal l) { return {Kind::Lit, std::move(l), {}}; }
  static NfTerm conj(std::vector<NfTerm> xs) { return {Kind::And, {}, std::move(xs)}; }
  static NfTerm disj(std::vector<NfTerm> xs) { return {Kind::Or, {}, std::move(xs)}; }
};

namespace detail {

// type < negated type < feature term < conjunction < disjunction < symbol < string < number
inline int literal_rank(LitKind k) {
  switch (k) {
    case LitKind::Type: return 0;
    case LitKind::NegType: return 1;
    case LitKind::Feature: return 2;
    case LitKind::Symbol: return 5;
    case LitKind::String: return 6;
    case LitKind::Number: return 7;
  }
  return 0;
}

inline int term_rank(const NfTerm& t) {
  switch (t.kind) {
    case NfTerm::Kind::Lit: return literal_rank(t.lit.kind);
    case NfTerm::Kind::And: return 3;
    case NfTerm::Kind::Or: return 4;
  }
  return 0;
}

}  // namespace detail

inline std::strong_ordering compare_literals(const Literal& a, const Literal& b) {
  int ra = detail::literal_rank(a.kind), rb = detail::literal_rank(b.kind);
  if (ra != rb) return ra <=> rb;
  if (a.kind == LitKind::Number) {
    if (a.number < b.number) return std::strong_ordering::less;
    if (b.number < a.number) return std::strong_ordering::greater;
    return std::strong_ordering::equal;
  }
  return a.text.compare(b.text) <=> 0;
}

/// Total order on normal-form terms. Within a category names compare by
/// character order, numbers numerically and compound terms element-wise
/// with the shorter sequence first on a common prefix.
inline std::strong_ordering compare_nf(const NfTerm& a, const NfTerm& b) {
  int ra = detail::term_rank(a), rb = detail::term_rank(b);
  if (ra != rb) return ra <=> rb;
  if (a.kind == NfTerm::Kind::Lit) return compare_literals(a.lit, b.lit);
  std::size_t n = std::min(a.items.size(), b.items.size());
  for (std::size_t i = 0; i < n; ++i) {
    auto c = compare_nf(a.items[i], b.items[i]);
    if (c != 0) return c;
  }
  return a.items.size() <=> b.items.size();
}

struct LiteralLess {
  bool operator()(const Literal& a, const Literal& b) const { return compare_literals(a, b) < 0; }
};

using LitSet = std::vector<Literal>;

// ---------------------------------------------------------------------------
// NormalForm

/// A sorted CNF (conjunction of clauses) or DNF (disjunction of terms).
/// DNF ⊤ is one empty term and ⊥ no terms; CNF is the dual.
class NormalForm {
 public:
  NormalForm() : form_(Form::DNF), sets_{{}} {}
  NormalForm(Form f, std::vector<LitSet> sets) : form_(f), sets_(std::move(sets)) {}

  static NormalForm top(Form f = Form::DNF) {
    return f == Form::DNF ? NormalForm(f, {LitSet{}}) : NormalForm(f, {});
  }
  static NormalForm bottom(Form f = Form::DNF) {
    return f == Form::DNF ? NormalForm(f, {}) : NormalForm(f, {LitSet{}});
  }
  static NormalForm literal(Literal l, Form f = Form::DNF) { return NormalForm(f, {LitSet{std::move(l)}}); }

  Form form() const { return form_; }
  const std::vector<LitSet>& sets() const { return sets_; }

  bool is_top() const {
    return form_ == Form::DNF ? sets_.size() == 1 && sets_[0].empty() : sets_.empty();
  }
  bool is_bottom() const {
    return form_ == Form::DNF ? sets_.empty() : sets_.size() == 1 && sets_[0].empty();
  }
  bool is_literal() const { return sets_.size() == 1 && sets_[0].size() == 1; }

  std::size_t literal_count() const {
    std::size_t n = 0;
    for (const auto& s : sets_) n += s.size();
    return n;
  }

  /// The term view used by compare_nf.
  NfTerm term() const {
    auto inner = [&](const LitSet& s) {
      if (s.size() == 1) return NfTerm::of(s[0]);
      std::vector<NfTerm> xs;
      for (const auto& l : s) xs.push_back(NfTerm::of(l));
      return form_ == Form::DNF ? NfTerm::conj(std::move(xs)) : NfTerm::disj(std::move(xs));
    };
    if (sets_.size() == 1) return inner(sets_[0]);
    std::vector<NfTerm> xs;
    for (const auto& s : sets_) xs.push_back(inner(s));
    return form_ == Form::DNF ? NfTerm::disj(std::move(xs)) : NfTerm::conj(std::move(xs));
  }

  friend bool operator==(const NormalForm& a, const NormalForm& b) {
    return a.form_ == b.form_ && a.sets_ == b.sets_;
  }

 private:
  Form form_;
  std::vector<LitSet> sets_;
};

inline std::string print_nf(const NormalForm& nf) {
  if (nf.is_top()) return std::string(kTopName);
  if (nf.is_bottom()) return std::string(kBottomName);
  const char* inner_op = nf.form() == Form::DNF ? " & " : " | ";
  const char* outer_op = nf.form() == Form::DNF ? " | " : " & ";
  bool parens = nf.form() == Form::CNF && nf.sets().size() > 1;
  std::string s;
  for (std::size_t i = 0; i < nf.sets().size(); ++i) {
    const auto& set = nf.sets()[i];
    if (i) s += outer_op;
    bool p = parens && set.size() > 1;
    if (p) s += '(';
    for (std::size_t j = 0; j < set.size(); ++j) {
      if (j) s += inner_op;
      s += print_literal(set[j]);
    }
    if (p) s += ')';
  }
  return s;
}

inline std::string print_term(const NfTerm& t) {
  switch (t.kind) {
    case NfTerm::Kind::Lit: return print_literal(t.lit);
    case NfTerm::Kind::And:
    case NfTerm::Kind::Or: {
      std::string s;
      for (std::size_t i = 0; i < t.items.size(); ++i) {
        if (i) s += t.kind == NfTerm::Kind::And ? " & " : " | ";
        bool p = t.items[i].kind != NfTerm::Kind::Lit;
        s += p ? "(" + print_term(t.items[i]) + ")" : print_term(t.items[i]);
      }
      return s;
    }
  }
  return {};
}

// ---------------------------------------------------------------------------
// Semantic oracle

/// Answers order questions about positive literals. The base class knows
/// only syntax: a literal is below itself and distinct atoms are disjoint.
class SemanticOracle {
 public:
  virtual ~SemanticOracle() = default;

  /// a ⊆ b for positive literals.
  virtual bool below(const Literal& a, const Literal& b) const { return a == b; }
  /// a ∩ b = ∅ for positive literals.
  virtual bool apart(const Literal& a, const Literal& b) const {
    return a.is_atom() && b.is_atom() && !(a == b);
  }
  /// The conjunction of these positive literals is empty.
  virtual bool incompatible(std::span<const Literal>) const { return false; }
  /// Extra run-time reduction of a DNF term after the generic rules.
  /// Returns false when the term denotes ⊥.
  virtual bool reduce_term(LitSet&) const { return true; }

  bool entails(const Literal& x, const Literal& y) const {
    if (x.positive() && y.positive()) return below(x, y);
    if (x.positive()) return x.kind != LitKind::Feature && apart(x, y.base());
    if (y.positive()) return false;
    return below(y.base(), x.base());
  }
  bool disjoint(const Literal& x, const Literal& y) const {
    if (x.positive() && y.positive()) return apart(x, y);
    if (x.positive()) return below(x, y.base());
    if (y.positive()) return below(y, x.base());
    return false;
  }
  /// x ∨ y = ⊤
  bool covers(const Literal& x, const Literal& y) const {
    if (x.is_negated() && y.positive()) return below(x.base(), y);
    if (x.is_negated() && y.is_negated()) return apart(x.base(), y.base());
    if (x.positive() && y.is_negated()) return below(y.base(), x);
    return false;
  }
};

class FormTooLarge : public std::runtime_error {
 public:
  explicit FormTooLarge(std::size_t budget)
      : std::runtime_error("normal form exceeds the literal budget of " + std::to_string(budget)) {}
};

// ---------------------------------------------------------------------------
// Negation normal form

/// Expression with negation pushed to literals and xor eliminated.
struct Nnf {
  enum class Kind { Lit, And, Or, Top, Bottom };
  Kind kind = Kind::Top;
  Literal lit;
  std::vector<Nnf> kids;

  static Nnf of(Literal l) { return {Kind::Lit, std::move(l), {}}; }
  static Nnf node(Kind k, std::vector<Nnf> ks) { return {k, {}, std::move(ks)}; }

  std::size_t leaves() const {
    if (kind == Kind::Lit) return 1;
    std::size_t n = 0;
    for (const auto& k : kids) n += k.leaves();
    return n;
  }
};

inline Nnf to_nnf(const ExprPtr& e, bool negate = false) {
  using K = Nnf::Kind;
  switch (e->kind) {
    case ExprKind::TypeName:
      if (e->name == kTopName) return Nnf::node(negate ? K::Bottom : K::Top, {});
      if (e->name == kBottomName) return Nnf::node(negate ? K::Top : K::Bottom, {});
      return Nnf::of(negate ? Literal::neg(e->name) : Literal::type(e->name));
    case ExprKind::Atom:
      if (negate) throw std::invalid_argument("negation applies to type symbols only: ~" + print_atom(e->atom));
      return Nnf::of(Literal::atom(e->atom));
    case ExprKind::FeatureTerm:
    case ExprKind::List:
    case ExprKind::Coref: {
      if (negate) throw std::invalid_argument("negation applies to type symbols only: ~" + print_expr(e));
      Literal l{LitKind::Feature, print_expr(e), 0, e};
      return Nnf::of(std::move(l));
    }
    case ExprKind::Conj:
    case ExprKind::Disj: {
      bool is_and = (e->kind == ExprKind::Conj) != negate;
      std::vector<Nnf> ks;
      for (const auto& a : e->args) ks.push_back(to_nnf(a, negate));
      return Nnf::node(is_and ? K::And : K::Or, std::move(ks));
    }
    case ExprKind::Neg:
      return to_nnf(e->args[0], !negate);
    case ExprKind::Xor: {
      const auto& a = e->args[0];
      const auto& b = e->args[1];
      // a ⊕ b = (a ∧ ¬b) ∨ (¬a ∧ b);  ¬(a ⊕ b) = (a ∧ b) ∨ (¬a ∧ ¬b)
      return Nnf::node(K::Or, {Nnf::node(K::And, {to_nnf(a, false), to_nnf(b, !negate)}),
                               Nnf::node(K::And, {to_nnf(a, true), to_nnf(b, negate)})});
    }
    case ExprKind::TemplateCall:
      throw std::invalid_argument("unexpanded template call @" + e->name);
  }
  return {};
}

inline Nnf to_nnf(const NormalForm& nf) {
  using K = Nnf::Kind;
  if (nf.is_top()) return Nnf::node(K::Top, {});
  if (nf.is_bottom()) return Nnf::node(K::Bottom, {});
  K outer = nf.form() == Form::DNF ? K::Or : K::And;
  K inner = nf.form() == Form::DNF ? K::And : K::Or;
  std::vector<Nnf> outs;
  for (const auto& s : nf.sets()) {
    if (s.size() == 1) {
      outs.push_back(Nnf::of(s[0]));
      continue;
    }
    std::vector<Nnf> ins;
    for (const auto& l : s) ins.push_back(Nnf::of(l));
    outs.push_back(Nnf::node(inner, std::move(ins)));
  }
  return outs.size() == 1 ? std::move(outs[0]) : Nnf::node(outer, std::move(outs));
}

/// Flattens nested conjunctions/disjunctions and sorts operands so that
/// inputs differing only by commutation or reassociation coincide.
inline std::string canonical_key(const Nnf& n);

inline Nnf canonical(const Nnf& n) {
  if (n.kind != Nnf::Kind::And && n.kind != Nnf::Kind::Or) return n;
  std::vector<Nnf> flat;
  for (const auto& k : n.kids) {
    Nnf c = canonical(k);
    if (c.kind == n.kind) {
      for (auto& g : c.kids) flat.push_back(std::move(g));
    } else {
      flat.push_back(std::move(c));
    }
  }
  std::vector<std::pair<std::string, Nnf>> keyed;
  for (auto& k : flat) keyed.emplace_back(canonical_key(k), std::move(k));
  std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  keyed.erase(std::unique(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) { return a.first == b.first; }),
              keyed.end());
  if (keyed.size() == 1) return std::move(keyed[0].second);
  std::vector<Nnf> kids;
  for (auto& [key, k] : keyed) kids.push_back(std::move(k));
  return Nnf::node(n.kind, std::move(kids));
}

/// Canonical text of an NNF with commutative operands sorted; used as the
/// memo key so that permuted inputs share one entry.
inline std::string canonical_key(const Nnf& n) {
  switch (n.kind) {
    case Nnf::Kind::Top: return std::string(kTopName);
    case Nnf::Kind::Bottom: return std::string(kBottomName);
    case Nnf::Kind::Lit: return print_literal(n.lit);
    default: break;
  }
  std::vector<std::string> parts;
  parts.reserve(n.kids.size());
  for (const auto& k : n.kids) parts.push_back(canonical_key(k));
  std::sort(parts.begin(), parts.end());
  parts.erase(std::unique(parts.begin(), parts.end()), parts.end());
  std::string s = n.kind == Nnf::Kind::And ? "&(" : "|(";
  for (std::size_t i = 0; i < parts.size(); ++i) s += (i ? "," : "") + parts[i];
  return s + ")";
}

// ---------------------------------------------------------------------------
// Simplifier

struct MemoStats {
  std::size_t entries = 0;
  std::size_t hits = 0;            // total reuses
  std::size_t reused_entries = 0;  // entries reused at least once
  std::size_t proper_hits = 0;     // reuses whose result is shorter than the input
  std::size_t max_reuse = 0;
  std::map<std::string, std::size_t> histogram;  // reuse-count bucket -> entries

  double proper_percentage() const { return hits ? 100.0 * static_cast<double>(proper_hits) / static_cast<double>(hits) : 0.0; }
};

class Simplifier {
 public:
  explicit Simplifier(const SemanticOracle* oracle = nullptr, bool memoize = true, std::size_t budget = 10000)
      : oracle_(oracle ? oracle : &syntactic_), memoize_(memoize), budget_(budget) {}

  Simplifier(const Simplifier&) = delete;
  Simplifier& operator=(const Simplifier&) = delete;

  bool memoizing() const { return memoize_; }
  std::size_t budget() const { return budget_; }
  void set_oracle(const SemanticOracle* o) { oracle_ = o ? o : &syntactic_; }

  NormalForm simplify(const ExprPtr& e, Form f) { return simplify(to_nnf(e), f); }

  NormalForm simplify(const Nnf& n, Form f) {
    Sets s = run(canonical(n), f);
    return NormalForm(f, std::move(s));
  }

  /// Conjunction of two normal forms, simplified into `f`.
  NormalForm conjoin(const NormalForm& a, const NormalForm& b, Form f) {
    if (a.is_top() && b.form() == f) return b;
    if (b.is_top() && a.form() == f) return a;
    return simplify(Nnf::node(Nnf::Kind::And, {to_nnf(a), to_nnf(b)}), f);
  }

  void clear() { memo_.clear(); }

  MemoStats stats() const {
    MemoStats st;
    st.entries = memo_.size();
    for (const auto& [key, e] : memo_) {
      st.hits += e.hits;
      if (e.hits) ++st.reused_entries;
      if (e.proper) st.proper_hits += e.hits;
      st.max_reuse = std::max(st.max_reuse, e.hits);
      const char* bucket = e.hits == 0 ? "0" : e.hits == 1 ? "1" : e.hits < 10 ? "2-9" : e.hits < 100 ? "10-99" : "100+";
      ++st.histogram[bucket];
    }
    return st;
  }

 private:
  using Sets = std::vector<LitSet>;

  struct Entry {
    Sets result;
    std::size_t hits = 0;
    bool proper = false;
  };

  Sets run(const Nnf& n, Form f) {
    using K = Nnf::Kind;
    bool dnf = f == Form::DNF;
    switch (n.kind) {
      case K::Top: return dnf ? Sets{LitSet{}} : Sets{};
      case K::Bottom: return dnf ? Sets{} : Sets{LitSet{}};
      case K::Lit: return finish(Sets{LitSet{n.lit}}, f);
      default: break;
    }
    std::string key;
    if (memoize_) {
      key = std::string(form_name(f)) + ":" + canonical_key(n);
      auto it = memo_.find(key);
      if (it != memo_.end()) {
        ++it->second.hits;
        return it->second.result;
      }
    }
    // In DNF conjunction distributes (product) and disjunction collects
    // (union); CNF is the dual.
    bool product = (n.kind == K::And) == dnf;
    Sets acc = run(n.kids[0], f);
    for (std::size_t i = 1; i < n.kids.size(); ++i) {
      Sets next = run(n.kids[i], f);
      acc = product ? cross(acc, next, f) : finish(concat(std::move(acc), std::move(next)), f);
    }
    if (memoize_) {
      std::size_t out = 0;
      for (const auto& s : acc) out += s.size();
      memo_[key] = Entry{acc, 0, out < n.leaves()};
    }
    return acc;
  }

  static Sets concat(Sets a, Sets b) {
    a.insert(a.end(), std::make_move_iterator(b.begin()), std::make_move_iterator(b.end()));
    return a;
  }

  Sets cross(const Sets& a, const Sets& b, Form f) {
    Sets out;
    std::size_t lits = 0;
    for (const auto& x : a) {
      for (const auto& y : b) {
        LitSet m;
        m.reserve(x.size() + y.size());
        std::set_union(x.begin(), x.end(), y.begin(), y.end(), std::back_inserter(m), LiteralLess{});
        lits += m.size();
        if (lits > budget_) throw FormTooLarge(budget_);
        out.push_back(std::move(m));
      }
    }
    return finish(std::move(out), f);
  }

  // Reduce one DNF term. Returns false if it denotes ⊥.
  bool reduce_term(LitSet& t) const {
    for (std::size_t i = 0; i < t.size(); ++i)
      for (std::size_t j = i + 1; j < t.size(); ++j)
        if (oracle_->disjoint(t[i], t[j])) return false;
    LitSet pos;
    for (const auto& l : t)
      if (l.positive() && l.kind != LitKind::Feature) pos.push_back(l);
    if (!pos.empty() && oracle_->incompatible(pos)) return false;
    drop_redundant(t, [&](const Literal& keep, const Literal& drop) { return oracle_->entails(keep, drop); });
    return oracle_->reduce_term(t);
  }

  // Reduce one CNF clause. Returns false if it denotes ⊤.
  bool reduce_clause(LitSet& c) const {
    for (std::size_t i = 0; i < c.size(); ++i)
      for (std::size_t j = 0; j < c.size(); ++j)
        if (i != j && oracle_->covers(c[i], c[j])) return false;
    std::erase_if(c, [&](const Literal& l) {
      return l.positive() && l.kind != LitKind::Feature && oracle_->incompatible(std::span<const Literal>(&l, 1));
    });
    // a ∨ b = b when a ⊆ b
    drop_redundant(c, [&](const Literal& keep, const Literal& drop) { return oracle_->entails(drop, keep); });
    return true;
  }

  // Removes literal `drop` when some other literal `keep` makes it redundant.
  template <typename Redundant>
  static void drop_redundant(LitSet& s, Redundant redundant) {
    std::vector<bool> dead(s.size(), false);
    for (std::size_t i = 0; i < s.size(); ++i) {
      for (std::size_t j = 0; j < s.size() && !dead[i]; ++j) {
        if (i == j || dead[j]) continue;
        if (redundant(s[j], s[i])) dead[i] = true;
      }
    }
    LitSet out;
    for (std::size_t i = 0; i < s.size(); ++i)
      if (!dead[i]) out.push_back(std::move(s[i]));
    s = std::move(out);
  }

  // x entails y, set-wise: DNF terms (conjunctions) or CNF clauses.
  bool set_below(const LitSet& x, const LitSet& y, Form f) const {
    if (f == Form::DNF) {
      for (const auto& ly : y) {
        bool ok = std::any_of(x.begin(), x.end(), [&](const Literal& lx) { return oracle_->entails(lx, ly); });
        if (!ok) return false;
      }
      return true;
    }
    for (const auto& lx : x) {
      bool ok = std::any_of(y.begin(), y.end(), [&](const Literal& ly) { return oracle_->entails(lx, ly); });
      if (!ok) return false;
    }
    return true;
  }

  static std::strong_ordering compare_sets(const LitSet& a, const LitSet& b, Form f) {
    auto rank = [&](const LitSet& s) {
      return s.size() == 1 ? detail::literal_rank(s[0].kind) : (f == Form::DNF ? 3 : 4);
    };
    int ra = rank(a), rb = rank(b);
    if (ra != rb) return ra <=> rb;
    std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) {
      auto c = compare_literals(a[i], b[i]);
      if (c != 0) return c;
    }
    return a.size() <=> b.size();
  }

  Sets finish(Sets sets, Form f) {
    bool dnf = f == Form::DNF;
    Sets kept;
    for (auto& s : sets) {
      std::sort(s.begin(), s.end(), LiteralLess{});
      s.erase(std::unique(s.begin(), s.end()), s.end());
      bool alive = dnf ? reduce_term(s) : reduce_clause(s);
      if (!alive) continue;  // ⊥ term / ⊤ clause vanish
      std::sort(s.begin(), s.end(), LiteralLess{});
      if (s.empty()) return Sets{LitSet{}};  // ⊤ term / ⊥ clause absorb everything
      kept.push_back(std::move(s));
    }
    std::sort(kept.begin(), kept.end(), [&](const LitSet& a, const LitSet& b) { return compare_sets(a, b, f) < 0; });
    kept.erase(std::unique(kept.begin(), kept.end()), kept.end());
    // Complement across unit sets: x ∨ ¬x = ⊤ in DNF, x ∧ ¬x = ⊥ in CNF.
    LitSet units;
    for (const auto& s : kept)
      if (s.size() == 1) units.push_back(s[0]);
    for (std::size_t i = 0; i < units.size(); ++i)
      for (std::size_t j = i + 1; j < units.size(); ++j)
        if (dnf ? oracle_->covers(units[i], units[j]) : oracle_->disjoint(units[i], units[j])) return Sets{LitSet{}};
    if (!dnf) {
      LitSet pos;
      for (const auto& l : units)
        if (l.positive() && l.kind != LitKind::Feature) pos.push_back(l);
      if (pos.size() > 1 && oracle_->incompatible(pos)) return Sets{LitSet{}};
    }
    // Absorption: in DNF drop a term that entails another; in CNF drop a
    // clause entailed by another.
    std::vector<bool> dead(kept.size(), false);
    for (std::size_t i = 0; i < kept.size(); ++i) {
      for (std::size_t j = 0; j < kept.size() && !dead[i]; ++j) {
        if (i == j || dead[j]) continue;
        bool absorbed = dnf ? set_below(kept[i], kept[j], f) : set_below(kept[j], kept[i], f);
        if (!absorbed) continue;
        bool mutual = dnf ? set_below(kept[j], kept[i], f) : set_below(kept[i], kept[j], f);
        if (!mutual || j < i) dead[i] = true;
      }
    }
    Sets out;
    std::size_t lits = 0;
    for (std::size_t i = 0; i < kept.size(); ++i) {
      if (dead[i]) continue;
      lits += kept[i].size();
      out.push_back(std::move(kept[i]));
    }
    if (lits > budget_) throw FormTooLarge(budget_);
    return out;
  }

  SemanticOracle syntactic_;
  const SemanticOracle* oracle_;
  bool memoize_;
  std::size_t budget_;
  std::unordered_map<std::string, Entry> memo_;
};

/// Normal form without memoization.
inline NormalForm normalize(const ExprPtr& e, Form f, const SemanticOracle* oracle = nullptr,
                            std::size_t budget = 10000) {
  Simplifier s(oracle, false, budget);
  return s.simplify(e, f);
}

/// Rebuilds an expression tree from a normal form (for printing or re-parsing).
inline ExprPtr to_expr(const NormalForm& nf) {
  if (nf.is_top()) return Expr::type(std::string(kTopName));
  if (nf.is_bottom()) return Expr::type(std::string(kBottomName));
  auto lit = [](const Literal& l) -> ExprPtr {
    switch (l.kind) {
      case LitKind::Type: return Expr::type(l.text);
      case LitKind::NegType: return Expr::neg(Expr::type(l.text));
      case LitKind::Feature: return l.feature;
      default: return Expr::atom_of(l.atom_value());
    }
  };
  bool dnf = nf.form() == Form::DNF;
  std::vector<ExprPtr> outs;
  for (const auto& s : nf.sets()) {
    if (s.size() == 1) {
      outs.push_back(lit(s[0]));
      continue;
    }
    std::vector<ExprPtr> ins;
    for (const auto& l : s) ins.push_back(lit(l));
    outs.push_back(dnf ? Expr::conj(std::move(ins)) : Expr::disj(std::move(ins)));
  }
  if (outs.size() == 1) return outs[0];
  return dnf ? Expr::disj(std::move(outs)) : Expr::conj(std::move(outs));
}

}  // namespace tdl
