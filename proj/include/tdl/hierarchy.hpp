#pragma once

// The type hierarchy: definitions are decomposed into pure conjunctions or
// disjunctions of type symbols (introducing intermediate types), the order
// is encoded as bit-set codes, and GLB/LUB/subsumption become bit operations
// plus decoding. Incompatibility declarations are propagated downwards.

#include <algorithm>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "tdl/code.hpp"
#include "tdl/normal_form.hpp"
#include "tdl/syntax.hpp"

namespace tdl {

using TypeId = std::uint32_t;

enum class TypeKind { Avm, Sort, Builtin, Intermediate };

inline const char* kind_name(TypeKind k) {
  switch (k) {
    case TypeKind::Avm: return "avm";
    case TypeKind::Sort: return "sort";
    case TypeKind::Builtin: return "builtin";
    case TypeKind::Intermediate: return "intermediate";
  }
  return "?";
}

enum class Encoding { TransitiveClosure, Compact };

class HierarchyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct HierarchyEntry {
  std::string name;
  TypeKind kind = TypeKind::Avm;
  Code code;
  ExprPtr skeleton;  // feature-constraint part of the definition, unexpanded
  std::vector<TypeId> conj_parents;
  std::vector<TypeId> disj_alternatives;
  std::vector<TypeId> conj_members;  // for conjunction intermediates: the flat element set
  std::optional<TypeId> complement_of;  // for |~t|
  bool alternatives_from_partition = false;
  bool recursive = false;
  bool defined = false;
  bool live = false;
  bool predefined = false;

  bool sort_like() const { return kind == TypeKind::Sort || kind == TypeKind::Builtin; }
  bool disjunctive() const { return !disj_alternatives.empty(); }
};

/// A materialized incompatible set; `origin` indexes the declaration it was
/// propagated from.
struct BottomRecord {
  std::vector<TypeId> types;
  std::size_t origin = 0;
};

using Declaration = std::variant<TypeDef, IncompatibilityDecl, PartitionDecl>;

class Hierarchy {
 public:
  static constexpr TypeId kTop = 0;

  explicit Hierarchy(Form definition_form = Form::CNF, Encoding enc = Encoding::TransitiveClosure)
      : form_(definition_form), encoding_(enc) {
    auto sym = [](const char* s) { return std::string(s); };
    prelude_ = {
        TypeDef{std::string(kTopName), KindHint::Avm, nullptr},
        TypeDef{sym("symbol"), KindHint::Sort, nullptr},
        TypeDef{sym("string"), KindHint::Sort, nullptr},
        TypeDef{sym("number"), KindHint::Sort, nullptr},
        TypeDef{sym("list"), KindHint::Avm, nullptr},
        TypeDef{sym("cons"), KindHint::Avm, parse_expression("list & [FIRST *top*, REST list]")},
        TypeDef{sym("null-list"), KindHint::Avm, parse_expression("list")},
        IncompatibilityDecl{{sym("cons"), sym("null-list")}},
    };
    rederive();
  }

  Hierarchy(const Hierarchy& o) { copy_from(o); }
  Hierarchy& operator=(const Hierarchy& o) {
    if (this != &o) copy_from(o);
    return *this;
  }

  // -- configuration -------------------------------------------------------

  Form definition_form() const { return form_; }
  Encoding encoding() const { return encoding_; }
  void set_encoding(Encoding e) {
    std::lock_guard lock(mu_);
    encoding_ = e;
    dirty_ = true;
  }

  /// Bumped on every change; caches keyed on a hierarchy compare against it.
  std::uint64_t generation() const { return generation_; }

  // -- definitions ---------------------------------------------------------

  /// Enters a type definition, incompatibility or partition. Redefining an
  /// already defined type recomputes everything that depends on it.
  void define(const DefinitionAst& ast) {
    std::visit(
        [&](const auto& d) {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, TypeDef> || std::is_same_v<T, IncompatibilityDecl> ||
                        std::is_same_v<T, PartitionDecl>) {
            define(Declaration{d});
          } else {
            throw HierarchyError("instances and templates are not entered into the type hierarchy");
          }
        },
        ast);
  }

  void define(const Declaration& decl) {
    std::lock_guard lock(mu_);
    if (const auto* td = std::get_if<TypeDef>(&decl)) {
      auto it = ids_.find(td->name);
      if (it != ids_.end() && entries_[it->second].predefined)
        throw HierarchyError("cannot redefine predefined type " + td->name);
      auto pos = defining_decl(td->name);
      if (pos) {
        redefine_locked(*pos, decl);
        return;
      }
    }
    log_.push_back(decl);
    std::size_t known = entries_.size();
    try {
      apply(decl);
      validate_last();
    } catch (...) {
      log_.pop_back();
      rederive();
      throw;
    }
    ++generation_;
    if (!try_incremental_leaf(known)) dirty_ = true;
  }

  bool is_defined(const std::string& name) const {
    auto id = find(name);
    return id && entries_[*id].defined;
  }

  /// The set of types whose meaning depends on `t`: its conjunctive
  /// subtypes, its alternatives if it is disjunctive, and every type using
  /// one of these in its definition, transitively.
  std::set<TypeId> dependents(TypeId t) const {
    std::lock_guard lock(mu_);
    return dependents_locked(t);
  }

  // -- lookup --------------------------------------------------------------

  std::optional<TypeId> find(const std::string& name) const {
    auto it = ids_.find(name);
    if (it == ids_.end() || !entries_[it->second].live) return std::nullopt;
    return it->second;
  }
  TypeId id(const std::string& name) const {
    auto t = find(name);
    if (!t) throw HierarchyError("unknown type " + name);
    return *t;
  }
  const HierarchyEntry& entry(TypeId t) const { return entries_.at(t); }
  const std::string& name(TypeId t) const { return entries_.at(t).name; }
  std::size_t capacity() const { return entries_.size(); }

  std::vector<TypeId> live_types() const {
    std::vector<TypeId> out;
    for (TypeId i = 0; i < entries_.size(); ++i)
      if (entries_[i].live) out.push_back(i);
    return out;
  }

  /// User-visible types: not intermediate, not predefined.
  std::vector<TypeId> user_types() const {
    std::vector<TypeId> out;
    for (TypeId i = 0; i < entries_.size(); ++i) {
      const auto& e = entries_[i];
      if (e.live && !e.predefined && e.kind != TypeKind::Intermediate) out.push_back(i);
    }
    return out;
  }

  std::vector<std::string> undefined_names() const {
    std::vector<std::string> out;
    for (const auto& e : entries_)
      if (e.live && !e.defined && e.kind != TypeKind::Intermediate) out.push_back(e.name);
    return out;
  }

  const std::vector<Declaration>& declarations() const { return log_; }

  // -- encoding ------------------------------------------------------------

  /// Recomputes codes, bottom propagation and recursion flags if anything
  /// changed since the last call. Queries call this implicitly.
  void freeze() const {
    std::lock_guard lock(mu_);
    ensure_locked();
  }

  const Code& code(TypeId t) const {
    freeze();
    return entries_.at(t).code;
  }

  /// Number of bits in a code under the current encoding.
  std::size_t code_width() const {
    freeze();
    return code_width_;
  }

  /// a ⪰ b
  bool subsumes(TypeId a, TypeId b) const {
    freeze();
    return entries_[b].code.subset_of(entries_[a].code);
  }

  /// Antichain of ⪯-maximal types whose codes lie within `c`.
  std::vector<TypeId> decode_below(const Code& c) const {
    freeze();
    auto it = by_code_.find(c);
    if (it != by_code_.end()) return {it->second};
    std::vector<TypeId> cands;
    for (TypeId t = 0; t < entries_.size(); ++t)
      if (entries_[t].live && entries_[t].code.subset_of(c)) cands.push_back(t);
    std::vector<TypeId> out;
    for (TypeId t : cands) {
      bool dominated = std::any_of(cands.begin(), cands.end(), [&](TypeId u) {
        return u != t && entries_[t].code.subset_of(entries_[u].code);
      });
      if (!dominated) out.push_back(t);
    }
    return out;
  }

  /// Antichain of ⪯-minimal types whose codes contain `c`.
  std::vector<TypeId> decode_above(const Code& c) const {
    freeze();
    auto it = by_code_.find(c);
    if (it != by_code_.end()) return {it->second};
    std::vector<TypeId> cands;
    for (TypeId t = 0; t < entries_.size(); ++t)
      if (entries_[t].live && c.subset_of(entries_[t].code)) cands.push_back(t);
    std::vector<TypeId> out;
    for (TypeId t : cands) {
      bool dominated = std::any_of(cands.begin(), cands.end(), [&](TypeId u) {
        return u != t && entries_[u].code.subset_of(entries_[t].code);
      });
      if (!dominated) out.push_back(t);
    }
    return out;
  }

  /// GLB over the type order alone: code AND, then decode.
  std::vector<TypeId> glb_antichain(TypeId a, TypeId b) const {
    freeze();
    return decode_below(entries_[a].code & entries_[b].code);
  }
  std::vector<TypeId> lub_antichain(TypeId a, TypeId b) const {
    freeze();
    return decode_above(entries_[a].code | entries_[b].code);
  }

  /// GLB over codes as an expression: one type, the disjunction of the
  /// maximal antichain, or ⊥.
  NormalForm glb_codes(TypeId a, TypeId b) const {
    auto ac = glb_antichain(a, b);
    std::vector<LitSet> terms;
    for (TypeId t : ac) terms.push_back({Literal::type(entries_[t].name)});
    std::sort(terms.begin(), terms.end(), [](const LitSet& x, const LitSet& y) { return compare_literals(x[0], y[0]) < 0; });
    return NormalForm(Form::DNF, std::move(terms));
  }

  /// LUB over codes: one type, or the conjunction of the minimal upper
  /// antichain.
  NormalForm lub_codes(TypeId a, TypeId b) const {
    auto ac = lub_antichain(a, b);
    LitSet term;
    for (TypeId t : ac) term.push_back(Literal::type(entries_[t].name));
    std::sort(term.begin(), term.end(), LiteralLess{});
    return NormalForm(Form::DNF, {term});
  }

  // -- incompatibility -----------------------------------------------------

  /// Whether the conjunction of these types is declared (or propagated) ⊥.
  bool incompatible(const std::vector<TypeId>& types) const {
    freeze();
    return incompatible_locked(types);
  }

  const std::vector<BottomRecord>& bottoms() const {
    freeze();
    return bottoms_;
  }

  /// Declared incompatible sets before propagation, with a provenance text.
  std::vector<std::pair<std::vector<TypeId>, std::string>> declared_bottoms() const {
    freeze();
    return declared_;
  }

  /// Direct children in the order: conjunctive subtypes and alternatives.
  std::vector<TypeId> children(TypeId t) const {
    freeze();
    return children_.at(t);
  }

  /// Reflexive-transitive lower set, independent of the chosen encoding.
  const Code& lower_set(TypeId t) const {
    freeze();
    return lower_.at(t);
  }

  // -- recursion -----------------------------------------------------------

  bool is_recursive(TypeId t) const {
    freeze();
    return entries_[t].recursive;
  }
  std::vector<TypeId> recursive_types() const {
    freeze();
    std::vector<TypeId> out;
    for (TypeId t = 0; t < entries_.size(); ++t)
      if (entries_[t].live && entries_[t].recursive) out.push_back(t);
    return out;
  }

  /// Types mentioned in t's definition: parents, alternatives and every
  /// type named in its feature skeleton.
  std::vector<TypeId> uses(TypeId t) const {
    std::lock_guard lock(mu_);
    return uses_locked(t, true);
  }

  // -- diagnostics ---------------------------------------------------------

  /// One line per live type: name, kind, code, parents, alternatives and
  /// incompatible sets.
  std::string dump() const {
    freeze();
    std::ostringstream os;
    auto names = [&](const std::vector<TypeId>& ids) {
      std::vector<std::string> ns;
      for (TypeId i : ids) ns.push_back(entries_[i].name);
      std::sort(ns.begin(), ns.end());
      std::string s = "[";
      for (std::size_t i = 0; i < ns.size(); ++i) s += (i ? "," : "") + ns[i];
      return s + "]";
    };
    for (TypeId t = 0; t < entries_.size(); ++t) {
      const auto& e = entries_[t];
      if (!e.live) continue;
      os << e.name << " kind=" << kind_name(e.kind) << " code=" << e.code.hex() << " parents=" << names(e.conj_parents)
         << " alternatives=" << names(e.disj_alternatives) << " incompatible=[";
      bool first = true;
      if (t < bottom_index_.size()) {
        for (std::size_t r : bottom_index_[t]) {
          std::string set = names(bottoms_[r].types);
          os << (first ? "" : ",") << "{" << set.substr(1, set.size() - 2) << "}";
          first = false;
        }
      }
      os << "]";
      if (!e.defined) os << " undefined";
      if (e.recursive) os << " recursive";
      os << '\n';
    }
    return os.str();
  }

 private:
  void copy_from(const Hierarchy& o) {
    std::lock_guard lock(o.mu_);
    form_ = o.form_;
    encoding_ = o.encoding_;
    prelude_ = o.prelude_;
    log_ = o.log_;
    entries_ = o.entries_;
    ids_ = o.ids_;
    declared_ = o.declared_;
    bottoms_ = o.bottoms_;
    bottom_index_ = o.bottom_index_;
    children_ = o.children_;
    lower_ = o.lower_;
    by_code_ = o.by_code_;
    code_width_ = o.code_width_;
    dirty_ = o.dirty_;
    generation_ = o.generation_;
  }

  // -- declaration log ------------------------------------------------------

  std::optional<std::size_t> defining_decl(const std::string& name) const {
    for (std::size_t i = 0; i < log_.size(); ++i)
      if (const auto* td = std::get_if<TypeDef>(&log_[i]); td && td->name == name) return i;
    return std::nullopt;
  }

  void redefine_locked(std::size_t pos, const Declaration& decl) {
    Declaration old = log_[pos];
    log_[pos] = decl;
    try {
      rederive();
      ensure_locked();
    } catch (...) {
      log_[pos] = old;
      rederive();
      throw;
    }
    ++generation_;
  }

  void rederive() {
    for (auto& e : entries_) {
      HierarchyEntry fresh;
      fresh.name = e.name;
      fresh.kind = e.kind;
      e = std::move(fresh);
    }
    declared_.clear();
    building_prelude_ = true;
    for (const auto& d : prelude_) apply(d);
    building_prelude_ = false;
    for (const auto& d : log_) apply(d);
    dirty_ = true;
  }

  TypeId ensure_type(const std::string& name, TypeKind kind_if_new) {
    auto it = ids_.find(name);
    if (it != ids_.end()) {
      auto& e = entries_[it->second];
      if (!e.live) {
        e.live = true;
        e.kind = kind_if_new;
      }
      return it->second;
    }
    TypeId id = static_cast<TypeId>(entries_.size());
    HierarchyEntry e;
    e.name = name;
    e.kind = kind_if_new;
    e.live = true;
    entries_.push_back(std::move(e));
    ids_.emplace(name, id);
    return id;
  }

  void apply(const Declaration& d) {
    if (const auto* td = std::get_if<TypeDef>(&d)) apply_typedef(*td);
    else if (const auto* inc = std::get_if<IncompatibilityDecl>(&d)) apply_incompat(*inc);
    else apply_partition(std::get<PartitionDecl>(d));
  }

  // Splits a body into its type part and its feature part.
  static void split_body(const ExprPtr& body, std::vector<ExprPtr>& type_part, std::vector<ExprPtr>& feature_part) {
    if (body->kind == ExprKind::Conj) {
      for (const auto& a : body->args) split_body(a, type_part, feature_part);
      return;
    }
    if (detail::mentions_structure(body)) {
      if (body->kind != ExprKind::FeatureTerm && body->kind != ExprKind::List && body->kind != ExprKind::Coref)
        throw HierarchyError("feature constraints under disjunction or exclusive-or are not supported: " +
                             print_expr(body));
      feature_part.push_back(body);
    } else {
      type_part.push_back(body);
    }
  }

  static void collect_type_names(const ExprPtr& e, std::vector<std::string>& out) {
    if (!e) return;
    if (e->kind == ExprKind::TypeName && e->name != kTopName && e->name != kBottomName) out.push_back(e->name);
    if (e->kind == ExprKind::List) {
      out.push_back(e->args.empty() && !e->tail ? "null-list" : "cons");
      if (!e->tail) out.push_back("null-list");
    }
    for (const auto& [attr, v] : e->features) collect_type_names(v, out);
    for (const auto& a : e->args) collect_type_names(a, out);
    collect_type_names(e->tail, out);
  }

  void apply_typedef(const TypeDef& td) {
    TypeKind kind = td.kind == KindHint::Sort ? TypeKind::Sort : TypeKind::Avm;
    if (building_prelude_ && td.kind == KindHint::Sort) kind = TypeKind::Builtin;
    TypeId x = ensure_type(td.name, kind);
    auto& ex = entries_[x];
    if (ex.defined) throw HierarchyError("type " + td.name + " is defined twice");
    if (ex.kind == TypeKind::Intermediate) throw HierarchyError("reserved type name " + td.name);
    ex.kind = kind;
    ex.defined = true;
    ex.predefined = building_prelude_;
    if (!td.body) return;

    std::vector<ExprPtr> type_part, feature_part;
    split_body(td.body, type_part, feature_part);
    if (kind != TypeKind::Avm && !feature_part.empty())
      throw HierarchyError("sort " + td.name + " cannot carry feature constraints");

    ExprPtr skeleton;
    if (feature_part.size() == 1) skeleton = feature_part[0];
    else if (feature_part.size() > 1) skeleton = Expr::conj(feature_part);
    std::vector<std::string> mentioned;
    collect_type_names(skeleton, mentioned);
    for (const auto& n : mentioned) ensure_type(n, TypeKind::Avm);
    entries_[x].skeleton = skeleton;

    NormalForm nf = NormalForm::top(form_);
    if (!type_part.empty()) {
      ExprPtr te = type_part.size() == 1 ? type_part[0] : Expr::conj(type_part);
      try {
        nf = normalize(te, form_);
      } catch (const std::invalid_argument& err) {
        throw HierarchyError(err.what());
      }
    }
    if (nf.is_bottom()) throw HierarchyError("definition of " + td.name + " simplifies to " + std::string(kBottomName));
    for (const auto& s : nf.sets())
      for (const auto& l : s) {
        if (l.is_atom()) throw HierarchyError("atoms cannot appear in the type part of " + td.name);
        if (kind != TypeKind::Avm && l.is_negated())
          throw HierarchyError("sort " + td.name + " cannot be defined through negation");
      }
    // A featureless type built only from sorts is a sort, whatever the hint.
    if (kind == TypeKind::Avm && !skeleton && !nf.is_top() && !building_prelude_) {
      bool all_sorts = true;
      for (const auto& s : nf.sets())
        for (const auto& l : s) {
          auto p = find(l.text);
          all_sorts = all_sorts && !l.is_negated() && p && entries_[*p].sort_like();
        }
      if (all_sorts) kind = entries_[x].kind = TypeKind::Sort;
    }
    decompose(x, nf, skeleton != nullptr);
    if (kind != TypeKind::Avm) {
      const auto& e = entries_[x];
      for (TypeId p : e.conj_parents)
        if (!entries_[p].sort_like()) throw HierarchyError("sort " + td.name + " inherits from non-sort " + entries_[p].name);
      for (TypeId p : e.disj_alternatives)
        if (!entries_[p].sort_like()) throw HierarchyError("sort " + td.name + " has non-sort alternative " + entries_[p].name);
    }
  }

  // Display label of a literal-type: |~t| is labelled ~t.
  Literal label(TypeId t) const {
    const auto& e = entries_[t];
    if (e.complement_of) return Literal::neg(entries_[*e.complement_of].name);
    return Literal::type(e.name);
  }

  TypeId literal_type(const Literal& l, TypeKind kind_if_new) {
    if (l.is_type()) return ensure_type(l.text, kind_if_new);
    TypeId base = ensure_type(l.text, kind_if_new);
    std::string name = "|~" + l.text + "|";
    TypeId n = ensure_type(name, TypeKind::Intermediate);
    auto& e = entries_[n];
    e.kind = TypeKind::Intermediate;
    e.defined = true;
    if (!e.complement_of) {
      e.complement_of = base;
      declared_.push_back({sorted({base, n}), "complement " + name});
    }
    return n;
  }

  static std::vector<TypeId> sorted(std::vector<TypeId> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
  }

  std::string intermediate_name(std::vector<TypeId> elems, const char* op) const {
    std::vector<Literal> labels;
    for (TypeId t : elems) labels.push_back(label(t));
    std::sort(labels.begin(), labels.end(), LiteralLess{});
    std::string s = "|";
    for (std::size_t i = 0; i < labels.size(); ++i) s += (i ? op : "") + print_literal(labels[i]);
    return s + "|";
  }

  TypeId disj_intermediate(const std::vector<TypeId>& alts) {
    TypeId n = ensure_type(intermediate_name(alts, "|"), TypeKind::Intermediate);
    auto& e = entries_[n];
    e.kind = TypeKind::Intermediate;
    if (!e.defined) {
      e.defined = true;
      e.disj_alternatives = sorted(alts);
    }
    return n;
  }

  TypeId conj_intermediate(const std::vector<TypeId>& elems_in) {
    std::vector<TypeId> elems = sorted(elems_in);
    TypeId n = ensure_type(intermediate_name(elems, "&"), TypeKind::Intermediate);
    if (entries_[n].defined) return n;
    entries_[n].kind = TypeKind::Intermediate;
    entries_[n].defined = true;
    entries_[n].conj_members = elems;

    auto is_subset = [](const std::vector<TypeId>& a, const std::vector<TypeId>& b) {
      return std::includes(b.begin(), b.end(), a.begin(), a.end());
    };
    // Parents: the largest existing conjunction intermediates inside this
    // one, plus whatever elements they leave uncovered.
    std::vector<TypeId> subs;
    for (TypeId t = 0; t < entries_.size(); ++t) {
      const auto& e = entries_[t];
      if (t == n || !e.live || e.conj_members.empty()) continue;
      if (e.conj_members.size() < elems.size() && is_subset(e.conj_members, elems)) subs.push_back(t);
    }
    std::sort(subs.begin(), subs.end(), [&](TypeId a, TypeId b) {
      return entries_[a].conj_members.size() > entries_[b].conj_members.size() ||
             (entries_[a].conj_members.size() == entries_[b].conj_members.size() && a < b);
    });
    std::vector<TypeId> parents;
    std::set<TypeId> covered;
    for (TypeId s : subs) {
      const auto& m = entries_[s].conj_members;
      bool adds = std::any_of(m.begin(), m.end(), [&](TypeId x) { return !covered.count(x); });
      if (!adds) continue;
      parents.push_back(s);
      covered.insert(m.begin(), m.end());
    }
    for (TypeId x : elems)
      if (!covered.count(x)) parents.push_back(x);
    entries_[n].conj_parents = sorted(parents);

    // Existing larger conjunction intermediates now inherit through this one.
    for (TypeId t = 0; t < entries_.size(); ++t) {
      auto& e = entries_[t];
      if (t == n || !e.live || e.conj_members.size() <= elems.size() || !is_subset(elems, e.conj_members)) continue;
      std::vector<TypeId> ps;
      for (TypeId p : e.conj_parents) {
        const auto& pm = entries_[p].conj_members;
        bool inside = std::binary_search(elems.begin(), elems.end(), p) || (!pm.empty() && is_subset(pm, elems));
        if (!inside) ps.push_back(p);
      }
      ps.push_back(n);
      e.conj_parents = sorted(ps);
    }
    return n;
  }

  void decompose(TypeId x, const NormalForm& nf, bool has_features) {
    TypeKind lit_kind = entries_[x].kind == TypeKind::Avm ? TypeKind::Avm : TypeKind::Sort;
    const auto& sets = nf.sets();
    if (nf.is_top()) return;
    auto lits = [&](const LitSet& s) {
      std::vector<TypeId> out;
      for (const auto& l : s) out.push_back(literal_type(l, lit_kind));
      return out;
    };
    auto conj_of = [&](const std::vector<TypeId>& elems) -> std::vector<TypeId> {
      if (elems.size() >= 2 && has_features) return {conj_intermediate(elems)};
      return sorted(elems);
    };
    if (nf.form() == Form::CNF) {
      if (sets.size() == 1 && sets[0].size() >= 2) {
        entries_[x].disj_alternatives = sorted(lits(sets[0]));
        return;
      }
      std::vector<TypeId> elems;
      for (const auto& clause : sets) {
        auto ts = lits(clause);
        elems.push_back(ts.size() == 1 ? ts[0] : disj_intermediate(ts));
      }
      entries_[x].conj_parents = conj_of(elems);
    } else {
      if (sets.size() == 1) {
        entries_[x].conj_parents = conj_of(lits(sets[0]));
        return;
      }
      std::vector<TypeId> alts;
      for (const auto& term : sets) {
        auto ts = lits(term);
        alts.push_back(ts.size() == 1 ? ts[0] : conj_intermediate(ts));
      }
      entries_[x].disj_alternatives = sorted(alts);
    }
    for (TypeId p : entries_[x].conj_parents)
      if (p == x) throw HierarchyError("type " + entries_[x].name + " inherits from itself");
  }

  void apply_incompat(const IncompatibilityDecl& d) {
    std::vector<TypeId> ids;
    for (const auto& n : d.types) ids.push_back(ensure_type(n, TypeKind::Avm));
    ids = sorted(ids);
    if (ids.size() < 2) throw HierarchyError("an incompatibility needs at least two distinct types");
    std::string text = "bottom =";
    for (std::size_t i = 0; i < d.types.size(); ++i) text += (i ? " & " : " ") + d.types[i];
    declared_.push_back({ids, text});
  }

  void apply_partition(const PartitionDecl& d) {
    TypeId p = ensure_type(d.supertype, TypeKind::Avm);
    std::vector<TypeId> members;
    for (const auto& m : d.members) members.push_back(ensure_type(m, entries_[p].sort_like() ? TypeKind::Sort : TypeKind::Avm));
    if (sorted(members).size() != members.size() || members.size() < 2)
      throw HierarchyError("partition of " + d.supertype + " needs at least two distinct members");
    auto& e = entries_[p];
    if (!e.conj_parents.empty() || (!e.disj_alternatives.empty() && !e.alternatives_from_partition))
      throw HierarchyError("partition supertype " + d.supertype + " already has a definition");
    e.disj_alternatives = sorted(members);
    e.alternatives_from_partition = true;
    e.defined = true;
    for (std::size_t i = 0; i < members.size(); ++i)
      for (std::size_t j = i + 1; j < members.size(); ++j)
        declared_.push_back({sorted({members[i], members[j]}), "partition " + d.supertype});
  }

  // Checks that need the whole graph, run right after a new declaration.
  void validate_last() {
    check_acyclic();
    const Declaration& d = log_.back();
    if (const auto* inc = std::get_if<IncompatibilityDecl>(&d)) {
      ensure_locked();
      const auto& ids = declared_.back().first;
      for (TypeId a : ids)
        for (TypeId b : ids)
          if (a != b && entries_[b].code.subset_of(entries_[a].code))
            throw HierarchyError("incompatible set is ill-formed: " + entries_[a].name + " subsumes " + entries_[b].name);
      (void)inc;
    } else if (const auto* part = std::get_if<PartitionDecl>(&d)) {
      // A member that was already incompatible with the supertype before
      // this partition would be empty.
      std::size_t n = declared_.size();
      std::size_t pairs = part->members.size() * (part->members.size() - 1) / 2;
      auto saved = declared_;
      declared_.resize(n - pairs);
      dirty_ = true;
      ensure_locked();
      TypeId p = ids_.at(part->supertype);
      for (const auto& m : part->members) {
        TypeId mi = ids_.at(m);
        if (incompatible_locked({p, mi}))
          throw HierarchyError("partition member " + m + " is incompatible with its supertype " + part->supertype);
      }
      declared_ = std::move(saved);
      dirty_ = true;
    }
  }

  void check_acyclic() const {
    // Upward edges: x -> conj parent, alternative -> x.
    std::vector<std::vector<TypeId>> up(entries_.size());
    for (TypeId t = 0; t < entries_.size(); ++t) {
      if (!entries_[t].live) continue;
      for (TypeId p : entries_[t].conj_parents) up[t].push_back(p);
      for (TypeId a : entries_[t].disj_alternatives) up[a].push_back(t);
    }
    std::vector<int> state(entries_.size(), 0);
    std::function<void(TypeId)> visit = [&](TypeId t) {
      state[t] = 1;
      for (TypeId u : up[t]) {
        if (state[u] == 1) throw HierarchyError("cyclic inheritance through " + entries_[u].name);
        if (state[u] == 0) visit(u);
      }
      state[t] = 2;
    };
    for (TypeId t = 0; t < entries_.size(); ++t)
      if (state[t] == 0) visit(t);
  }

  std::vector<TypeId> uses_locked(TypeId t, bool include_partitions) const {
    const auto& e = entries_[t];
    std::vector<TypeId> out = e.conj_parents;
    if (include_partitions || !e.alternatives_from_partition)
      out.insert(out.end(), e.disj_alternatives.begin(), e.disj_alternatives.end());
    std::vector<std::string> names;
    collect_type_names(e.skeleton, names);
    for (const auto& n : names) {
      auto it = ids_.find(n);
      if (it != ids_.end()) out.push_back(it->second);
    }
    return sorted(out);
  }

  std::set<TypeId> dependents_locked(TypeId t) const {
    std::vector<std::vector<TypeId>> users(entries_.size());
    for (TypeId x = 0; x < entries_.size(); ++x) {
      if (!entries_[x].live) continue;
      for (TypeId u : uses_locked(x, true)) users[u].push_back(x);
    }
    std::set<TypeId> out;
    std::vector<TypeId> work{t};
    while (!work.empty()) {
      TypeId x = work.back();
      work.pop_back();
      std::vector<TypeId> next = users[x];  // conjunctive subtypes and users
      const auto& alts = entries_[x].disj_alternatives;
      next.insert(next.end(), alts.begin(), alts.end());
      for (TypeId y : next)
        if (y != t && out.insert(y).second) work.push_back(y);
    }
    return out;
  }

  // Equivalent to looking for a materialized bottom inside `types`: some
  // declared set has every member covered by a type below it.
  bool incompatible_locked(const std::vector<TypeId>& types) const {
    for (const auto& decl : declared_) {
      const auto& members = decl.first;
      bool covered = std::all_of(members.begin(), members.end(), [&](TypeId m) {
        return std::any_of(types.begin(), types.end(), [&](TypeId t) { return t < lower_.size() && lower_[m].test(t); });
      });
      if (covered) return true;
    }
    return false;
  }

  // Adding a fresh leaf under transitive-closure codes only touches the
  // codes of its ancestors.
  bool try_incremental_leaf(std::size_t known) {
    if (dirty_ || encoding_ != Encoding::TransitiveClosure) return false;
    if (entries_.size() != known + 1) return false;
    TypeId x = static_cast<TypeId>(known);
    const auto& e = entries_[x];
    if (!std::holds_alternative<TypeDef>(log_.back()) || std::get<TypeDef>(log_.back()).name != e.name) return false;
    if (!e.disj_alternatives.empty() || e.skeleton) return false;
    for (TypeId p : e.conj_parents)
      if (entries_[p].kind == TypeKind::Intermediate || !entries_[p].live) return false;
    children_.resize(entries_.size());
    lower_.resize(entries_.size());
    std::vector<TypeId> parents = e.conj_parents;
    if (parents.empty()) parents.push_back(kTop);
    for (TypeId p : parents) children_[p].push_back(x);
    code_width_ = entries_.size();
    Code own(code_width_);
    own.set(x);
    entries_[x].code = own;
    lower_[x] = own;
    std::vector<TypeId> work = parents;
    std::set<TypeId> seen;
    while (!work.empty()) {
      TypeId a = work.back();
      work.pop_back();
      if (!seen.insert(a).second) continue;
      by_code_.erase(entries_[a].code);
      entries_[a].code.set(x);
      lower_[a].set(x);
      by_code_[entries_[a].code] = a;
      for (TypeId g : entries_[a].conj_parents) work.push_back(g);
      for (TypeId u = 0; u < entries_.size(); ++u)
        if (entries_[u].live && std::find(entries_[u].disj_alternatives.begin(), entries_[u].disj_alternatives.end(), a) !=
                                    entries_[u].disj_alternatives.end())
          work.push_back(u);
      if (a != kTop && entries_[a].conj_parents.empty()) work.push_back(kTop);
    }
    by_code_[own] = x;
    entries_[x].recursive = false;
    propagate_bottoms();
    return true;
  }

  // -- derived state ---------------------------------------------------------

  void ensure_locked() const {
    if (!dirty_) return;
    auto* self = const_cast<Hierarchy*>(this);
    self->compute_children();
    self->compute_lower();
    self->assign_codes();
    self->propagate_bottoms();
    self->detect_recursion();
    self->dirty_ = false;
  }

  void compute_children() {
    children_.assign(entries_.size(), {});
    for (TypeId t = 0; t < entries_.size(); ++t) {
      const auto& e = entries_[t];
      if (!e.live || t == kTop) continue;
      for (TypeId p : e.conj_parents) children_[p].push_back(t);
      for (TypeId a : e.disj_alternatives) children_[t].push_back(a);
      if (e.conj_parents.empty()) children_[kTop].push_back(t);
    }
    for (auto& c : children_) c = sorted(c);
  }

  // Children before parents.
  std::vector<TypeId> bottom_up_order() const {
    std::vector<TypeId> order;
    std::vector<char> seen(entries_.size(), 0);
    std::function<void(TypeId)> visit = [&](TypeId t) {
      seen[t] = 1;
      for (TypeId c : children_[t])
        if (!seen[c]) visit(c);
      order.push_back(t);
    };
    for (TypeId t = 0; t < entries_.size(); ++t)
      if (entries_[t].live && !seen[t]) visit(t);
    return order;
  }

  void compute_lower() {
    std::size_t n = entries_.size();
    lower_.assign(n, Code(n));
    for (TypeId t : bottom_up_order()) {
      lower_[t].set(t);
      for (TypeId c : children_[t]) lower_[t] |= lower_[c];
    }
  }

  void assign_codes() {
    std::size_t n = entries_.size();
    by_code_.clear();
    for (auto& e : entries_) e.code = Code();
    if (encoding_ == Encoding::TransitiveClosure) {
      code_width_ = n;
      for (TypeId t = 0; t < n; ++t)
        if (entries_[t].live) entries_[t].code = lower_[t];
    } else {
      // Compact: a type gets its own bit unless the union of its children's
      // codes already separates it from every type that is not above it.
      std::vector<Code> upper(n, Code(n));
      for (TypeId t = 0; t < n; ++t)
        if (entries_[t].live) lower_[t].for_each([&](std::size_t s) { upper[s].set(t); });
      std::size_t bits = 0;
      for (TypeId t : bottom_up_order()) {
        const auto& cs = children_[t];
        bool fresh = cs.size() < 2;
        if (!fresh) {
          Code common = upper[cs[0]];
          for (std::size_t i = 1; i < cs.size(); ++i) common &= upper[cs[i]];
          fresh = !common.subset_of(upper[t]);
        }
        Code c;
        for (TypeId ch : cs) c |= entries_[ch].code;
        if (fresh) c.set(bits++);
        entries_[t].code = std::move(c);
      }
      code_width_ = bits;
      for (auto& e : entries_)
        if (e.live) e.code.resize(bits);
    }
    for (TypeId t = 0; t < n; ++t)
      if (entries_[t].live) by_code_[entries_[t].code] = t;
  }

  void propagate_bottoms() {
    bottoms_.clear();
    std::set<std::vector<TypeId>> seen;
    for (std::size_t d = 0; d < declared_.size(); ++d) {
      const auto& members = declared_[d].first;
      std::vector<std::vector<TypeId>> lowers;
      for (TypeId m : members) {
        std::vector<TypeId> l;
        lower_[m].for_each([&](std::size_t s) { l.push_back(static_cast<TypeId>(s)); });
        lowers.push_back(std::move(l));
      }
      std::vector<std::size_t> idx(members.size(), 0);
      while (true) {
        std::vector<TypeId> s;
        for (std::size_t i = 0; i < members.size(); ++i) s.push_back(lowers[i][idx[i]]);
        s = sorted(std::move(s));
        if (seen.insert(s).second) bottoms_.push_back({s, d});
        std::size_t k = 0;
        while (k < idx.size() && ++idx[k] == lowers[k].size()) idx[k++] = 0;
        if (k == idx.size()) break;
      }
    }
    bottom_index_.assign(entries_.size(), {});
    for (std::size_t r = 0; r < bottoms_.size(); ++r)
      for (TypeId t : bottoms_[r].types) bottom_index_[t].push_back(r);
  }

  // Tarjan's strongly connected components over the "uses" relation.
  void detect_recursion() {
    std::size_t n = entries_.size();
    std::vector<std::vector<TypeId>> adj(n);
    for (TypeId t = 0; t < n; ++t)
      if (entries_[t].live) adj[t] = uses_locked(t, false);
    std::vector<int> index(n, -1), low(n, 0);
    std::vector<char> on(n, 0);
    std::vector<TypeId> stack;
    int counter = 0;
    std::function<void(TypeId)> strong = [&](TypeId v) {
      index[v] = low[v] = counter++;
      stack.push_back(v);
      on[v] = 1;
      for (TypeId w : adj[v]) {
        if (index[w] < 0) {
          strong(w);
          low[v] = std::min(low[v], low[w]);
        } else if (on[w]) {
          low[v] = std::min(low[v], index[w]);
        }
      }
      if (low[v] == index[v]) {
        std::vector<TypeId> comp;
        TypeId w;
        do {
          w = stack.back();
          stack.pop_back();
          on[w] = 0;
          comp.push_back(w);
        } while (w != v);
        bool cyclic = comp.size() > 1 || std::find(adj[v].begin(), adj[v].end(), v) != adj[v].end();
        for (TypeId c : comp) entries_[c].recursive = cyclic;
      }
    };
    for (TypeId t = 0; t < n; ++t)
      if (entries_[t].live && index[t] < 0) strong(t);
  }

  Form form_;
  Encoding encoding_;
  std::vector<Declaration> prelude_;
  std::vector<Declaration> log_;
  std::vector<HierarchyEntry> entries_;
  std::unordered_map<std::string, TypeId> ids_;
  std::vector<std::pair<std::vector<TypeId>, std::string>> declared_;
  bool building_prelude_ = false;

  // derived, rebuilt by ensure_locked()
  std::vector<BottomRecord> bottoms_;
  std::vector<std::vector<std::size_t>> bottom_index_;
  std::vector<std::vector<TypeId>> children_;
  std::vector<Code> lower_;
  std::unordered_map<Code, TypeId, CodeHash> by_code_;
  std::size_t code_width_ = 0;
  bool dirty_ = true;
  std::uint64_t generation_ = 0;
  mutable std::mutex mu_;
};

/// Order knowledge from a hierarchy for the simplifier: subsumption and
/// declared incompatibility. Unknown names are treated as unrelated.
class HierarchyOracle : public SemanticOracle {
 public:
  explicit HierarchyOracle(const Hierarchy& h) : h_(h) {}

  bool below(const Literal& a, const Literal& b) const override {
    if (a == b) return true;
    if (!a.is_type() || !b.is_type()) return false;
    auto ia = h_.find(a.text), ib = h_.find(b.text);
    return ia && ib && h_.subsumes(*ib, *ia);
  }
  bool apart(const Literal& a, const Literal& b) const override {
    if (SemanticOracle::apart(a, b)) return true;
    if (!a.is_type() || !b.is_type()) return false;
    auto ia = h_.find(a.text), ib = h_.find(b.text);
    return ia && ib && h_.incompatible({*ia, *ib});
  }
  bool incompatible(std::span<const Literal> pos) const override {
    std::vector<TypeId> ids;
    for (const auto& l : pos) {
      if (!l.is_type()) continue;
      if (auto i = h_.find(l.text)) ids.push_back(*i);
    }
    return !ids.empty() && h_.incompatible(ids);
  }

 protected:
  const Hierarchy& h_;
};

}  // namespace tdl
