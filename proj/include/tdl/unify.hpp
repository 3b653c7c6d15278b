#pragma once

// Typed unification. Type slots are combined by the hierarchy-aware
// simplifier; feature arcs are merged under union-find so that sharing and
// cycles come out right.

#include <functional>
#include <memory>
#include <mutex>
#include <stdexcept>

#include "tdl/feature_structure.hpp"
#include "tdl/hierarchy.hpp"

namespace tdl {

class TypeContext;

/// Semantic rules for run-time type slots: the order and incompatibilities
/// of the hierarchy, closed-world sorts and atoms, and replacement of a
/// conjunction by its verified greatest lower bound.
class TypedOracle : public HierarchyOracle {
 public:
  using Verifier = std::function<bool(TypeId, const std::vector<TypeId>&)>;

  TypedOracle(const Hierarchy& h, Verifier verify) : HierarchyOracle(h), verify_(std::move(verify)) {}

  std::optional<TypeId> id_of(const Literal& l) const {
    if (l.kind != LitKind::Type && l.kind != LitKind::NegType) return std::nullopt;
    return h_.find(l.text);
  }
  bool sort_like(const Literal& l) const {
    auto i = id_of(l);
    return i && h_.entry(*i).sort_like();
  }
  std::optional<TypeId> builtin_of(const Literal& atom) const {
    switch (atom.kind) {
      case LitKind::Symbol: return h_.find("symbol");
      case LitKind::String: return h_.find("string");
      case LitKind::Number: return h_.find("number");
      default: return std::nullopt;
    }
  }

  bool below(const Literal& a, const Literal& b) const override {
    if (a == b) return true;
    if (a.is_atom() && b.is_type()) {
      auto s = id_of(b), bt = builtin_of(a);
      return s && bt && h_.entry(*s).sort_like() && h_.subsumes(*s, *bt);
    }
    return HierarchyOracle::below(a, b);
  }

  bool apart(const Literal& a, const Literal& b) const override {
    if (a.kind == LitKind::Feature || b.kind == LitKind::Feature) return false;
    if (a.is_atom() && b.is_atom()) return !(a == b);
    if (a.is_atom()) return !below(a, b);
    if (b.is_atom()) return !below(b, a);
    auto ia = id_of(a), ib = id_of(b);
    if (ia && ib) {
      bool sa = h_.entry(*ia).sort_like(), sb = h_.entry(*ib).sort_like();
      if (sa != sb) return true;
      if (sa && h_.glb_antichain(*ia, *ib).empty()) return true;
    } else if ((ia && h_.entry(*ia).sort_like()) || (ib && h_.entry(*ib).sort_like())) {
      return true;  // an unknown name is an open-world avm type
    }
    return HierarchyOracle::apart(a, b);
  }

  bool reduce_term(LitSet& t) const override {
    LitSet atoms, types, rest;
    for (const auto& l : t) (l.is_atom() ? atoms : l.is_type() ? types : rest).push_back(l);
    bool features = std::any_of(rest.begin(), rest.end(), [](const Literal& l) { return l.kind == LitKind::Feature; });

    if (!atoms.empty()) {
      if (atoms.size() > 1 || features) return false;
      for (const auto& l : types)
        if (!below(atoms[0], l)) return false;
      for (const auto& l : rest)
        if (l.is_negated() && below(atoms[0], l.base())) return false;
      t = atoms;
      return true;
    }

    std::vector<TypeId> sorts, avms;
    LitSet unknown;
    for (const auto& l : types) {
      auto i = id_of(l);
      if (!i) unknown.push_back(l);
      else (h_.entry(*i).sort_like() ? sorts : avms).push_back(*i);
    }
    if (!sorts.empty() && (features || !avms.empty() || !unknown.empty())) return false;

    std::vector<TypeId> kept;
    if (!sorts.empty()) {
      // Closed world: the code GLB must be one sort.
      Code c = h_.code(sorts[0]);
      for (std::size_t i = 1; i < sorts.size(); ++i) c &= h_.code(sorts[i]);
      auto ac = h_.decode_below(c);
      if (ac.size() != 1 || !h_.entry(ac[0]).sort_like()) return false;
      kept = ac;
    } else {
      for (TypeId a : avms) {
        bool redundant = std::any_of(avms.begin(), avms.end(), [&](TypeId b) {
          return b != a && h_.subsumes(a, b);
        });
        if (!redundant) kept.push_back(a);
      }
      std::sort(kept.begin(), kept.end());
      kept.erase(std::unique(kept.begin(), kept.end()), kept.end());
      if (kept.size() >= 2 && h_.incompatible(kept)) return false;
      if (kept.size() >= 2 && verify_) {
        Code c = h_.code(kept[0]);
        for (std::size_t i = 1; i < kept.size(); ++i) c &= h_.code(kept[i]);
        auto ac = h_.decode_below(c);
        if (ac.size() == 1 && verify_(ac[0], kept)) kept = ac;
      }
    }
    LitSet out;
    for (TypeId k : kept) out.push_back(Literal::type(h_.name(k)));
    for (auto& l : unknown) out.push_back(std::move(l));
    for (const auto& l : rest) {
      if (l.is_negated()) {
        Literal base = l.base();
        bool entailed = std::any_of(out.begin(), out.end(), [&](const Literal& p) { return apart(p, base); });
        if (std::any_of(out.begin(), out.end(), [&](const Literal& p) { return below(p, base); })) return false;
        if (entailed) continue;
      }
      out.push_back(l);
    }
    std::sort(out.begin(), out.end(), LiteralLess{});
    t = std::move(out);
    return true;
  }

 private:
  Verifier verify_;
};

// ---------------------------------------------------------------------------

enum class GlbAction { FeatureUnify, SkipFeatureUnify, Fail };

inline const char* action_name(GlbAction a) {
  switch (a) {
    case GlbAction::FeatureUnify: return "feature-unify";
    case GlbAction::SkipFeatureUnify: return "skip-feature-unify";
    case GlbAction::Fail: return "fail";
  }
  return "?";
}

struct GlbVerdict {
  NormalForm result;
  GlbAction action = GlbAction::SkipFeatureUnify;
};

/// Mutable graph used while unifying or expanding. Nodes are merged under
/// union-find; the first failure is recorded with its path.
class Workspace {
 public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  explicit Workspace(TypeContext& ctx) : ctx_(&ctx) {}

  TypeContext& context() const { return *ctx_; }

  std::size_t fresh() {
    nodes_.emplace_back();
    parent_.push_back(parent_.size());
    return parent_.size() - 1;
  }

  /// Copies a structure in; returns the workspace id of its root.
  std::size_t add(const FeatureStructure& f) {
    if (f.is_bottom()) {
      fail(f.failure_path());
      return fresh();
    }
    std::size_t base = nodes_.size();
    for (const auto& n : f.nodes()) {
      FsNode c = n;
      for (auto& [attr, t] : c.arcs) t += base;
      nodes_.push_back(std::move(c));
      parent_.push_back(parent_.size());
    }
    return base + f.root();
  }

  std::size_t find(std::size_t n) const {
    while (parent_[n] != n) {
      parent_[n] = parent_[parent_[n]];
      n = parent_[n];
    }
    return n;
  }

  const FsNode& node(std::size_t n) const { return nodes_[find(n)]; }
  std::size_t child(std::size_t n, const std::string& attr) const {
    const auto& arcs = node(n).arcs;
    auto it = arcs.find(attr);
    return it == arcs.end() ? npos : find(it->second);
  }

  bool failed() const { return failed_; }
  const Path& failure_path() const { return fail_path_; }
  void fail(Path where) {
    if (failed_) return;
    failed_ = true;
    fail_path_ = std::move(where);
  }

  bool unify(std::size_t a, std::size_t b, Path at = {}) {
    if (failed_) return false;
    return merge(a, b, at);
  }

  /// Conjoins `t` into the slot of `n`.
  bool constrain(std::size_t n, const NormalForm& t, const Path& at = {});

  /// Replaces the slot of `n` (used to commit to one alternative).
  bool set_slot(std::size_t n, NormalForm t, const Path& at = {}) {
    nodes_[find(n)].slot = std::move(t);
    return settle(find(n), at);
  }

  void mark_applied(std::size_t n, const std::string& type) { nodes_[find(n)].applied.insert(type); }

  /// The child under `attr`, created unconstrained if missing.
  std::size_t arc(std::size_t n, const std::string& attr, const Path& at = {}) {
    std::size_t r = find(n);
    auto it = nodes_[r].arcs.find(attr);
    if (it != nodes_[r].arcs.end()) return find(it->second);
    std::size_t c = fresh();
    nodes_[r].arcs.emplace(attr, c);
    settle(r, at);
    return c;
  }

  FeatureStructure extract(std::size_t root) const {
    if (failed_) return FeatureStructure::failure(fail_path_);
    std::vector<FsNode> out(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (find(i) != i) continue;
      out[i] = nodes_[i];
      for (auto& [attr, c] : out[i].arcs) c = find(c);
    }
    return FeatureStructure::from_nodes(out, find(root));
  }

 private:
  bool merge(std::size_t a, std::size_t b, Path& path);
  bool settle(std::size_t r, const Path& path);

  TypeContext* ctx_;
  std::vector<FsNode> nodes_;
  mutable std::vector<std::size_t> parent_;
  bool failed_ = false;
  Path fail_path_;
};

/// Everything type-level that unification and expansion consult: the
/// hierarchy, a memoizing simplifier over run-time slots, and caches of
/// definitional skeletons. Caches are dropped when the hierarchy changes.
class TypeContext {
 public:
  explicit TypeContext(const Hierarchy& h, bool memoize = true, bool verify = true)
      : h_(h),
        oracle_(h, verify ? TypedOracle::Verifier([this](TypeId c, const std::vector<TypeId>& m) { return verify_glb(c, m); })
                          : TypedOracle::Verifier()),
        simp_(&oracle_, memoize),
        verify_(verify) {}

  TypeContext(const TypeContext&) = delete;
  TypeContext& operator=(const TypeContext&) = delete;

  const Hierarchy& hierarchy() const { return h_; }
  const TypedOracle& oracle() const { return oracle_; }
  bool memoizing() const { return simp_.memoizing(); }

  NormalForm meet(const NormalForm& a, const NormalForm& b) {
    std::lock_guard lock(mu_);
    sync();
    return simp_.conjoin(a, b, Form::DNF);
  }

  NormalForm simplify(const ExprPtr& e) {
    std::lock_guard lock(mu_);
    sync();
    return simp_.simplify(e, Form::DNF);
  }

  MemoStats memo_stats() const {
    std::lock_guard lock(mu_);
    return simp_.stats();
  }
  void clear() {
    std::lock_guard lock(mu_);
    simp_.clear();
    local_.clear();
    inherited_.clear();
    verified_.clear();
    if (plain_) plain_->clear();
  }

  /// Reflexive closure over conjunctive parents, in id order.
  std::vector<TypeId> ancestors(TypeId t) const {
    std::set<TypeId> seen{t};
    std::vector<TypeId> work{t};
    while (!work.empty()) {
      TypeId x = work.back();
      work.pop_back();
      for (TypeId p : h_.entry(x).conj_parents)
        if (seen.insert(p).second) work.push_back(p);
    }
    return {seen.begin(), seen.end()};
  }

  /// The feature part of t's own definition as a structure with a ⊤ root.
  const FeatureStructure& local_skeleton(TypeId t);
  /// Local skeletons of t and all its conjunctive ancestors, unified.
  const FeatureStructure& inherited_skeleton(TypeId t);

 private:
  void sync() {
    if (h_.generation() == generation_) return;
    generation_ = h_.generation();
    simp_.clear();
    local_.clear();
    inherited_.clear();
    verified_.clear();
  }

  bool verify_glb(TypeId c, const std::vector<TypeId>& members);

  const Hierarchy& h_;
  TypedOracle oracle_;
  Simplifier simp_;
  bool verify_;
  std::unique_ptr<TypeContext> plain_;
  std::map<TypeId, FeatureStructure> local_;
  std::map<TypeId, FeatureStructure> inherited_;
  std::map<std::pair<TypeId, std::vector<TypeId>>, bool> verified_;
  std::uint64_t generation_ = static_cast<std::uint64_t>(-1);
  mutable std::recursive_mutex mu_;
};

// ---------------------------------------------------------------------------
// Workspace internals

inline bool Workspace::constrain(std::size_t n, const NormalForm& t, const Path& at) {
  if (failed_) return false;
  std::size_t r = find(n);
  NormalForm s = ctx_->meet(nodes_[r].slot, t);
  if (s.is_bottom()) {
    fail(at);
    return false;
  }
  nodes_[r].slot = std::move(s);
  return settle(r, at);
}

inline bool Workspace::merge(std::size_t a, std::size_t b, Path& path) {
  a = find(a);
  b = find(b);
  if (a == b) return true;
  NormalForm s = ctx_->meet(nodes_[a].slot, nodes_[b].slot);
  if (s.is_bottom()) {
    fail(path);
    return false;
  }
  parent_[b] = a;
  nodes_[a].slot = std::move(s);
  nodes_[a].applied.insert(nodes_[b].applied.begin(), nodes_[b].applied.end());
  auto arcs = std::move(nodes_[b].arcs);
  nodes_[b].arcs.clear();
  for (const auto& [attr, c] : arcs) {
    std::size_t r = find(a);
    auto it = nodes_[r].arcs.find(attr);
    if (it == nodes_[r].arcs.end()) {
      nodes_[r].arcs.emplace(attr, c);
      continue;
    }
    path.push_back(attr);
    bool ok = merge(it->second, c, path);
    path.pop_back();
    if (!ok) return false;
  }
  return settle(find(a), path);
}

// Sorts and atoms label leaves only: a node with arcs keeps just the
// avm alternatives of its slot.
inline bool Workspace::settle(std::size_t r, const Path& path) {
  auto& n = nodes_[r];
  if (n.arcs.empty() || n.slot.is_top()) return true;
  const auto& o = ctx_->oracle();
  std::vector<LitSet> terms;
  for (const auto& term : n.slot.sets()) {
    bool leafy = std::any_of(term.begin(), term.end(), [&](const Literal& l) { return l.is_atom() || (l.is_type() && o.sort_like(l)); });
    if (!leafy) terms.push_back(term);
  }
  if (terms.size() == n.slot.sets().size()) return true;
  if (terms.empty()) {
    fail(path);
    return false;
  }
  n.slot = NormalForm(Form::DNF, std::move(terms));
  return true;
}

// ---------------------------------------------------------------------------
// Building structures from expressions

namespace detail {

inline bool build_into(Workspace& w, std::size_t n, const ExprPtr& e, std::map<std::string, std::size_t>& tags,
                       Path& path) {
  if (w.failed()) return false;
  TypeContext& ctx = w.context();
  switch (e->kind) {
    case ExprKind::TypeName:
      if (e->name == kTopName) return true;
      if (e->name == kBottomName) {
        w.fail(path);
        return false;
      }
      return w.constrain(n, NormalForm::literal(Literal::type(e->name)), path);
    case ExprKind::Atom:
      return w.constrain(n, NormalForm::literal(Literal::atom(e->atom)), path);
    case ExprKind::Coref: {
      auto it = tags.find(e->name);
      if (it == tags.end()) {
        tags.emplace(e->name, n);
        return true;
      }
      return w.unify(it->second, n, path);
    }
    case ExprKind::FeatureTerm:
      for (const auto& [attr, v] : e->features) {
        std::size_t c = w.arc(n, attr, path);
        path.push_back(attr);
        bool ok = !w.failed() && build_into(w, c, v, tags, path);
        path.pop_back();
        if (!ok) return false;
      }
      return true;
    case ExprKind::List: {
      std::size_t cur = n;
      std::size_t depth = 0;
      for (const auto& elem : e->args) {
        if (!w.constrain(cur, NormalForm::literal(Literal::type("cons")), path)) break;
        std::size_t first = w.arc(cur, "FIRST", path);
        path.push_back("FIRST");
        bool ok = !w.failed() && build_into(w, first, elem, tags, path);
        path.pop_back();
        if (!ok) break;
        cur = w.arc(cur, "REST", path);
        path.push_back("REST");
        ++depth;
      }
      bool ok = !w.failed();
      if (ok) {
        if (e->tail) ok = build_into(w, cur, e->tail, tags, path);
        else ok = w.constrain(cur, NormalForm::literal(Literal::type("null-list")), path);
      }
      path.resize(path.size() - depth);
      return ok && !w.failed();
    }
    case ExprKind::Conj:
      for (const auto& a : e->args)
        if (!build_into(w, n, a, tags, path)) return false;
      return true;
    case ExprKind::Disj:
    case ExprKind::Xor:
    case ExprKind::Neg:
      if (mentions_structure(e))
        throw std::invalid_argument("feature constraints under disjunction or negation are not supported: " + print_expr(e));
      return w.constrain(n, ctx.simplify(e), path);
    case ExprKind::TemplateCall:
      throw TemplateError("unexpanded template call @" + e->name);
  }
  return true;
}

}  // namespace detail

/// Builds a structure from an expression; ⊥ (with the failing path) when
/// its constraints clash.
inline FeatureStructure build_fs(const ExprPtr& e, TypeContext& ctx) {
  Workspace w(ctx);
  std::size_t root = w.fresh();
  std::map<std::string, std::size_t> tags;
  Path path;
  if (e) detail::build_into(w, root, e, tags, path);
  return w.extract(root);
}

inline FeatureStructure unify(const FeatureStructure& f, const FeatureStructure& g, TypeContext& ctx) {
  if (f.is_bottom()) return f;
  if (g.is_bottom()) return g;
  Workspace w(ctx);
  std::size_t a = w.add(f);
  std::size_t b = w.add(g);
  w.unify(a, b);
  return w.extract(a);
}

/// Every term of `lower` entails some term of `upper`.
inline bool slot_subsumes(const NormalForm& upper, const NormalForm& lower, const SemanticOracle& o) {
  if (lower.is_bottom() || upper.is_top()) return true;
  for (const auto& tg : lower.sets()) {
    bool ok = std::any_of(upper.sets().begin(), upper.sets().end(), [&](const LitSet& tf) {
      return std::all_of(tf.begin(), tf.end(), [&](const Literal& lf) {
        return std::any_of(tg.begin(), tg.end(), [&](const Literal& lg) { return o.entails(lg, lf); });
      });
    });
    if (!ok) return false;
  }
  return true;
}

/// f ⪰ g: a map from f's nodes to g's preserving root, arcs and sharing,
/// with every slot of f subsuming its image's slot.
inline bool subsumes_fs(const FeatureStructure& f, const FeatureStructure& g, TypeContext& ctx) {
  if (g.is_bottom()) return true;
  if (f.is_bottom()) return false;
  std::vector<std::size_t> image(f.size(), Workspace::npos);
  std::vector<std::pair<std::size_t, std::size_t>> work{{f.root(), g.root()}};
  image[f.root()] = g.root();
  while (!work.empty()) {
    auto [a, b] = work.back();
    work.pop_back();
    if (!slot_subsumes(f.node(a).slot, g.node(b).slot, ctx.oracle())) return false;
    for (const auto& [attr, fa] : f.node(a).arcs) {
      auto it = g.node(b).arcs.find(attr);
      if (it == g.node(b).arcs.end()) return false;
      if (image[fa] == Workspace::npos) {
        image[fa] = it->second;
        work.emplace_back(fa, it->second);
      } else if (image[fa] != it->second) {
        return false;
      }
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// TypeContext internals

inline const FeatureStructure& TypeContext::local_skeleton(TypeId t) {
  std::lock_guard lock(mu_);
  sync();
  auto it = local_.find(t);
  if (it != local_.end()) return it->second;
  FeatureStructure f = build_fs(h_.entry(t).skeleton, *this);
  return local_.emplace(t, std::move(f)).first->second;
}

inline const FeatureStructure& TypeContext::inherited_skeleton(TypeId t) {
  std::lock_guard lock(mu_);
  sync();
  auto it = inherited_.find(t);
  if (it != inherited_.end()) return it->second;
  FeatureStructure f;
  for (TypeId a : ancestors(t)) {
    if (!h_.entry(a).skeleton) continue;
    f = unify(f, local_skeleton(a), *this);
  }
  return inherited_.emplace(t, std::move(f)).first->second;
}

// A code-level candidate c for the conjunction of `members` stands for it
// only when c adds nothing: it is not disjunctive or a system-introduced
// conjunction, each of its own parents is implied by a member, and its own
// feature constraints are implied by the members' inherited ones.
inline bool TypeContext::verify_glb(TypeId c, const std::vector<TypeId>& members) {
  std::lock_guard lock(mu_);
  auto key = std::make_pair(c, members);
  if (auto it = verified_.find(key); it != verified_.end()) return it->second;
  const auto& e = h_.entry(c);
  bool ok = !e.disjunctive() && e.conj_members.empty() && !e.complement_of && c != Hierarchy::kTop;
  for (TypeId p : e.conj_parents) {
    if (!ok) break;
    ok = std::any_of(members.begin(), members.end(), [&](TypeId m) { return h_.subsumes(p, m); });
  }
  if (ok && e.skeleton) {
    if (!plain_) plain_ = std::make_unique<TypeContext>(h_, false, false);
    FeatureStructure combined;
    for (TypeId m : members) combined = unify(combined, plain_->inherited_skeleton(m), *plain_);
    ok = !combined.is_bottom() && subsumes_fs(plain_->local_skeleton(c), combined, *plain_);
  }
  verified_.emplace(key, ok);
  return ok;
}

/// Type-level GLB of two slots with the interface verdict: fail on ⊥,
/// feature unification when the result still carries feature constraints
/// to combine (an open conjunction, or an avm type with inherited ones).
inline GlbVerdict glb_types(const NormalForm& a, const NormalForm& b, TypeContext& ctx) {
  NormalForm r = ctx.meet(a, b);
  if (r.is_bottom()) return {r, GlbAction::Fail};
  const auto& h = ctx.hierarchy();
  bool features = false;
  for (const auto& term : r.sets()) {
    std::size_t avms = 0;
    for (const auto& l : term) {
      if (!l.is_type()) continue;
      auto id = ctx.oracle().id_of(l);
      if (id && h.entry(*id).sort_like()) continue;
      ++avms;
      if (id && !ctx.inherited_skeleton(*id).nodes()[0].arcs.empty()) features = true;
    }
    if (avms >= 2) features = true;
  }
  return {r, features ? GlbAction::FeatureUnify : GlbAction::SkipFeatureUnify};
}

}  // namespace tdl
