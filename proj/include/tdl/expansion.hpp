#pragma once

// Type expansion: unify the definitional constraints of every type found in
// a structure into it, lazily for recursive types, under user controls.

#include <deque>
#include <sstream>

#include "tdl/unify.hpp"

namespace tdl {

enum class Mode { Complete, Resolved };

inline const char* mode_name(Mode m) { return m == Mode::Complete ? "complete" : "resolved"; }

/// `*` matches one attribute, `**` any run of attributes. A leading `!`
/// makes the pattern negative.
struct PathPattern {
  std::vector<std::string> steps;
  bool negative = false;

  static PathPattern parse(std::string_view text) {
    PathPattern p;
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
    if (!text.empty() && text.front() == '!') {
      p.negative = true;
      text.remove_prefix(1);
    }
    p.steps = parse_path(text);
    return p;
  }

  std::string text() const { return (negative ? "!" : "") + print_path(steps); }

  /// Which prefixes of the pattern can have consumed `path`.
  std::vector<bool> states(const Path& path) const {
    std::size_t n = steps.size();
    std::vector<bool> cur(n + 1, false);
    cur[0] = true;
    auto close = [&](std::vector<bool>& s) {
      for (std::size_t i = 0; i < n; ++i)
        if (s[i] && steps[i] == "**") s[i + 1] = true;
    };
    close(cur);
    for (const auto& a : path) {
      std::vector<bool> next(n + 1, false);
      for (std::size_t i = 0; i < n; ++i) {
        if (!cur[i]) continue;
        if (steps[i] == "**") next[i] = true;
        else if (steps[i] == "*" || steps[i] == a) next[i + 1] = true;
      }
      close(next);
      cur = std::move(next);
    }
    return cur;
  }

  bool matches(const Path& path) const { return states(path).back(); }

  /// Some extension of `path` (including itself) matches.
  bool leads_into(const Path& path) const {
    auto s = states(path);
    return std::find(s.begin(), s.end(), true) != s.end();
  }

  /// Some prefix of `path` (including itself) matches.
  bool covers(const Path& path) const {
    for (std::size_t k = 0; k <= path.size(); ++k)
      if (matches(Path(path.begin(), path.begin() + static_cast<std::ptrdiff_t>(k)))) return true;
    return false;
  }
};

struct ExpansionControl {
  std::set<std::string> include_types;  // when nonempty, expand only types below these
  std::set<std::string> exclude_types;  // never expand types below these
  std::set<std::string> always_types;   // expand even where the lazy rule would stop
  std::vector<PathPattern> paths;
  std::map<std::string, int> depth;
  std::optional<std::size_t> max_path_length = 50;
  Mode mode = Mode::Complete;
  std::size_t max_alternatives = 4096;

  /// One line of a control section, e.g. `expand-path SYNSEM|LOC|CAT`.
  void apply_line(std::string_view line) {
    std::istringstream is{std::string(line)};
    std::string key, arg, extra;
    is >> key;
    if (key.empty()) return;
    auto need = [&](std::string& out) {
      if (!(is >> out)) throw std::invalid_argument("control '" + key + "' needs an argument");
    };
    if (key == "expand-always") {
      need(arg);
      always_types.insert(arg);
    } else if (key == "expand-never") {
      need(arg);
      exclude_types.insert(arg);
    } else if (key == "expand-only") {
      need(arg);
      include_types.insert(arg);
    } else if (key == "expand-path") {
      std::string rest;
      std::getline(is, rest);
      if (rest.find_first_not_of(" \t") == std::string::npos)
        throw std::invalid_argument("control 'expand-path' needs a pattern");
      paths.push_back(PathPattern::parse(rest));
    } else if (key == "depth") {
      need(arg);
      need(extra);
      int d = std::stoi(extra);
      if (d < 0) throw std::invalid_argument("depth bound must be nonnegative");
      depth[arg] = d;
    } else if (key == "max-path-length") {
      need(arg);
      if (arg == "none") max_path_length.reset();
      else max_path_length = static_cast<std::size_t>(std::stoul(arg));
    } else if (key == "mode") {
      need(arg);
      if (arg == "complete") mode = Mode::Complete;
      else if (arg == "resolved") mode = Mode::Resolved;
      else throw std::invalid_argument("unknown mode " + arg);
    } else if (key == "max-alternatives") {
      need(arg);
      max_alternatives = static_cast<std::size_t>(std::stoul(arg));
    } else {
      throw std::invalid_argument("unknown control '" + key + "'");
    }
    validate();
  }

  void apply_text(std::string_view text) {
    std::size_t i = 0;
    while (i <= text.size()) {
      std::size_t nl = text.find('\n', i);
      std::string_view l = text.substr(i, nl == std::string_view::npos ? std::string_view::npos : nl - i);
      if (auto c = l.find(';'); c != std::string_view::npos) l = l.substr(0, c);
      apply_line(l);
      if (nl == std::string_view::npos) break;
      i = nl + 1;
    }
  }

  void validate() const {
    for (const auto& t : include_types)
      if (exclude_types.count(t)) throw std::invalid_argument("type " + t + " is both included and excluded");
  }
};

enum class Outcome { Yes, No, Bounded };

inline const char* outcome_name(Outcome o) {
  switch (o) {
    case Outcome::Yes: return "yes";
    case Outcome::No: return "no";
    case Outcome::Bounded: return "bounded";
  }
  return "?";
}

struct ExpansionResult {
  Outcome outcome = Outcome::No;
  std::vector<FeatureStructure> alternatives;
  std::vector<std::vector<bool>> expanded;  // per alternative, per node: fully expanded
  Path failure_path;
  std::string bound_reason;

  bool fully_expanded(std::size_t alt = 0) const { return !expanded.at(alt).empty() && expanded[alt][0]; }
};

/// Nodes whose type constraints are all present and whose substructures are
/// fully expanded (greatest fixpoint, so cycles can be marked).
inline std::vector<bool> expanded_marks(const FeatureStructure& f, TypeContext& ctx) {
  const auto& h = ctx.hierarchy();
  std::vector<bool> mark(f.size(), false);
  if (f.is_bottom()) return mark;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const auto& n = f.node(i);
    if (n.slot.sets().size() > 1) continue;
    bool done = true;
    for (const auto& l : n.slot.sets()[0]) {
      auto id = ctx.oracle().id_of(l);
      if (!l.is_type() || !id || h.entry(*id).sort_like()) continue;
      for (TypeId a : ctx.ancestors(*id))
        if (!n.applied.count(h.name(a)) && (h.entry(a).skeleton || h.entry(a).disjunctive() || a == *id)) done = false;
    }
    mark[i] = done;
  }
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (!mark[i]) continue;
      for (const auto& [attr, c] : f.node(i).arcs)
        if (!mark[c]) {
          mark[i] = false;
          changed = true;
          break;
        }
    }
  }
  return mark;
}

namespace detail {

class Expander {
 public:
  Expander(TypeContext& ctx, const ExpansionControl& control, bool witness)
      : ctx_(ctx), h_(ctx.hierarchy()), c_(control), witness_(witness) {}

  ExpansionResult run(const FeatureStructure& f) {
    ExpansionResult res;
    if (f.is_bottom()) {
      res.failure_path = f.failure_path();
      return res;
    }
    std::vector<State> stack;
    {
      Workspace w(ctx_);
      std::size_t root = w.add(f);
      stack.push_back(State{std::move(w), root});
    }
    bool bounded = false, failed_once = false;
    std::size_t processed = 0;
    while (!stack.empty()) {
      State s = std::move(stack.back());
      stack.pop_back();
      if (++processed > c_.max_alternatives) {
        bounded = true;
        res.bound_reason = "more than " + std::to_string(c_.max_alternatives) + " alternatives";
        break;
      }
      std::vector<State> kids;
      Step st = process(s, kids);
      if (st == Step::Done) {
        FeatureStructure out = s.ws.extract(s.root);
        res.expanded.push_back(expanded_marks(out, ctx_));
        res.alternatives.push_back(std::move(out));
        if (witness_) break;
      } else if (st == Step::Branch) {
        for (auto it = kids.rbegin(); it != kids.rend(); ++it) stack.push_back(std::move(*it));
      } else if (st == Step::Fail) {
        if (!failed_once) res.failure_path = s.ws.failure_path();
        failed_once = true;
      } else {
        bounded = true;
        if (!witness_) break;
      }
    }
    if (!res.alternatives.empty() && (witness_ || !bounded)) {
      res.outcome = Outcome::Yes;
    } else if (bounded) {
      res.outcome = Outcome::Bounded;
      res.alternatives.clear();
      res.expanded.clear();
      if (res.bound_reason.empty()) res.bound_reason = bound_reason_;
    } else {
      res.outcome = Outcome::No;
    }
    return res;
  }

 private:
  struct State {
    Workspace ws;
    std::size_t root;
  };
  enum class Step { Done, Branch, Fail, Bound };

  struct Item {
    std::size_t node;
    Path path;
    std::vector<std::size_t> above;  // nodes on the path, root first
  };

  Step process(State& s, std::vector<State>& kids) {
    for (std::size_t pass = 0;; ++pass) {
      bool changed = false;
      std::set<std::size_t> seen;
      std::deque<Item> queue{{s.ws.find(s.root), {}, {}}};
      seen.insert(queue.front().node);
      while (!queue.empty()) {
        Item it = std::move(queue.front());
        queue.pop_front();
        it.node = s.ws.find(it.node);
        Step st = work_at(s, it, kids, changed);
        if (st != Step::Done) return st;
        if (s.ws.failed()) return Step::Fail;
        for (const auto& [attr, c] : s.ws.node(it.node).arcs) {
          std::size_t r = s.ws.find(c);
          if (!seen.insert(r).second) continue;
          Item next{r, it.path, it.above};
          next.path.push_back(attr);
          next.above.push_back(it.node);
          queue.push_back(std::move(next));
        }
      }
      if (!changed) return Step::Done;
      if (++work_ > kWorkLimit) {
        bound_reason_ = "work limit reached";
        return Step::Bound;
      }
    }
  }

  bool below_any(TypeId t, const std::set<std::string>& names) const {
    for (const auto& n : names) {
      auto id = h_.find(n);
      if (id && h_.subsumes(*id, t)) return true;
    }
    return false;
  }

  bool permitted(TypeId t, const Path& path) const {
    if (below_any(t, c_.exclude_types)) return false;
    if (!c_.include_types.empty() && !below_any(t, c_.include_types)) return false;
    for (const auto& p : c_.paths)
      if (p.negative && p.covers(path)) return false;
    return true;
  }

  bool forced(TypeId t, const Path& path) const {
    if (below_any(t, c_.always_types)) return true;
    for (const auto& p : c_.paths)
      if (!p.negative && p.leads_into(path)) return true;
    return false;
  }

  bool applied_above(const State& s, const Item& it, const std::string& name, int* count = nullptr) const {
    int n = 0;
    for (std::size_t a : it.above)
      if (s.ws.node(a).applied.count(name)) ++n;
    if (count) *count = n;
    return n > 0;
  }

  // Unifies t's own constraints (not its ancestors') into the node.
  bool graft(Workspace& w, std::size_t node, TypeId t, const Path& path) {
    w.mark_applied(node, h_.name(t));
    if (!h_.entry(t).skeleton) return true;
    const FeatureStructure& sk = ctx_.local_skeleton(t);
    std::size_t id = w.add(sk);
    return w.unify(node, id, path);
  }

  // Splits the state on the alternatives of a disjunctive type at `node`.
  void branch(State& s, std::size_t node, TypeId t, const Path& path, std::vector<State>& kids) {
    for (TypeId a : h_.entry(t).disj_alternatives) {
      State k{s.ws, s.root};
      if (k.ws.constrain(node, NormalForm::literal(Literal::type(h_.name(a))), path)) kids.push_back(std::move(k));
    }
  }

  // Applies t and its conjunctive ancestors; stops at the first disjunctive
  // one, which splits the state.
  Step apply(State& s, std::size_t node, TypeId t, const Path& path, std::vector<State>& kids) {
    for (TypeId a : ctx_.ancestors(t)) {
      if (s.ws.node(node).applied.count(h_.name(a))) continue;
      if (!graft(s.ws, node, a, path)) return Step::Fail;
      if (h_.entry(a).disjunctive()) {
        branch(s, node, a, path, kids);
        return kids.empty() ? Step::Fail : Step::Branch;
      }
    }
    return Step::Done;
  }

  // One-level trial of a recursive type that a prefix already carries.
  // Returns the surviving alternatives (t itself when conjunctive).
  std::vector<TypeId> trial(const State& s, std::size_t node, TypeId t, const Path& path) {
    std::vector<TypeId> alts = h_.entry(t).disjunctive() ? h_.entry(t).disj_alternatives : std::vector<TypeId>{t};
    std::vector<TypeId> out;
    for (TypeId a : alts) {
      State k{s.ws, s.root};
      bool ok = true;
      for (TypeId x : ctx_.ancestors(t))
        if (ok && !k.ws.node(node).applied.count(h_.name(x))) ok = graft(k.ws, node, x, path);
      if (ok && a != t) ok = k.ws.constrain(node, NormalForm::literal(Literal::type(h_.name(a))), path);
      for (TypeId x : a != t ? ctx_.ancestors(a) : std::vector<TypeId>{})
        if (ok && !k.ws.node(node).applied.count(h_.name(x))) ok = graft(k.ws, node, x, path);
      if (ok && !k.ws.failed()) out.push_back(a);
    }
    return out;
  }

  Step work_at(State& s, const Item& it, std::vector<State>& kids, bool& changed) {
    const NormalForm slot = s.ws.node(it.node).slot;
    if (slot.is_top()) return Step::Done;
    std::vector<TypeId> types;
    for (const auto& term : slot.sets())
      for (const auto& l : term) {
        auto id = ctx_.oracle().id_of(l);
        if (l.is_type() && id && !h_.entry(*id).sort_like()) types.push_back(*id);
      }
    if (slot.sets().size() > 1) {
      bool allowed = std::all_of(types.begin(), types.end(), [&](TypeId t) { return permitted(t, it.path); });
      if (!allowed) return Step::Done;
      if (c_.max_path_length && it.path.size() > *c_.max_path_length) return bound(it.path);
      for (const auto& term : slot.sets()) {
        State k{s.ws, s.root};
        if (k.ws.set_slot(it.node, NormalForm(Form::DNF, {term}), it.path)) kids.push_back(std::move(k));
      }
      return kids.empty() ? Step::Fail : Step::Branch;
    }
    for (TypeId t : types) {
      const std::string& name = h_.name(t);
      bool pending = false;
      for (TypeId a : ctx_.ancestors(t))
        if (!s.ws.node(it.node).applied.count(h_.name(a))) pending = true;
      if (!pending) continue;
      if (!permitted(t, it.path)) continue;
      bool force = forced(t, it.path);
      int nesting = 0;
      bool recurring = applied_above(s, it, name, &nesting);
      bool over = c_.max_path_length && it.path.size() > *c_.max_path_length;
      if (auto d = c_.depth.find(name); d != c_.depth.end() && nesting >= d->second) over = true;
      if (over) {
        if (c_.mode == Mode::Complete) return bound(it.path);
        continue;
      }
      if (c_.mode == Mode::Resolved && !force && recurring && h_.is_recursive(t)) {
        auto survivors = trial(s, it.node, t, it.path);
        if (survivors.empty()) {
          s.ws.fail(it.path);
          return Step::Fail;
        }
        if (survivors.size() == 1 && survivors[0] != t) {
          if (!s.ws.constrain(it.node, NormalForm::literal(Literal::type(h_.name(survivors[0]))), it.path))
            return Step::Fail;
          changed = true;
        }
        continue;
      }
      changed = true;
      Step st = apply(s, it.node, t, it.path, kids);
      if (st != Step::Done) return st;
    }
    return Step::Done;
  }

  Step bound(const Path& p) {
    bound_reason_ = "expansion bound exceeded at " + print_path(p);
    return Step::Bound;
  }

  static constexpr std::size_t kWorkLimit = 100000;

  TypeContext& ctx_;
  const Hierarchy& h_;
  const ExpansionControl& c_;
  bool witness_;
  std::size_t work_ = 0;
  std::string bound_reason_;
};

}  // namespace detail

/// All consistent alternatives of the expanded structure. `bounded` means
/// a bound stopped a complete expansion, so nothing was refuted.
inline ExpansionResult expand(const FeatureStructure& f, TypeContext& ctx, const ExpansionControl& control = {}) {
  return detail::Expander(ctx, control, false).run(f);
}

/// Stops at the first consistent alternative.
inline ExpansionResult find_witness(const FeatureStructure& f, TypeContext& ctx, const ExpansionControl& control = {}) {
  return detail::Expander(ctx, control, true).run(f);
}

inline Outcome satisfiable(const FeatureStructure& f, const FeatureStructure& g, TypeContext& ctx,
                           const ExpansionControl& control = {}) {
  FeatureStructure u = unify(f, g, ctx);
  if (u.is_bottom()) return Outcome::No;
  return find_witness(u, ctx, control).outcome;
}

struct ConsistencyEntry {
  std::string name;
  Outcome outcome = Outcome::Yes;
  Path where;
  FeatureStructure structure;
  std::string reason;
};

inline const char* consistency_name(Outcome o) {
  switch (o) {
    case Outcome::Yes: return "consistent";
    case Outcome::No: return "inconsistent";
    case Outcome::Bounded: return "bounded";
  }
  return "?";
}

/// Expands each named structure and reports whether it has a consistent
/// expansion.
inline std::vector<ConsistencyEntry> check_consistency(const std::vector<std::pair<std::string, FeatureStructure>>& items,
                                                       TypeContext& ctx, const ExpansionControl& control = {}) {
  std::vector<ConsistencyEntry> out;
  for (const auto& [name, fs] : items) {
    ConsistencyEntry e;
    e.name = name;
    auto r = find_witness(fs, ctx, control);
    e.outcome = r.outcome;
    if (r.outcome == Outcome::Yes) e.structure = r.alternatives[0];
    if (r.outcome == Outcome::No) e.where = r.failure_path;
    if (r.outcome == Outcome::Bounded) e.reason = r.bound_reason;
    out.push_back(std::move(e));
  }
  return out;
}

// ---------------------------------------------------------------------------
// The typed GLB with feature constraints

namespace detail {

inline void split_operand(const ExprPtr& e, std::vector<ExprPtr>& types, std::vector<ExprPtr>& features) {
  if (e->kind == ExprKind::Conj) {
    for (const auto& a : e->args) split_operand(a, types, features);
    return;
  }
  if (!mentions_structure(e)) {
    types.push_back(e);
    return;
  }
  if (e->kind != ExprKind::FeatureTerm && e->kind != ExprKind::List && e->kind != ExprKind::Coref)
    throw std::invalid_argument("feature constraints under disjunction or negation are not supported: " + print_expr(e));
  features.push_back(e);
}

inline ExprPtr join(const std::vector<ExprPtr>& xs) {
  if (xs.empty()) return nullptr;
  return xs.size() == 1 ? xs[0] : Expr::conj(xs);
}

}  // namespace detail

/// GLB of two operands that may each carry feature constraints. The type
/// parts meet in the hierarchy; feature constraints then decide whether an
/// avm result survives (by expansion) or whether two bare constraints unify.
inline GlbVerdict glb_typed(const ExprPtr& a, const ExprPtr& b, TypeContext& ctx, const ExpansionControl& control = {}) {
  std::vector<ExprPtr> ta, fa, tb, fb;
  detail::split_operand(a, ta, fa);
  detail::split_operand(b, tb, fb);
  auto type_nf = [&](const std::vector<ExprPtr>& ts) {
    return ts.empty() ? NormalForm::top(Form::DNF) : ctx.simplify(detail::join(ts));
  };
  NormalForm na = type_nf(ta), nb = type_nf(tb);
  if (fa.empty() && fb.empty()) return glb_types(na, nb, ctx);

  NormalForm t = ctx.meet(na, nb);
  if (t.is_bottom()) return {t, GlbAction::Fail};
  std::vector<ExprPtr> fcs = fa;
  fcs.insert(fcs.end(), fb.begin(), fb.end());
  ExprPtr fc = detail::join(fcs);

  if (ta.empty() && tb.empty()) {
    // Two bare feature constraints: ⊤ iff they unify.
    FeatureStructure u = unify(build_fs(detail::join(fa), ctx), build_fs(detail::join(fb), ctx), ctx);
    if (u.is_bottom()) return {NormalForm::bottom(Form::DNF), GlbAction::Fail};
    return {t, GlbAction::FeatureUnify};
  }

  std::vector<LitSet> kept;
  for (const auto& term : t.sets()) {
    bool leafy = std::any_of(term.begin(), term.end(), [&](const Literal& l) {
      return l.is_atom() || (l.is_type() && ctx.oracle().sort_like(l));
    });
    if (leafy) continue;
    FeatureStructure f = build_fs(fc, ctx);
    f = unify(f, FeatureStructure::of_type(NormalForm(Form::DNF, {term})), ctx);
    if (f.is_bottom()) continue;
    if (find_witness(f, ctx, control).outcome == Outcome::No) continue;
    kept.push_back(term);
  }
  if (kept.empty()) return {NormalForm::bottom(Form::DNF), GlbAction::Fail};
  return {NormalForm(Form::DNF, std::move(kept)), GlbAction::FeatureUnify};
}

}  // namespace tdl
