#pragma once

// Independent brute-force oracles shared by the unit and acceptance tests.
// Nothing here calls the library's own order, simplification or
// unification logic; it only reads structures the library produced.

#include <algorithm>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "tdl/tdl.hpp"

namespace oracle {

inline void load(tdl::Hierarchy& h, std::string_view text) {
  for (const auto& d : tdl::parse_definitions(tdl::tokenize(text))) h.define(d.def);
}

// ---------------------------------------------------------------------------
// Finite partial orders given by explicit edges

struct Order {
  std::vector<std::string> names;
  std::vector<std::vector<bool>> le;  // le[a][b]: a ⪯ b

  explicit Order(std::vector<std::string> ns) : names(std::move(ns)), le(names.size(), std::vector<bool>(names.size())) {
    for (std::size_t i = 0; i < names.size(); ++i) le[i][i] = true;
  }
  int index(const std::string& n) const {
    auto it = std::find(names.begin(), names.end(), n);
    return it == names.end() ? -1 : static_cast<int>(it - names.begin());
  }
  void below(const std::string& a, const std::string& b) { le[index(a)][index(b)] = true; }
  void close() {
    std::size_t n = names.size();
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t i = 0; i < n; ++i)
        if (le[i][k])
          for (std::size_t j = 0; j < n; ++j)
            if (le[k][j]) le[i][j] = true;
  }
  std::set<std::string> maximal_lower(int a, int b) const {
    std::vector<int> common;
    for (std::size_t i = 0; i < names.size(); ++i)
      if (le[i][a] && le[i][b]) common.push_back(static_cast<int>(i));
    std::set<std::string> out;
    for (int c : common)
      if (std::none_of(common.begin(), common.end(), [&](int d) { return d != c && le[c][d]; })) out.insert(names[c]);
    return out;
  }
  std::set<std::string> minimal_upper(int a, int b) const {
    std::vector<int> common;
    for (std::size_t i = 0; i < names.size(); ++i)
      if (le[a][i] && le[b][i]) common.push_back(static_cast<int>(i));
    std::set<std::string> out;
    for (int c : common)
      if (std::none_of(common.begin(), common.end(), [&](int d) { return d != c && le[d][c]; })) out.insert(names[c]);
    return out;
  }
};

/// A random acyclic type graph as grammar text plus its explicit order.
/// Types are conjunctions of earlier types or, when `disjunctions` is set,
/// disjunctions of earlier types.
struct RandomGraph {
  std::string text;
  Order order{{}};
};

inline RandomGraph random_graph(std::mt19937& rng, int n, bool disjunctions) {
  std::vector<std::string> names{"*top*"};
  for (int i = 0; i < n; ++i) names.push_back("g" + std::to_string(i));
  RandomGraph g{"", Order(names)};
  for (int i = 1; i <= n; ++i) {
    const std::string& me = names[i];
    g.order.below(me, "*top*");
    if (i == 1) {
      g.text += me + " := *top*.\n";
      continue;
    }
    std::uniform_int_distribution<int> pick(1, i - 1);
    bool disj = disjunctions && i > 2 && rng() % 4 == 0;
    int k = 1 + static_cast<int>(rng() % 3);
    std::set<int> ps;
    for (int j = 0; j < k; ++j) ps.insert(pick(rng));
    if (disj && ps.size() < 2) disj = false;
    if (!disj && rng() % 5 == 0) {
      g.text += me + " := *top*.\n";
      continue;
    }
    std::string body;
    for (int p : ps) {
      body += (body.empty() ? "" : disj ? " | " : " & ") + names[p];
      if (disj) g.order.below(names[p], me);
      else g.order.below(me, names[p]);
    }
    g.text += me + " := " + body + ".\n";
  }
  g.order.close();
  return g;
}

// ---------------------------------------------------------------------------
// Pointwise boolean semantics for type expressions. A valuation says which
// type symbols hold at one point of the universe; set-theoretic equality of
// denotations is equality at every admissible point.

using Valuation = std::map<std::string, bool>;

inline bool eval(const tdl::ExprPtr& e, const Valuation& v) {
  using tdl::ExprKind;
  switch (e->kind) {
    case ExprKind::TypeName:
      if (e->name == "*top*") return true;
      if (e->name == "*bottom*") return false;
      return v.at(e->name);
    case ExprKind::Neg:
      return !eval(e->args[0], v);
    case ExprKind::Conj:
      return std::all_of(e->args.begin(), e->args.end(), [&](const auto& a) { return eval(a, v); });
    case ExprKind::Disj:
      return std::any_of(e->args.begin(), e->args.end(), [&](const auto& a) { return eval(a, v); });
    case ExprKind::Xor:
      return eval(e->args[0], v) != eval(e->args[1], v);
    default:
      throw std::logic_error("eval: unsupported expression");
  }
}

inline bool eval(const tdl::Literal& l, const Valuation& v) {
  if (l.kind == tdl::LitKind::Type) return v.at(l.text);
  if (l.kind == tdl::LitKind::NegType) return !v.at(l.text);
  throw std::logic_error("eval: unsupported literal");
}

inline bool eval(const tdl::NormalForm& nf, const Valuation& v) {
  const auto& sets = nf.sets();
  if (nf.form() == tdl::Form::DNF)
    return std::any_of(sets.begin(), sets.end(), [&](const auto& s) {
      return std::all_of(s.begin(), s.end(), [&](const auto& l) { return eval(l, v); });
    });
  return std::all_of(sets.begin(), sets.end(), [&](const auto& s) {
    return std::any_of(s.begin(), s.end(), [&](const auto& l) { return eval(l, v); });
  });
}

/// Constraints on admissible points: implications a → b and incompatible
/// sets.
struct PointConstraints {
  std::vector<std::string> symbols;
  std::vector<std::pair<std::string, std::string>> implies;
  std::vector<std::vector<std::string>> disjoint;

  bool admits(const Valuation& v) const {
    for (const auto& [a, b] : implies)
      if (v.at(a) && !v.at(b)) return false;
    for (const auto& s : disjoint)
      if (std::all_of(s.begin(), s.end(), [&](const auto& x) { return v.at(x); })) return false;
    return true;
  }

  template <class F>
  void for_each_point(F&& f) const {
    std::size_t n = symbols.size();
    for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
      Valuation v;
      for (std::size_t i = 0; i < n; ++i) v[symbols[i]] = (mask >> i) & 1;
      if (admits(v)) f(v);
    }
  }
};

// ---------------------------------------------------------------------------
// Random type expressions

struct RandomWorld {
  tdl::Hierarchy h;
  PointConstraints pc;
};

// A few order edges and incompatibilities over the symbols, mirrored into
// point constraints written down independently of the hierarchy.
inline void random_world(std::mt19937& rng, const std::vector<std::string>& syms, RandomWorld& w) {
  w.pc.symbols = syms;
  std::string text;
  for (std::size_t i = 0; i < syms.size(); ++i) {
    if (i > 0 && rng() % 3 == 0) {
      const auto& p = syms[rng() % i];
      text += syms[i] + " := " + p + ".\n";
      w.pc.implies.emplace_back(syms[i], p);
    } else {
      text += syms[i] + " := *top*.\n";
    }
  }
  for (int k = 0; k < 2; ++k) {
    std::size_t a = rng() % syms.size(), b = rng() % syms.size();
    if (a == b) continue;
    Order ord(syms);
    for (const auto& [x, y] : w.pc.implies) ord.below(x, y);
    ord.close();
    if (ord.le[a][b] || ord.le[b][a]) continue;
    text += "bottom = " + syms[a] + " & " + syms[b] + ".\n";
    w.pc.disjoint.push_back({syms[a], syms[b]});
  }
  load(w.h, text);
}

inline tdl::ExprPtr random_expr(std::mt19937& rng, const std::vector<std::string>& symbols, int depth) {
  using tdl::Expr;
  auto leaf = [&] { return Expr::type(symbols[rng() % symbols.size()]); };
  if (depth <= 0 || rng() % 4 == 0) return rng() % 6 == 0 ? Expr::neg(leaf()) : leaf();
  switch (rng() % 5) {
    case 0:
      return Expr::neg(random_expr(rng, symbols, depth - 1));
    case 1:
      return Expr::xor_of(random_expr(rng, symbols, depth - 1), random_expr(rng, symbols, depth - 1));
    case 2:
    case 3: {
      std::vector<tdl::ExprPtr> ops;
      int k = 2 + static_cast<int>(rng() % 2);
      for (int i = 0; i < k; ++i) ops.push_back(random_expr(rng, symbols, depth - 1));
      return Expr::conj(std::move(ops));
    }
    default: {
      std::vector<tdl::ExprPtr> ops;
      int k = 2 + static_cast<int>(rng() % 2);
      for (int i = 0; i < k; ++i) ops.push_back(random_expr(rng, symbols, depth - 1));
      return Expr::disj(std::move(ops));
    }
  }
}

/// Shuffles operands of ∧/∨ and regroups them at random, keeping the
/// meaning and changing only commutation and association.
inline tdl::ExprPtr commute(std::mt19937& rng, const tdl::ExprPtr& e) {
  using tdl::Expr;
  using tdl::ExprKind;
  switch (e->kind) {
    case ExprKind::Neg:
      return Expr::neg(commute(rng, e->args[0]));
    case ExprKind::Xor:
      return rng() % 2 ? Expr::xor_of(commute(rng, e->args[0]), commute(rng, e->args[1]))
                       : Expr::xor_of(commute(rng, e->args[1]), commute(rng, e->args[0]));
    case ExprKind::Conj:
    case ExprKind::Disj: {
      std::vector<tdl::ExprPtr> ops;
      for (const auto& a : e->args) ops.push_back(commute(rng, a));
      std::shuffle(ops.begin(), ops.end(), rng);
      if (ops.size() > 2 && rng() % 2) {
        auto inner = Expr::nary(e->kind, {ops[0], ops[1]});
        ops.erase(ops.begin(), ops.begin() + 2);
        ops.insert(ops.begin() + static_cast<long>(rng() % (ops.size() + 1)), inner);
      }
      return Expr::nary(e->kind, std::move(ops));
    }
    default:
      return e;
  }
}

// ---------------------------------------------------------------------------
// Feature structures

/// Isomorphism by simultaneous traversal from the roots; arcs are
/// functional, so the node correspondence is forced.
inline bool isomorphic(const tdl::FeatureStructure& f, const tdl::FeatureStructure& g) {
  if (f.is_bottom() || g.is_bottom()) return f.is_bottom() && g.is_bottom();
  if (f.size() != g.size()) return false;
  std::map<std::size_t, std::size_t> fw, bw;
  std::vector<std::pair<std::size_t, std::size_t>> todo{{f.root(), g.root()}};
  fw[f.root()] = g.root();
  bw[g.root()] = f.root();
  while (!todo.empty()) {
    auto [a, b] = todo.back();
    todo.pop_back();
    const auto& na = f.node(a);
    const auto& nb = g.node(b);
    if (!(na.slot == nb.slot) || na.arcs.size() != nb.arcs.size()) return false;
    for (const auto& [attr, ca] : na.arcs) {
      auto it = nb.arcs.find(attr);
      if (it == nb.arcs.end()) return false;
      std::size_t cb = it->second;
      auto fi = fw.find(ca);
      auto bi = bw.find(cb);
      if (fi == fw.end() && bi == bw.end()) {
        fw[ca] = cb;
        bw[cb] = ca;
        todo.emplace_back(ca, cb);
      } else if (fi == fw.end() || bi == bw.end() || fi->second != cb || bi->second != ca) {
        return false;
      }
    }
  }
  return true;
}

/// Slot subsumption decided pointwise: every admissible point satisfying
/// `lower` satisfies `upper`.
inline bool slot_subsumes(const tdl::NormalForm& upper, const tdl::NormalForm& lower, const PointConstraints& pc) {
  bool ok = true;
  pc.for_each_point([&](const Valuation& v) {
    if (ok && eval(lower, v) && !eval(upper, v)) ok = false;
  });
  return ok;
}

/// f ⊑-subsumes g: the forced path mapping from f into g exists, preserves
/// sharing, and every f slot subsumes its image.
inline bool subsumes(const tdl::FeatureStructure& f, const tdl::FeatureStructure& g, const PointConstraints& pc) {
  if (g.is_bottom()) return true;
  if (f.is_bottom()) return false;
  std::map<std::size_t, std::size_t> m{{f.root(), g.root()}};
  std::vector<std::size_t> todo{f.root()};
  while (!todo.empty()) {
    std::size_t a = todo.back();
    todo.pop_back();
    std::size_t b = m[a];
    if (!slot_subsumes(f.node(a).slot, g.node(b).slot, pc)) return false;
    for (const auto& [attr, ca] : f.node(a).arcs) {
      auto it = g.node(b).arcs.find(attr);
      if (it == g.node(b).arcs.end()) return false;
      auto mi = m.find(ca);
      if (mi == m.end()) {
        m[ca] = it->second;
        todo.push_back(ca);
      } else if (mi->second != it->second) {
        return false;
      }
    }
  }
  return true;
}

/// Random AVM text over the given slot vocabulary: at most `max_nodes`
/// nodes, attributes F and G, occasional coreference.
inline std::string random_avm(std::mt19937& rng, const std::vector<std::string>& slots, std::size_t max_nodes) {
  std::size_t nodes = 0;
  std::vector<std::string> tags;
  std::function<std::string(int)> node = [&](int depth) -> std::string {
    ++nodes;
    std::vector<std::string> parts;
    if (!tags.empty() && rng() % 5 == 0) parts.push_back(tags[rng() % tags.size()]);
    else if (rng() % 4 == 0) {
      tags.push_back("#t" + std::to_string(tags.size()));
      parts.push_back(tags.back());
    }
    if (rng() % 3 != 0) parts.push_back(slots[rng() % slots.size()]);
    std::vector<std::string> feats;
    for (const char* a : {"F", "G"})
      if (depth < 2 && nodes < max_nodes && rng() % 2 == 0) feats.push_back(std::string(a) + " " + node(depth + 1));
    if (!feats.empty()) {
      std::string s = "[";
      for (std::size_t i = 0; i < feats.size(); ++i) s += (i ? ", " : "") + feats[i];
      parts.push_back(s + "]");
    }
    if (parts.empty()) return "*top*";
    std::string s;
    for (std::size_t i = 0; i < parts.size(); ++i) s += (i ? " & " : "") + parts[i];
    return s;
  };
  return node(0);
}

/// Every pair of paths reaching the same node.
inline std::vector<std::pair<tdl::Path, tdl::Path>> coreferent_paths(const tdl::FeatureStructure& f) {
  std::vector<std::pair<tdl::Path, tdl::Path>> out;
  if (f.is_bottom()) return out;
  std::map<std::size_t, std::vector<tdl::Path>> at;
  std::vector<std::pair<std::size_t, tdl::Path>> todo{{f.root(), {}}};
  std::set<std::pair<std::size_t, std::size_t>> seen_edge;
  while (!todo.empty()) {
    auto [n, p] = todo.back();
    todo.pop_back();
    at[n].push_back(p);
    if (p.size() > 4) continue;
    for (const auto& [attr, c] : f.node(n).arcs) {
      tdl::Path q = p;
      q.push_back(attr);
      todo.emplace_back(c, std::move(q));
    }
  }
  for (const auto& [n, ps] : at)
    for (std::size_t i = 1; i < ps.size(); ++i) out.emplace_back(ps[0], ps[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Lists

/// Reads a FIRST/REST chain of atoms ending in null-list; nullopt when the
/// value is not such a closed list.
inline std::optional<std::vector<std::string>> read_list(const tdl::FeatureStructure& f, std::size_t n) {
  std::vector<std::string> out;
  for (int guard = 0; guard < 64; ++guard) {
    const auto& node = f.node(n);
    auto first = node.arcs.find("FIRST");
    auto rest = node.arcs.find("REST");
    if (first == node.arcs.end() || rest == node.arcs.end()) {
      if (node.arcs.empty() && tdl::print_nf(node.slot) == "null-list") return out;
      return std::nullopt;
    }
    const auto& slot = f.node(first->second).slot;
    if (!slot.is_literal() || !slot.sets()[0][0].is_atom()) return std::nullopt;
    out.push_back(tdl::print_literal(slot.sets()[0][0]));
    n = rest->second;
  }
  return std::nullopt;
}

inline std::string list_text(const std::vector<std::string>& xs) {
  std::string s = "<";
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? ", " : " ") + xs[i];
  return s + (xs.empty() ? ">" : " >");
}

}  // namespace oracle
