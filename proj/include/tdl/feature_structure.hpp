#pragma once

// Typed feature structures as immutable rooted graphs. Nodes carry a
// disjunctive-normal-form type slot and sorted feature arcs; sharing of a
// node between paths is coreference.

#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "tdl/normal_form.hpp"

namespace tdl {

using Path = std::vector<std::string>;

inline std::string print_path(const Path& p) {
  if (p.empty()) return "<root>";
  std::string s;
  for (std::size_t i = 0; i < p.size(); ++i) s += (i ? "|" : "") + p[i];
  return s;
}

/// Splits `A|B|C` into attributes.
inline Path parse_path(std::string_view text) {
  Path p;
  std::string cur;
  for (char c : text) {
    if (c == '|') {
      p.push_back(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      cur.push_back(c);
    }
  }
  if (!cur.empty() || !p.empty()) p.push_back(cur);
  return p;
}

struct FsNode {
  NormalForm slot = NormalForm::top(Form::DNF);
  std::map<std::string, std::size_t> arcs;
  std::set<std::string> applied;  // types whose definitions are unified in here
};

class FeatureStructure {
 public:
  /// A single unconstrained node.
  FeatureStructure() : nodes_(1) {}

  static FeatureStructure of_type(NormalForm slot) {
    FeatureStructure f;
    f.nodes_[0].slot = std::move(slot);
    if (f.nodes_[0].slot.is_bottom()) f.bottom_ = true;
    return f;
  }
  static FeatureStructure failure(Path where = {}) {
    FeatureStructure f;
    f.nodes_[0].slot = NormalForm::bottom(Form::DNF);
    f.bottom_ = true;
    f.fail_path_ = std::move(where);
    return f;
  }

  /// Takes nodes reachable from `root`, renumbered breadth-first.
  static FeatureStructure from_nodes(const std::vector<FsNode>& nodes, std::size_t root) {
    FeatureStructure f;
    f.nodes_.clear();
    std::map<std::size_t, std::size_t> ren;
    std::vector<std::size_t> order{root};
    ren[root] = 0;
    for (std::size_t i = 0; i < order.size(); ++i)
      for (const auto& [attr, c] : nodes[order[i]].arcs)
        if (ren.emplace(c, order.size()).second) order.push_back(c);
    for (std::size_t old : order) {
      FsNode n = nodes[old];
      for (auto& [attr, c] : n.arcs) c = ren.at(c);
      f.nodes_.push_back(std::move(n));
    }
    return f;
  }

  bool is_bottom() const { return bottom_; }
  const Path& failure_path() const { return fail_path_; }
  std::size_t root() const { return 0; }
  std::size_t size() const { return nodes_.size(); }
  const FsNode& node(std::size_t i) const { return nodes_.at(i); }
  const std::vector<FsNode>& nodes() const { return nodes_; }
  const NormalForm& root_type() const { return nodes_[0].slot; }

  /// Node reached by following `p` from the root, if every arc exists.
  std::optional<std::size_t> get_path(const Path& p) const {
    if (bottom_) return std::nullopt;
    std::size_t n = 0;
    for (const auto& a : p) {
      auto it = nodes_[n].arcs.find(a);
      if (it == nodes_[n].arcs.end()) return std::nullopt;
      n = it->second;
    }
    return n;
  }

  /// Every node with the first (breadth-first, attribute-sorted) path to it.
  std::vector<std::pair<std::size_t, Path>> paths() const {
    std::vector<std::pair<std::size_t, Path>> out{{0, {}}};
    std::vector<bool> seen(nodes_.size(), false);
    seen[0] = true;
    for (std::size_t i = 0; i < out.size(); ++i) {
      auto [n, p] = out[i];
      for (const auto& [attr, c] : nodes_[n].arcs) {
        if (seen[c]) continue;
        seen[c] = true;
        Path q = p;
        q.push_back(attr);
        out.emplace_back(c, std::move(q));
      }
    }
    return out;
  }

 private:
  std::vector<FsNode> nodes_;
  bool bottom_ = false;
  Path fail_path_;
};

// ---------------------------------------------------------------------------
// Printing

namespace detail {

class FsPrinter {
 public:
  explicit FsPrinter(const FeatureStructure& f) : f_(f), indeg_(f.size(), 0), tag_(f.size(), 0) {
    indeg_[0] = 1;
    for (const auto& n : f.nodes())
      for (const auto& [attr, c] : n.arcs) ++indeg_[c];
  }

  std::string run() {
    std::string s;
    print(0, s);
    return s;
  }

 private:
  bool shared(std::size_t n) const { return indeg_[n] > 1; }

  static bool is_exactly(const NormalForm& nf, const char* type) {
    return nf.is_literal() && nf.sets()[0][0].is_type() && nf.sets()[0][0].text == type;
  }

  bool cons_cell(std::size_t n) const {
    const auto& node = f_.node(n);
    return is_exactly(node.slot, "cons") && node.arcs.size() == 2 && node.arcs.count("FIRST") && node.arcs.count("REST");
  }

  void print(std::size_t n, std::string& out) {
    if (tag_[n]) {
      out += "#" + std::to_string(tag_[n]);
      return;
    }
    std::vector<std::string> parts;
    if (shared(n)) {
      tag_[n] = ++next_;
      parts.push_back("#" + std::to_string(tag_[n]));
    }
    const auto& node = f_.node(n);
    if (node.arcs.empty() && is_exactly(node.slot, "null-list")) {
      parts.push_back("< >");
    } else if (cons_cell(n)) {
      parts.push_back(list_text(n));
    } else {
      if (!node.slot.is_top()) {
        std::string t = print_nf(node.slot);
        if (node.slot.sets().size() > 1 && (!parts.empty() || !node.arcs.empty())) t = "(" + t + ")";
        parts.push_back(t);
      }
      if (!node.arcs.empty()) {
        std::string s = "[";
        bool first = true;
        for (const auto& [attr, c] : node.arcs) {
          s += (first ? "" : ", ") + attr + " ";
          first = false;
          print(c, s);
        }
        parts.push_back(s + "]");
      }
    }
    if (parts.empty()) {
      out += kTopName;
      return;
    }
    for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? " & " : "") + parts[i];
  }

  std::string list_text(std::size_t n) {
    std::string s = "<";
    bool first = true;
    std::size_t cur = n;
    while (true) {
      const auto& node = f_.node(cur);
      s += first ? " " : ", ";
      first = false;
      print(node.arcs.at("FIRST"), s);
      std::size_t rest = node.arcs.at("REST");
      if (!shared(rest) && cons_cell(rest)) {
        cur = rest;
        continue;
      }
      const auto& tail = f_.node(rest);
      if (!shared(rest) && tail.arcs.empty() && is_exactly(tail.slot, "null-list")) return s + " >";
      s += " . ";
      print(rest, s);
      return s + " >";
    }
  }

  const FeatureStructure& f_;
  std::vector<int> indeg_;
  std::vector<int> tag_;
  int next_ = 0;
};

}  // namespace detail

/// Linear attribute-value notation. Shared nodes carry a tag `#n` at their
/// first occurrence and are referenced by it afterwards; FIRST/REST chains
/// print as lists. The text is canonical: isomorphic structures print alike.
inline std::string print_fs(const FeatureStructure& f) {
  if (f.is_bottom()) return std::string(kBottomName);
  return detail::FsPrinter(f).run();
}

inline bool isomorphic(const FeatureStructure& a, const FeatureStructure& b) { return print_fs(a) == print_fs(b); }

}  // namespace tdl
