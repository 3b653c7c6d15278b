#pragma once

// A grammar session: the store of types, templates, instances and expansion
// controls, plus the line-oriented command language used by the CLI.

#include <fstream>
#include <functional>
#include <iomanip>
#include <memory>
#include <sstream>

#include "tdl/expansion.hpp"

namespace tdl {

inline constexpr const char* kReportHeader = "tdl-report 1";

struct SessionOptions {
  Encoding encoding = Encoding::TransitiveClosure;
  Form definition_form = Form::CNF;
  bool memoize = true;
  ExpansionControl control;
};

/// Splits command arguments at top-level commas.
inline std::vector<std::string> split_arguments(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (in_string) {
      cur.push_back(c);
      if (c == '\\' && i + 1 < text.size()) cur.push_back(text[++i]);
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    if (c == '[' || c == '<' || c == '(') ++depth;
    if (c == ']' || c == '>' || c == ')') --depth;
    if (c == ',' && depth == 0) {
      out.push_back(cur);
      cur.clear();
      continue;
    }
    cur.push_back(c);
  }
  out.push_back(cur);
  for (auto& s : out) {
    auto b = s.find_first_not_of(" \t");
    auto e = s.find_last_not_of(" \t");
    s = b == std::string::npos ? "" : s.substr(b, e - b + 1);
  }
  return out;
}

class Session {
 public:
  explicit Session(SessionOptions opts = {})
      : opts_(std::move(opts)), hierarchy_(opts_.definition_form, opts_.encoding), control_(opts_.control) {
    ctx_ = std::make_unique<TypeContext>(hierarchy_, opts_.memoize);
  }

  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  const Hierarchy& hierarchy() const { return hierarchy_; }
  TypeContext& context() { return *ctx_; }
  const ExpansionControl& control() const { return control_; }
  ExpansionControl& control() { return control_; }
  const std::map<std::string, TemplateDef>& templates() const { return templates_; }
  const std::vector<std::pair<std::string, ExprPtr>>& instances() const { return instances_; }
  bool frozen() const { return frozen_; }

  bool had_error() const { return errors_ > 0; }
  bool found_inconsistency() const { return inconsistent_; }
  bool quit_requested() const { return quit_; }

  /// 0 ok, 1 inconsistency found, 2 error.
  int exit_status() const { return errors_ ? 2 : inconsistent_ ? 1 : 0; }

  // -- definitions ---------------------------------------------------------

  void define(const DefinitionAst& d) {
    frozen_ = false;
    std::visit(
        [&](const auto& x) {
          using T = std::decay_t<decltype(x)>;
          if constexpr (std::is_same_v<T, TemplateDef>) {
            std::set<std::string> seen;
            for (const auto& p : x.params)
              if (!seen.insert(p).second) throw TemplateError("template " + x.name + " repeats parameter " + p);
            auto saved = templates_;
            templates_[x.name] = x;
            try {
              expand_templates(DefinitionAst{x}, templates_);
            } catch (...) {
              templates_ = std::move(saved);
              throw;
            }
          } else if constexpr (std::is_same_v<T, InstanceDef>) {
            InstanceDef inst = std::get<InstanceDef>(expand_templates(DefinitionAst{x}, templates_));
            auto it = std::find_if(instances_.begin(), instances_.end(), [&](const auto& p) { return p.first == x.name; });
            if (it != instances_.end()) it->second = inst.body;
            else instances_.emplace_back(inst.name, inst.body);
          } else {
            hierarchy_.define(expand_templates(DefinitionAst{x}, templates_));
          }
        },
        d);
  }

  /// Loads grammar text: type sections, `%instances.` and `%control.`.
  void load(std::string_view text) {
    for (const auto& sec : split_sections(text)) {
      if (sec.kind == SectionKind::Control) {
        control_.apply_text(sec.text);
        continue;
      }
      auto defs = parse_definitions(tokenize(sec.text, sec.start), sec.kind == SectionKind::Instances);
      for (const auto& d : defs) {
        try {
          define(d.def);
        } catch (const SyntaxError&) {
          throw;
        } catch (const std::exception& e) {
          throw SyntaxError(e.what(), d.pos);
        }
      }
    }
  }

  void freeze() {
    hierarchy_.freeze();
    frozen_ = true;
  }

  // -- queries -------------------------------------------------------------

  ExprPtr expression(std::string_view text) const { return expand_templates(parse_expression(text), templates_); }

  FeatureStructure structure(std::string_view text) { return build_fs(expression(text), *ctx_); }

  /// Named structures for a consistency check: every user type, then every
  /// instance, in definition order.
  std::vector<std::pair<std::string, FeatureStructure>> check_items() {
    std::vector<std::pair<std::string, FeatureStructure>> items;
    for (TypeId t : hierarchy_.user_types()) {
      const auto& e = hierarchy_.entry(t);
      if (!e.defined) continue;
      items.emplace_back(e.name, FeatureStructure::of_type(NormalForm::literal(Literal::type(e.name))));
    }
    for (const auto& [name, body] : instances_) items.emplace_back(name, build_fs(body, *ctx_));
    return items;
  }

  // -- command language ----------------------------------------------------

  /// Feeds one line of REPL input. Definitions may span lines; they are
  /// collected until a terminating `.`. Output goes to `out`.
  void feed_line(std::string_view line, std::ostream& out) {
    std::string trimmed(line);
    if (auto c = comment_start(trimmed); c != std::string::npos) trimmed.erase(c);
    auto b = trimmed.find_first_not_of(" \t\r");
    trimmed = b == std::string::npos ? "" : trimmed.substr(b, trimmed.find_last_not_of(" \t\r") - b + 1);
    ++line_no_;
    if (pending_.empty()) {
      if (trimmed.empty()) return;
      if (trimmed[0] == ':') {
        command(trimmed, out);
        return;
      }
      if (trimmed[0] == '%') {
        guarded(out, [&] { directive(trimmed); });
        return;
      }
      if (section_ == SectionKind::Control) {
        guarded(out, [&] {
          control_.apply_line(trimmed);
        });
        return;
      }
      pending_start_ = line_no_;
    }
    pending_ += std::string(line) + "\n";
    if (!trimmed.empty() && trimmed.back() == '.' && balanced(pending_)) {
      std::string text = std::move(pending_);
      pending_.clear();
      guarded(out, [&] {
        auto defs = parse_definitions(tokenize(text, {pending_start_, 1}), section_ == SectionKind::Instances);
        for (const auto& d : defs) define(d.def);
      });
    }
  }

  /// Runs a whole script through feed_line.
  void run_script(std::string_view text, std::ostream& out) {
    std::size_t i = 0;
    while (i <= text.size() && !quit_) {
      std::size_t nl = text.find('\n', i);
      feed_line(text.substr(i, nl == std::string_view::npos ? std::string_view::npos : nl - i), out);
      if (nl == std::string_view::npos) break;
      i = nl + 1;
    }
    if (!pending_.empty()) {
      ++errors_;
      out << "error: unterminated definition starting at line " << pending_start_ << "\n";
      pending_.clear();
    }
  }

  /// Executes one `:command` line.
  void command(std::string_view line, std::ostream& out) {
    std::string cmd(line.substr(0, line.find_first_of(" \t")));
    std::string arg = cmd.size() < line.size() ? std::string(line.substr(cmd.size())) : "";
    if (auto b = arg.find_first_not_of(" \t"); b != std::string::npos) arg = arg.substr(b);
    else arg.clear();
    guarded(out, [&] { dispatch(cmd, arg, out); });
  }

  /// Reports names that are used but never defined.
  std::string undefined_report() const {
    auto names = hierarchy_.undefined_names();
    if (names.empty()) return "";
    std::string s = "undefined:";
    for (const auto& n : names) s += " " + n;
    return s + "\n";
  }

  std::string stats_report() const {
    std::ostringstream os;
    auto st = ctx_->memo_stats();
    std::size_t user = hierarchy_.user_types().size(), live = hierarchy_.live_types().size(), inter = 0;
    for (TypeId t : hierarchy_.live_types())
      if (hierarchy_.entry(t).kind == TypeKind::Intermediate) ++inter;
    os << "types: " << live << " (user " << user << ", intermediate " << inter << ")\n";
    os << "templates: " << templates_.size() << "\n";
    os << "instances: " << instances_.size() << "\n";
    os << "code-width: " << hierarchy_.code_width() << " (" << (hierarchy_.encoding() == Encoding::Compact ? "compact" : "transitive-closure") << ")\n";
    os << "memo: " << (ctx_->memoizing() ? "on" : "off") << "\n";
    os << "memo-entries: " << st.entries << "\n";
    os << "memo-reuses: " << st.hits << "\n";
    os << "memo-reused-entries: " << st.reused_entries << "\n";
    os << "memo-proper: " << std::fixed << std::setprecision(1) << st.proper_percentage() << "%\n";
    os << "memo-histogram:";
    for (const char* b : {"0", "1", "2-9", "10-99", "100+"}) {
      auto it = st.histogram.find(b);
      os << " " << b << "=" << (it == st.histogram.end() ? 0 : it->second);
    }
    os << "\n";
    return os.str();
  }

 private:
  static std::size_t comment_start(const std::string& s) {
    bool in_string = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) in_string = !in_string;
      if (s[i] == ';' && !in_string) return i;
    }
    return std::string::npos;
  }

  // Brackets closed, so a trailing '.' ends the definition and is not a
  // list tail separator.
  static bool balanced(const std::string& s) {
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
      char c = s[i];
      if (in_string) {
        if (c == '\\') ++i;
        else if (c == '"') in_string = false;
        continue;
      }
      if (c == ';') {
        while (i < s.size() && s[i] != '\n') ++i;
        continue;
      }
      if (c == '"') in_string = true;
      if (c == '[' || c == '<' || c == '(') ++depth;
      if (c == ']' || c == '>' || c == ')') --depth;
    }
    return depth <= 0;
  }

  void directive(const std::string& line) {
    if (line == "%instances.") section_ = SectionKind::Instances;
    else if (line == "%types.") section_ = SectionKind::Types;
    else if (line == "%control.") section_ = SectionKind::Control;
    else throw SyntaxError("unknown directive " + line, {line_no_, 1});
  }

  void guarded(std::ostream& out, const std::function<void()>& f) {
    try {
      f();
    } catch (const SyntaxError& e) {
      ++errors_;
      out << "error: " << e.what() << "\n";
    } catch (const FormTooLarge& e) {
      ++errors_;
      out << "error: form too large: " << e.what() << "\n";
    } catch (const std::exception& e) {
      ++errors_;
      out << "error: " << e.what() << "\n";
    }
  }

  std::pair<ExprPtr, ExprPtr> two(const std::string& cmd, const std::string& arg) const {
    auto parts = split_arguments(arg);
    if (parts.size() != 2 || parts[0].empty() || parts[1].empty())
      throw std::invalid_argument(cmd + " expects two comma-separated arguments");
    return {expression(parts[0]), expression(parts[1])};
  }

  TypeId type_operand(const ExprPtr& e) const {
    if (e->kind != ExprKind::TypeName) throw std::invalid_argument("expected a type name, got " + print_expr(e));
    return hierarchy_.id(e->name);
  }

  // Pulls `--flag value` overrides off the end of an :expand argument.
  ExpansionControl overrides(std::string& arg) const {
    ExpansionControl c = control_;
    auto pos = arg.find(" --");
    if (arg.rfind("--", 0) == 0) pos = 0;
    if (pos == std::string::npos) return c;
    std::istringstream is(arg.substr(pos));
    arg = arg.substr(0, pos);
    std::string flag, value;
    while (is >> flag) {
      if (flag.rfind("--", 0) != 0) throw std::invalid_argument("unexpected " + flag);
      std::string key = flag.substr(2);
      std::string line = key;
      if (!(is >> value)) throw std::invalid_argument(flag + " needs a value");
      line += " " + value;
      if (key == "depth") {
        std::string n;
        if (!(is >> n)) throw std::invalid_argument("--depth needs a type and a bound");
        line += " " + n;
      }
      c.apply_line(line);
    }
    return c;
  }

  void dispatch(const std::string& cmd, std::string arg, std::ostream& out) {
    if (cmd == ":quit") {
      quit_ = true;
    } else if (cmd == ":freeze") {
      freeze();
      out << "frozen\n";
    } else if (cmd == ":glb") {
      auto [a, b] = two(cmd, arg);
      out << print_nf(glb_typed(a, b, *ctx_, control_).result) << "\n";
    } else if (cmd == ":glb-verdict") {
      auto [a, b] = two(cmd, arg);
      auto v = glb_typed(a, b, *ctx_, control_);
      out << print_nf(v.result) << " ; " << action_name(v.action) << "\n";
    } else if (cmd == ":lub") {
      auto [a, b] = two(cmd, arg);
      out << print_nf(hierarchy_.lub_codes(type_operand(a), type_operand(b))) << "\n";
    } else if (cmd == ":subsumes") {
      auto [a, b] = two(cmd, arg);
      bool r;
      if (a->kind == ExprKind::TypeName && b->kind == ExprKind::TypeName && hierarchy_.find(a->name) &&
          hierarchy_.find(b->name))
        r = hierarchy_.subsumes(hierarchy_.id(a->name), hierarchy_.id(b->name));
      else
        r = subsumes_fs(build_fs(a, *ctx_), build_fs(b, *ctx_), *ctx_);
      out << (r ? "true" : "false") << "\n";
    } else if (cmd == ":unify") {
      auto [a, b] = two(cmd, arg);
      auto u = unify(build_fs(a, *ctx_), build_fs(b, *ctx_), *ctx_);
      out << print_fs(u);
      if (u.is_bottom()) out << " at " << print_path(u.failure_path());
      out << "\n";
    } else if (cmd == ":sat") {
      auto [a, b] = two(cmd, arg);
      auto r = satisfiable(build_fs(a, *ctx_), build_fs(b, *ctx_), *ctx_, control_);
      if (r == Outcome::No) inconsistent_ = true;
      out << outcome_name(r) << "\n";
    } else if (cmd == ":expand") {
      ExpansionControl c = overrides(arg);
      if (arg.find_first_not_of(" \t") == std::string::npos) throw std::invalid_argument(":expand needs an expression");
      auto r = expand(build_fs(expression(arg), *ctx_), *ctx_, c);
      print_expansion(r, out);
    } else if (cmd == ":check") {
      check(out);
    } else if (cmd == ":stats") {
      out << stats_report();
    } else if (cmd == ":recursive") {
      std::string s;
      for (TypeId t : hierarchy_.recursive_types()) s += (s.empty() ? "" : " ") + hierarchy_.name(t);
      out << "recursive: " << (s.empty() ? "none" : s) << "\n";
    } else if (cmd == ":undefined") {
      auto r = undefined_report();
      out << (r.empty() ? "undefined: none\n" : r);
    } else if (cmd == ":dump") {
      out << hierarchy_.dump();
    } else if (cmd == ":control") {
      control_.apply_line(arg);
    } else if (cmd == ":print") {
      auto e = expression(arg);
      out << print_fs(build_fs(e, *ctx_)) << "\n";
    } else {
      throw std::invalid_argument("unknown command " + cmd);
    }
  }

  void print_expansion(const ExpansionResult& r, std::ostream& out) {
    switch (r.outcome) {
      case Outcome::No:
        inconsistent_ = true;
        out << "no at " << print_path(r.failure_path) << "\n";
        return;
      case Outcome::Bounded:
        out << "bounded: " << r.bound_reason << "\n";
        return;
      case Outcome::Yes:
        break;
    }
    out << "yes, " << r.alternatives.size() << (r.alternatives.size() == 1 ? " alternative\n" : " alternatives\n");
    for (std::size_t i = 0; i < r.alternatives.size(); ++i)
      out << "  " << (r.fully_expanded(i) ? "" : "(partial) ") << print_fs(r.alternatives[i]) << "\n";
  }

  void check(std::ostream& out) {
    std::size_t counts[3] = {0, 0, 0};
    for (const auto& e : check_consistency(check_items(), *ctx_, control_)) {
      out << e.name << " " << consistency_name(e.outcome);
      if (e.outcome == Outcome::No) out << " at " << print_path(e.where);
      if (e.outcome == Outcome::Bounded) out << " (" << e.reason << ")";
      out << "\n";
      ++counts[static_cast<int>(e.outcome)];
    }
    if (counts[1]) inconsistent_ = true;
    out << counts[0] << " consistent";
    if (counts[1]) out << ", " << counts[1] << " inconsistent";
    if (counts[2]) out << ", " << counts[2] << " bounded";
    out << "\n";
  }

  SessionOptions opts_;
  Hierarchy hierarchy_;
  std::unique_ptr<TypeContext> ctx_;
  ExpansionControl control_;
  std::map<std::string, TemplateDef> templates_;
  std::vector<std::pair<std::string, ExprPtr>> instances_;
  bool frozen_ = false;
  std::size_t errors_ = 0;
  bool inconsistent_ = false;
  bool quit_ = false;
  SectionKind section_ = SectionKind::Types;
  std::string pending_;
  int pending_start_ = 1;
  int line_no_ = 0;
};

}  // namespace tdl
