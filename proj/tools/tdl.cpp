// Command-line front end: load grammar files, then run commands from -c,
// a script, or an interactive loop on stdin.

#include <unistd.h>

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "tdl/tdl.hpp"

namespace {

// Prints the format header once, just before the first line of output.
class Report {
 public:
  void emit(const std::string& text) {
    if (text.empty()) return;
    if (!started_) std::cout << tdl::kReportHeader << "\n";
    started_ = true;
    std::cout << text << std::flush;
  }

 private:
  bool started_ = false;
};

bool read_file(const std::string& path, std::string& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::ostringstream ss;
  ss << in.rdbuf();
  out = ss.str();
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"typed feature structure grammar tool"};
  std::vector<std::string> files, commands;
  std::string encoding = "transitive-closure", nf = "cnf", script;
  std::optional<std::string> mode;
  std::optional<std::string> max_path;
  bool no_memo = false, interactive = false;
  app.add_option("files", files, "grammar files, loaded in order");
  app.add_option("-c,--command", commands, "command to run after loading (repeatable)");
  app.add_option("--script", script, "file of commands and definitions to run");
  app.add_flag("-i,--interactive", interactive, "read commands from stdin");
  app.add_option("--encoding", encoding, "type code encoding")->check(CLI::IsMember({"transitive-closure", "compact"}));
  app.add_option("--nf", nf, "normal form for type definitions")->check(CLI::IsMember({"cnf", "dnf"}));
  app.add_option("--mode", mode, "expansion mode")->check(CLI::IsMember({"complete", "resolved"}));
  app.add_option("--max-path-length", max_path, "expansion path bound, or 'none'");
  app.add_flag("--no-memo", no_memo, "disable simplification memoization");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  tdl::SessionOptions opts;
  opts.encoding = encoding == "compact" ? tdl::Encoding::Compact : tdl::Encoding::TransitiveClosure;
  opts.definition_form = nf == "dnf" ? tdl::Form::DNF : tdl::Form::CNF;
  opts.memoize = !no_memo;
  tdl::Session session(opts);
  Report report;
  int load_errors = 0;

  auto apply_flags = [&] {
    if (mode) session.control().apply_line("mode " + *mode);
    if (max_path) session.control().apply_line("max-path-length " + *max_path);
  };
  try {
    apply_flags();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  for (const auto& path : files) {
    std::string text;
    if (!read_file(path, text)) {
      report.emit("error: cannot read " + path + "\n");
      ++load_errors;
      continue;
    }
    try {
      session.load(text);
    } catch (const std::exception& e) {
      report.emit("error: " + path + ": " + e.what() + "\n");
      ++load_errors;
    }
  }
  // Command-line flags win over control sections in the files.
  apply_flags();
  if (!files.empty()) report.emit(session.undefined_report());
  // A batch run over a broken grammar stops at the diagnostic.
  if (load_errors && !interactive) return 2;

  auto run = [&](const std::string& text) {
    std::ostringstream out;
    session.run_script(text, out);
    report.emit(out.str());
  };
  for (const auto& c : commands) {
    if (session.quit_requested()) break;
    run(c);
  }
  if (!script.empty() && !session.quit_requested()) {
    std::string text;
    if (read_file(script, text)) run(text);
    else {
      report.emit("error: cannot read " + script + "\n");
      ++load_errors;
    }
  }
  if (interactive && !session.quit_requested()) {
    bool tty = isatty(STDIN_FILENO);
    std::string line;
    while (!session.quit_requested()) {
      if (tty) std::cerr << "tdl> " << std::flush;
      if (!std::getline(std::cin, line)) break;
      std::ostringstream out;
      session.feed_line(line, out);
      report.emit(out.str());
    }
  }
  if (load_errors) return 2;
  return session.exit_status();
}
