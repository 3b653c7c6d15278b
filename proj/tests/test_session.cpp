#include <gtest/gtest.h>

#include <sstream>

#include "tdl/session.hpp"

using namespace tdl;

namespace {

constexpr const char* kGrammar = R"(
agr := [NUM num, PERS pers].
sort num := *top*. sort sg := num. sort pl := num.
sort pers := *top*. sort third := pers.
np := [AGR agr].
y := *top*. z := *top*. x := y & z.
yp := *top*. zp := *top*. xp := yp & zp & [F 1].
)";

std::string run(Session& s, std::string_view script) {
  std::ostringstream out;
  s.run_script(script, out);
  return out.str();
}

std::map<std::string, std::size_t> stats_numbers(const std::string& report) {
  std::map<std::string, std::size_t> m;
  std::istringstream is(report);
  std::string line;
  while (std::getline(is, line)) {
    auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    try {
      m[line.substr(0, colon)] = std::stoul(line.substr(colon + 1));
    } catch (const std::exception&) {
    }
  }
  return m;
}

}  // namespace

TEST(Arguments, TopLevelCommas) {
  EXPECT_EQ(split_arguments("a, b"), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(split_arguments("[A 1, B 2], < x, y >"), (std::vector<std::string>{"[A 1, B 2]", "< x, y >"}));
  EXPECT_EQ(split_arguments("\"a,b\", (c | d)"), (std::vector<std::string>{"\"a,b\"", "(c | d)"}));
  EXPECT_EQ(split_arguments("solo").size(), 1u);
}

TEST(Session, MultiLineDefinitions) {
  Session s;
  std::ostringstream out;
  s.feed_line("t := [A 1,", out);
  EXPECT_FALSE(s.hierarchy().find("t"));
  s.feed_line("      B 2].  ; trailing comment", out);
  EXPECT_TRUE(s.hierarchy().find("t"));
  s.feed_line(":expand t", out);
  EXPECT_EQ(out.str(), "yes, 1 alternative\n  t & [A 1, B 2]\n");
  EXPECT_EQ(s.exit_status(), 0);
}

TEST(Session, Commands) {
  Session s;
  s.load(kGrammar);
  EXPECT_EQ(run(s, ":glb y, z"), "x\n");
  EXPECT_EQ(run(s, ":glb-verdict y, z"), "x ; skip-feature-unify\n");
  EXPECT_EQ(run(s, ":glb-verdict yp, zp"), "yp & zp ; feature-unify\n");
  EXPECT_EQ(run(s, ":subsumes y, x"), "true\n");
  EXPECT_EQ(run(s, ":subsumes x, y"), "false\n");
  EXPECT_EQ(run(s, ":subsumes [A 1], [A 1, B 2]"), "true\n");
  EXPECT_EQ(run(s, ":unify [F #1, G #1], [F 'a]"), "[F #1 & 'a, G #1]\n");
  EXPECT_EQ(run(s, ":unify [F 'a], [F 'b]"), "*bottom* at F\n");
  EXPECT_EQ(run(s, ":sat np, [AGR [NUM sg]]"), "yes\n");
  EXPECT_EQ(run(s, ":recursive"), "recursive: none\n");
  EXPECT_EQ(run(s, ":undefined"), "undefined: none\n");
  // A failed unification is an answer, not an inconsistency.
  EXPECT_EQ(s.exit_status(), 0);
  EXPECT_EQ(run(s, ":sat np, [AGR 'x]"), "no\n");
  EXPECT_EQ(s.exit_status(), 1);
}

TEST(Session, ExitStatus) {
  Session ok;
  ok.load("a := [F 1].");
  run(ok, ":check");
  EXPECT_EQ(ok.exit_status(), 0);

  Session bad;
  bad.load("a := [F 1]. b := a & [F 2].");
  EXPECT_EQ(run(bad, ":check"), "a consistent\nb inconsistent at F\n1 consistent, 1 inconsistent\n");
  EXPECT_EQ(bad.exit_status(), 1);

  Session err;
  auto text = run(err, ":nope");
  EXPECT_EQ(text.rfind("error:", 0), 0u);
  EXPECT_EQ(err.exit_status(), 2);

  Session open;
  EXPECT_NE(run(open, "a := [F 1,").find("unterminated"), std::string::npos);
  EXPECT_EQ(open.exit_status(), 2);
}

TEST(Session, InstancesAndControl) {
  Session s;
  s.load("a := [F 1].\n%instances.\ni := a & [G 2].\n%control.\nmode resolved\nmax-path-length 7\n");
  ASSERT_EQ(s.instances().size(), 1u);
  EXPECT_EQ(s.control().mode, Mode::Resolved);
  EXPECT_EQ(s.control().max_path_length, 7u);
  EXPECT_EQ(run(s, ":check"), "a consistent\ni consistent\n2 consistent\n");
}

TEST(Session, TemplatesExpand) {
  Session s;
  s.load("agr(N) := [NUM N].\nu := @agr('sg) & [P 1].");
  EXPECT_EQ(s.templates().size(), 1u);
  EXPECT_EQ(run(s, ":print u"), "u\n");
  EXPECT_EQ(run(s, ":expand u"), "yes, 1 alternative\n  u & [NUM 'sg, P 1]\n");
}

TEST(Session, ReplayEqualsBatch) {
  const std::string queries = ":glb y, z\n:glb-verdict yp, zp\n:sat np, [AGR [NUM pl]]\n:expand np\n:check\n:stats\n";
  Session batch;
  batch.load(kGrammar);
  auto expected = run(batch, queries);

  Session replay;
  std::ostringstream out;
  std::istringstream lines(std::string(kGrammar) + queries);
  std::string line;
  while (std::getline(lines, line)) replay.feed_line(line, out);
  EXPECT_EQ(out.str(), expected);
  EXPECT_EQ(replay.exit_status(), batch.exit_status());
}

TEST(Session, StatsMonotoneAndMemoTransparent) {
  SessionOptions off;
  off.memoize = false;
  Session on_s, off_s(off);
  on_s.load(kGrammar);
  off_s.load(kGrammar);
  auto before = stats_numbers(on_s.stats_report());
  const char* queries[] = {":glb y, z", ":glb (y | yp), (z | zp)", ":sat np, [AGR [NUM sg]]", ":check", ":glb (y | yp), (z | zp)"};
  for (const char* q : queries) {
    EXPECT_EQ(run(on_s, q), run(off_s, q)) << q;
    auto now = stats_numbers(on_s.stats_report());
    EXPECT_GE(now["memo-entries"], before["memo-entries"]) << q;
    EXPECT_GE(now["memo-reuses"], before["memo-reuses"]) << q;
    before = now;
  }
  EXPECT_EQ(stats_numbers(off_s.stats_report())["memo-entries"], 0u);
  EXPECT_NE(off_s.stats_report().find("memo: off"), std::string::npos);
}
