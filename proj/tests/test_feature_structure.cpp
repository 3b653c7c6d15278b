#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"

using namespace tdl;

namespace {

// Four avm types: c below a, d below b, c and d incompatible.
constexpr const char* kUniverse = "a := *top*. b := *top*. c := a. d := b. bottom = c & d.";

oracle::PointConstraints universe_points() {
  return {{"a", "b", "c", "d"}, {{"c", "a"}, {"d", "b"}}, {{"c", "d"}}};
}

const std::vector<std::string> kSlots{"a", "b", "c", "d", "a & b", "(a | d)", "(c | b)"};

struct Fixture : ::testing::Test {
  Hierarchy h;
  std::unique_ptr<TypeContext> ctx;
  void SetUp() override {
    oracle::load(h, kUniverse);
    oracle::load(h, "np := *top*. agreement := *top*.");
    ctx = std::make_unique<TypeContext>(h);
  }
  FeatureStructure fs(std::string_view text) { return build_fs(parse_expression(text), *ctx); }
};

}  // namespace

using Build = Fixture;
using Unify = Fixture;
using Algebra = Fixture;

TEST_F(Build, Phi) {
  auto phi = fs("np & [AGR #x & agreement & [NUM 'sg, PERS '3rd], SUBJ #x]");
  EXPECT_EQ(print_fs(phi), "np & [AGR #1 & agreement & [NUM 'sg, PERS '3rd], SUBJ #1]");
  auto agr = phi.get_path({"AGR"});
  ASSERT_TRUE(agr);
  EXPECT_EQ(agr, phi.get_path({"SUBJ"}));
  auto num = phi.get_path({"AGR", "NUM"});
  ASSERT_TRUE(num);
  EXPECT_EQ(print_nf(phi.node(*num).slot), "'sg");
  EXPECT_EQ(phi.get_path({}), phi.root());
}

TEST_F(Build, Small) {
  auto f = fs("[A 1]");
  EXPECT_EQ(f.size(), 2u);
  EXPECT_EQ(print_fs(f), "[A 1]");
  EXPECT_FALSE(f.get_path({"B"}));
  EXPECT_TRUE(fs("a & ~a").is_bottom());
  EXPECT_TRUE(fs("[F c & d]").is_bottom());
  EXPECT_EQ(print_path(fs("[F c & d]").failure_path()), "F");
}

TEST_F(Build, ListsAndCycles) {
  auto l = fs("[L < 'x, 'y . #t >, T #t]");
  EXPECT_EQ(print_fs(l), "[L < 'x, 'y . #1 >, T #1]");
  auto e = fs("[L < >]");
  EXPECT_EQ(print_fs(e), "[L < >]");
  auto cyc = fs("#r & [SELF #r]");
  EXPECT_EQ(print_fs(cyc), "#1 & [SELF #1]");
  EXPECT_EQ(cyc.get_path({"SELF", "SELF"}), cyc.root());
}

TEST_F(Unify, SharedNodeGainsInformation) {
  auto u = unify(fs("np & [AGR #1, SUBJ #1]"), fs("[AGR agreement & [NUM 'sg]]"), *ctx);
  EXPECT_EQ(print_fs(u), "np & [AGR #1 & agreement & [NUM 'sg], SUBJ #1]");
  EXPECT_EQ(u.get_path({"AGR"}), u.get_path({"SUBJ"}));
  EXPECT_EQ(print_nf(u.node(*u.get_path({"SUBJ", "NUM"})).slot), "'sg");
}

TEST_F(Unify, IdentityAndFailure) {
  auto f = fs("a & [F #1 & b, G #1]");
  EXPECT_TRUE(oracle::isomorphic(unify(f, FeatureStructure(), *ctx), f));
  EXPECT_TRUE(oracle::isomorphic(unify(f, f, *ctx), f));
  EXPECT_TRUE(unify(f, FeatureStructure::failure(), *ctx).is_bottom());
  auto clash = unify(fs("[F c]"), fs("[F d]"), *ctx);
  EXPECT_TRUE(clash.is_bottom());
  EXPECT_EQ(print_path(clash.failure_path()), "F");
}

TEST_F(Unify, TwoLevelIncompatibility) {
  oracle::load(h, "A := [a 1]. B := [b 1]. bottom = A & B.");
  EXPECT_TRUE(unify(fs("A"), fs("B"), *ctx).is_bottom());
  EXPECT_EQ(print_fs(unify(fs("[a 1]"), fs("[b 1]"), *ctx)), "[a 1, b 1]");
}

TEST_F(Unify, CyclesTerminate) {
  auto f = fs("#r & [F #r]");
  auto g = fs("[F [F [F a]]]");
  auto u = unify(f, g, *ctx);
  ASSERT_FALSE(u.is_bottom());
  EXPECT_EQ(print_fs(u), "#1 & a & [F #1]");
}

TEST_F(Unify, Subsumption) {
  auto f = fs("[AGR [NUM 'sg]]");
  auto g = fs("[AGR #1 & [NUM 'sg, PERS '3rd], SUBJ #1]");
  EXPECT_TRUE(subsumes_fs(f, f, *ctx));
  EXPECT_TRUE(subsumes_fs(f, g, *ctx));
  EXPECT_FALSE(subsumes_fs(g, f, *ctx));
  auto shared = fs("[F #1 & a, G #1]");
  auto unshared = fs("[F a, G a]");
  EXPECT_FALSE(subsumes_fs(shared, unshared, *ctx));
  EXPECT_TRUE(subsumes_fs(unshared, shared, *ctx));
  EXPECT_TRUE(subsumes_fs(fs("[F a]"), fs("[F c]"), *ctx));
  EXPECT_FALSE(subsumes_fs(fs("[F c]"), fs("[F a]"), *ctx));
}

TEST_F(Algebra, RandomSuites) {
  std::mt19937 rng(29);
  auto pc = universe_points();
  auto random_fs = [&] {
    for (;;) {
      auto f = fs(oracle::random_avm(rng, kSlots, 6));
      if (!f.is_bottom() && f.size() <= 6) return f;
    }
  };
  for (int i = 0; i < 300; ++i) {
    auto f = random_fs(), g = random_fs(), k = random_fs();
    auto fg = unify(f, g, *ctx), gf = unify(g, f, *ctx);
    ASSERT_TRUE(oracle::isomorphic(fg, gf)) << print_fs(f) << " / " << print_fs(g);
    auto left = unify(fg, k, *ctx), right = unify(f, unify(g, k, *ctx), *ctx);
    ASSERT_TRUE(oracle::isomorphic(left, right)) << print_fs(left) << " vs " << print_fs(right);
    ASSERT_TRUE(oracle::isomorphic(unify(f, FeatureStructure(), *ctx), f));
    ASSERT_TRUE(unify(f, FeatureStructure::failure(), *ctx).is_bottom());
    if (fg.is_bottom()) continue;
    ASSERT_TRUE(oracle::subsumes(f, fg, pc)) << print_fs(f) << " !<= " << print_fs(fg);
    ASSERT_TRUE(oracle::subsumes(g, fg, pc));
    EXPECT_EQ(subsumes_fs(f, fg, *ctx), true);
    for (const auto& [p, q] : oracle::coreferent_paths(f)) ASSERT_EQ(fg.get_path(p), fg.get_path(q));
    // Any sampled common lower bound lies below the unifier.
    auto lower = random_fs();
    if (oracle::subsumes(f, lower, pc) && oracle::subsumes(g, lower, pc))
      ASSERT_TRUE(oracle::subsumes(fg, lower, pc)) << print_fs(fg) << " vs " << print_fs(lower);
    // The library's subsumption agrees with the brute-force one.
    ASSERT_EQ(subsumes_fs(f, g, *ctx), oracle::subsumes(f, g, pc)) << print_fs(f) << " / " << print_fs(g);
  }
}

TEST(Print, PathsAndBottom) {
  EXPECT_EQ(print_path({}), "<root>");
  EXPECT_EQ(print_path(parse_path("SYNSEM|LOC|CAT")), "SYNSEM|LOC|CAT");
  EXPECT_EQ(print_fs(FeatureStructure::failure()), "*bottom*");
  EXPECT_EQ(print_fs(FeatureStructure()), "*top*");
}
