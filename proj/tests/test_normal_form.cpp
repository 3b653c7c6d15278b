#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"

using namespace tdl;

namespace {

NfTerm lit(const char* n) { return NfTerm::of(Literal::type(n)); }
NfTerm nlit(const char* n) { return NfTerm::of(Literal::neg(n)); }

NormalForm dnf(std::string_view text, const SemanticOracle* o = nullptr) { return normalize(parse_expression(text), Form::DNF, o); }
NormalForm cnf(std::string_view text, const SemanticOracle* o = nullptr) { return normalize(parse_expression(text), Form::CNF, o); }

std::vector<std::string> letters(int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back(std::string(1, static_cast<char>('a' + i)));
  return out;
}

}  // namespace

TEST(Order, PrintedChain) {
  std::vector<NfTerm> chain{
      lit("a"),
      lit("b"),
      lit("bb"),
      nlit("a"),
      NfTerm::conj({lit("a"), lit("b")}),
      NfTerm::conj({lit("a"), nlit("a")}),
      NfTerm::disj({lit("a"), lit("b")}),
      NfTerm::disj({lit("a"), lit("b"), lit("c")}),
      NfTerm::disj({lit("a"), NfTerm::of(Literal::atom(AtomValue::num(1)))}),
  };
  for (std::size_t i = 0; i < chain.size(); ++i)
    for (std::size_t j = 0; j < chain.size(); ++j) {
      auto c = compare_nf(chain[i], chain[j]);
      if (i < j) EXPECT_TRUE(c < 0) << i << " " << j;
      if (i == j) EXPECT_TRUE(c == 0) << i;
      if (i > j) EXPECT_TRUE(c > 0) << i << " " << j;
    }
}

TEST(Order, CategoryRanks) {
  auto sym = Literal::atom(AtomValue::symbol("z"));
  auto str = Literal::atom(AtomValue::string("a"));
  auto num = Literal::atom(AtomValue::num(-5));
  EXPECT_TRUE(compare_literals(Literal::neg("z"), sym) < 0);
  EXPECT_TRUE(compare_literals(sym, str) < 0);
  EXPECT_TRUE(compare_literals(str, num) < 0);
  EXPECT_TRUE(compare_literals(Literal::atom(AtomValue::num(2)), Literal::atom(AtomValue::num(10))) < 0);
}

TEST(Order, TotalOrderLaws) {
  std::mt19937 rng(11);
  auto random_lit = [&] {
    std::vector<std::string> names{"a", "b", "bb", "c"};
    switch (rng() % 5) {
      case 0: return Literal::type(names[rng() % 4]);
      case 1: return Literal::neg(names[rng() % 4]);
      case 2: return Literal::atom(AtomValue::symbol(names[rng() % 4]));
      case 3: return Literal::atom(AtomValue::string(names[rng() % 4]));
      default: return Literal::atom(AtomValue::num(static_cast<double>(rng() % 7) - 3));
    }
  };
  for (int i = 0; i < 1000; ++i) {
    auto x = random_lit(), y = random_lit(), z = random_lit();
    auto xy = compare_literals(x, y), yx = compare_literals(y, x);
    EXPECT_EQ(xy < 0, yx > 0);
    EXPECT_EQ(xy == 0, x == y);
    if (xy < 0 && compare_literals(y, z) < 0) EXPECT_TRUE(compare_literals(x, z) < 0);
  }
}

TEST(Normalize, Rules) {
  EXPECT_EQ(print_nf(dnf("~~a")), "a");
  EXPECT_EQ(print_nf(cnf("b (+) c")), "(b | c) & (~b | ~c)");
  EXPECT_EQ(print_nf(dnf("b (+) c")), "b & ~c | c & ~b");
  EXPECT_TRUE(dnf("x1 & x2 & x3 & ~x2 & x4").is_bottom());
  EXPECT_TRUE(cnf("x1 & x2 & x3 & ~x2 & x4").is_bottom());
  EXPECT_TRUE(dnf("a | ~a").is_top());
  EXPECT_EQ(print_nf(dnf("a & (a | b)")), "a");
  EXPECT_EQ(print_nf(cnf("a | a & b")), "a");
  EXPECT_EQ(print_nf(dnf("a & *top*")), "a");
  EXPECT_EQ(print_nf(dnf("a | *bottom*")), "a");
  EXPECT_TRUE(dnf("a & *bottom*").is_bottom());
  EXPECT_TRUE(dnf("a | *top*").is_top());
  EXPECT_EQ(print_nf(dnf("~(a | b)")), "~a & ~b");
  EXPECT_EQ(print_nf(dnf("b & a & b")), "a & b");
}

TEST(Normalize, TopAndBottomShapes) {
  EXPECT_EQ(NormalForm::top(Form::DNF).sets().size(), 1u);
  EXPECT_TRUE(NormalForm::top(Form::DNF).sets()[0].empty());
  EXPECT_TRUE(NormalForm::bottom(Form::DNF).sets().empty());
  EXPECT_TRUE(NormalForm::top(Form::CNF).sets().empty());
  EXPECT_EQ(print_nf(NormalForm::top()), "*top*");
  EXPECT_EQ(print_nf(NormalForm::bottom()), "*bottom*");
}

TEST(Normalize, HierarchyRules) {
  Hierarchy h;
  oracle::load(h, "b := *top*. a := b. c := *top*. bottom = a & c.");
  HierarchyOracle o(h);
  EXPECT_EQ(print_nf(dnf("a & b", &o)), "a");
  EXPECT_EQ(print_nf(dnf("a | b", &o)), "b");
  EXPECT_TRUE(dnf("a & c", &o).is_bottom());
  EXPECT_EQ(print_nf(dnf("a & c")), "a & c");
}

TEST(Normalize, BudgetGuard) {
  std::string big;
  for (int i = 0; i < 16; ++i) big += (i ? " & " : "") + std::string("(p") + std::to_string(i) + " | q" + std::to_string(i) + ")";
  EXPECT_THROW(normalize(parse_expression(big), Form::DNF, nullptr, 1000), FormTooLarge);
  EXPECT_NO_THROW(normalize(parse_expression(big), Form::CNF, nullptr, 1000));
}

TEST(Normalize, NegatedFeatureTermRejected) {
  auto e = Expr::neg(Expr::feature_term({{"A", Expr::type("b")}}));
  EXPECT_THROW(normalize(e, Form::DNF), std::invalid_argument);
}

TEST(Memo, HitsAndLiterals) {
  Simplifier s(nullptr, true);
  s.simplify(parse_expression("a"), Form::DNF);
  EXPECT_EQ(s.stats().entries, 0u);
  auto first = s.simplify(parse_expression("(a | b) & c"), Form::DNF);
  auto entries = s.stats().entries;
  EXPECT_GT(entries, 0u);
  auto hits = s.stats().hits;
  auto second = s.simplify(parse_expression("c & (b | a)"), Form::DNF);
  EXPECT_EQ(first, second);
  EXPECT_EQ(s.stats().entries, entries);
  EXPECT_GT(s.stats().hits, hits);
}

TEST(Memo, Transparent) {
  std::mt19937 rng(3);
  auto syms = letters(6);
  Simplifier on(nullptr, true), off(nullptr, false);
  for (int i = 0; i < 400; ++i) {
    auto e = oracle::random_expr(rng, syms, 4);
    for (Form f : {Form::CNF, Form::DNF}) EXPECT_EQ(on.simplify(e, f), off.simplify(e, f)) << print_expr(e);
  }
  EXPECT_EQ(off.stats().entries, 0u);
}

TEST(Normalize, TruthTableOracle) {
  std::mt19937 rng(5);
  for (int round = 0; round < 60; ++round) {
    auto syms = letters(2 + static_cast<int>(rng() % 6));
    oracle::RandomWorld w;
    oracle::random_world(rng, syms, w);
    HierarchyOracle ho(w.h);
    for (int i = 0; i < 5; ++i) {
      auto e = oracle::random_expr(rng, syms, 4);
      for (Form f : {Form::CNF, Form::DNF}) {
        auto plain = normalize(e, f);
        auto sem = normalize(e, f, &ho);
        oracle::PointConstraints free{syms, {}, {}};
        free.for_each_point([&](const oracle::Valuation& v) { ASSERT_EQ(oracle::eval(e, v), oracle::eval(plain, v)) << print_expr(e); });
        w.pc.for_each_point([&](const oracle::Valuation& v) { ASSERT_EQ(oracle::eval(e, v), oracle::eval(sem, v)) << print_expr(e); });
      }
    }
  }
}

TEST(Normalize, CanonicalAndIdempotent) {
  std::mt19937 rng(9);
  auto syms = letters(5);
  for (int i = 0; i < 200; ++i) {
    auto e = oracle::random_expr(rng, syms, 4);
    for (Form f : {Form::CNF, Form::DNF}) {
      auto nf = normalize(e, f);
      for (int k = 0; k < 10; ++k) EXPECT_EQ(normalize(oracle::commute(rng, e), f), nf) << print_expr(e);
      EXPECT_EQ(normalize(to_expr(nf), f), nf) << print_nf(nf);
      // Sorted strictly ascending, hence duplicate-free.
      for (const auto& s : nf.sets())
        for (std::size_t j = 1; j < s.size(); ++j) EXPECT_TRUE(compare_literals(s[j - 1], s[j]) < 0);
    }
  }
}

TEST(Normalize, GuardRulesDoNotGrow) {
  for (const char* text : {"a & a", "a | a", "a & (a | b)", "a | (a & b)", "a & *top*", "a | *bottom*", "a & ~a & b"}) {
    auto e = parse_expression(text);
    auto nf = normalize(e, Form::DNF);
    std::size_t in = 0;
    std::function<void(const ExprPtr&)> count = [&](const ExprPtr& x) {
      if (x->kind == ExprKind::TypeName) ++in;
      for (const auto& a : x->args) count(a);
    };
    count(e);
    EXPECT_LE(nf.literal_count(), in) << text;
  }
}
