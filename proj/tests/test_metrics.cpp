#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "core/error.hpp"
#include "fixture_util.hpp"
#include "harness/harness.hpp"
#include "metrics/metrics.hpp"
#include "oracles.hpp"
#include "syntax/minilang.hpp"
#include "syntax/token.hpp"

using namespace mutforge;
using namespace mutforge::metrics;

namespace {

MutationRecord rec(std::string id, StatusKind kind, int line = 1) {
  MutationRecord r;
  r.id = std::move(id);
  r.origin = "test";
  r.location = SourceLocation::make("src/a.mini", line, line);
  r.original_text = "x";
  r.mutated_text = "y";
  r.status.kind = kind;
  return r;
}

KillMatrix matrix_from(const std::vector<std::set<std::string>>& kills,
                       const std::vector<std::string>& tests) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < kills.size(); ++i) ids.push_back("m" + std::to_string(i + 1));
  KillMatrix m(ids, tests);
  for (std::size_t t = 0; t < tests.size(); ++t) m.set_baseline(t, Verdict::Pass);
  for (std::size_t i = 0; i < kills.size(); ++i) {
    for (std::size_t t = 0; t < tests.size(); ++t) {
      m.set_cell(i, t, kills[i].count(tests[t]) ? Verdict::Fail : Verdict::Pass);
    }
  }
  return m;
}

std::vector<std::string> toks(const std::string& s) { return syntax::normalized_tokens(s); }

long double ref_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  long double n = x.size(), mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= n;
  my /= n;
  long double a = 0, b = 0, c = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    a += (x[i] - mx) * (y[i] - my);
    b += (x[i] - mx) * (x[i] - mx);
    c += (y[i] - my) * (y[i] - my);
  }
  return a / std::sqrt(b * c);
}

// Rank by counting: rank = 1 + #smaller + (#equal - 1)/2.
std::vector<double> ref_ranks(const std::vector<double>& x) {
  std::vector<double> r;
  for (double v : x) {
    double less = 0, eq = 0;
    for (double w : x) less += w < v, eq += w == v;
    r.push_back(1 + less + (eq - 1) / 2);
  }
  return r;
}

long double ref_kappa(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::set<std::string> cats(a.begin(), a.end());
  cats.insert(b.begin(), b.end());
  long double n = a.size(), po = 0, pe = 0;
  for (std::size_t i = 0; i < a.size(); ++i) po += a[i] == b[i];
  po /= n;
  for (const auto& c : cats) {
    pe += (std::count(a.begin(), a.end(), c) / n) * (std::count(b.begin(), b.end(), c) / n);
  }
  return (po - pe) / (1 - pe);
}

}  // namespace

TEST_CASE("sample size anchors") {
  CHECK(sample_size(351332) == 384);
  CHECK(sample_size(225) == 143);
  CHECK(sample_size(278) == 162);
  CHECK(sample_size(395) == 196);
  CHECK(sample_size(167) == 117);
  CHECK(sample_size(1) == 1);
  CHECK(sample_size(10) == 10);
  CHECK(sample_size(919584) == 384);
  CHECK(sample_size(919585) == 385);
  CHECK(sample_size(1000, 0.99, 0.05) == 400);
  CHECK_THROWS_AS(sample_size(0), Error);
  CHECK_THROWS_AS(sample_size(10, 0.8), Error);
  CHECK_THROWS_AS(sample_size(10, 0.95, 0.0), Error);
}

TEST_CASE("property: sample size is monotone and never exceeds the population") {
  std::size_t prev = 0;
  for (std::size_t n = 1; n < 5000; ++n) {
    auto s = sample_size(n);
    CHECK(s <= n);
    CHECK(s >= prev);
    CHECK(s <= 385);
    // Smallest integer meeting the corrected requirement.
    long double n0 = 1.96L * 1.96L * 0.25L / 0.0025L;
    long double need = n0 / (1 + (n0 - 1) / n);
    CHECK(static_cast<long double>(s) + 1e-9L >= need);
    CHECK(static_cast<long double>(s) - 1 < need);
    prev = s;
  }
}

TEST_CASE("seeded sampling") {
  std::vector<std::string> ids;
  for (int i = 0; i < 500; ++i) ids.push_back("m" + std::to_string(i));
  auto plan = plan_sample(ids.size(), 0.95, 0.05, 7);
  CHECK(plan.n == sample_size(500));
  auto a = draw_sample(ids, plan);
  auto b = draw_sample(ids, plan);
  CHECK(a == b);
  CHECK(a.size() == plan.n);
  CHECK(std::set<std::string>(a.begin(), a.end()).size() == a.size());
  // Original order preserved.
  std::vector<std::size_t> pos;
  for (const auto& id : a) pos.push_back(static_cast<std::size_t>(std::stoi(id.substr(1))));
  CHECK(std::is_sorted(pos.begin(), pos.end()));
  plan.seed = 8;
  CHECK(draw_sample(ids, plan) != a);
  plan.n = 501;
  CHECK_THROWS_AS(draw_sample(ids, plan), Error);
}

TEST_CASE("label csv round trip") {
  std::vector<LabelRow> rows = {{"m1", "ann,1", EquivalenceLabel::Equivalent},
                                {"m2", "b", std::nullopt},
                                {"m3", "b", EquivalenceLabel::Unsure}};
  auto csv = labels_to_csv(rows);
  CHECK(csv.rfind("mutant_id,annotator,label\n", 0) == 0);
  auto back = labels_from_csv(csv);
  REQUIRE(back.size() == 3);
  CHECK(back[0].annotator == "ann,1");
  CHECK(back[0].label == EquivalenceLabel::Equivalent);
  CHECK_FALSE(back[1].label);
  CHECK_THROWS_AS(labels_from_csv("id,label\n"), Error);
  CHECK_THROWS_AS(labels_from_csv("mutant_id,annotator,label\nm1,a,MAYBE\n"), Error);
}

TEST_CASE("usability ratios and EMR") {
  MutationPool pool;
  pool.records = {rec("m1", StatusKind::Viable),        rec("m2", StatusKind::Viable),
                  rec("m3", StatusKind::Duplicate),     rec("m4", StatusKind::IdenticalToOriginal),
                  rec("m5", StatusKind::NonCompilable), rec("m6", StatusKind::EquivalentLabeled),
                  rec("m7", StatusKind::NonCompilable), rec("m8", StatusKind::Viable)};
  auto r = usability(pool);
  CHECK(r.all == 8);
  CHECK(r.compilable == 6);
  CHECK(r.useless == 2);
  CHECK(r.viable == 4);
  CHECK(r.cr == doctest::Approx(0.75));
  CHECK(r.umr == doctest::Approx(0.25));
  CHECK_FALSE(r.emr_estimate);

  std::vector<LabelRow> labels = {
      {"m1", "a", EquivalenceLabel::Equivalent},    {"m1", "b", EquivalenceLabel::Equivalent},
      {"m2", "a", EquivalenceLabel::Equivalent},    {"m2", "b", EquivalenceLabel::NonEquivalent},
      {"m8", "a", EquivalenceLabel::NonEquivalent}, {"m6", "a", std::nullopt},
  };
  r = usability(pool, &labels);
  CHECK(r.emr_sample == 3);
  CHECK(r.emr_equivalent == 1);  // a tie is not a majority
  CHECK(*r.emr_estimate == doctest::Approx(1.0 / 3));

  labels.push_back({"ghost", "a", EquivalenceLabel::Equivalent});
  CHECK_THROWS_AS(usability(pool, &labels), Error);
  CHECK_THROWS_AS(usability(MutationPool{}), Error);
}

TEST_CASE("bleu against the reference implementation") {
  // No candidate 4-gram occurs in the reference (p3 = 1/4, p4 = 0), so the
  // unsmoothed score is exactly 0.
  auto c6 = toks("a = b - c ;"), r6 = toks("a = b + c ;");
  CHECK(std::fabs(bleu(c6, r6) - oracle::reference_bleu(c6, r6)) < 1e-9);
  CHECK(bleu(c6, r6) == 0.0);
  CHECK(bleu(toks("a = c"), toks("a = b")) == 0.0);
  CHECK(bleu(toks("a = b + c"), toks("a = b + d")) ==
        doctest::Approx(std::pow(4.0 / 5 * 3.0 / 4 * 2.0 / 3 * 1.0 / 2, 0.25)));
  CHECK(bleu(toks("a = b"), toks("a = b ;")) == doctest::Approx(std::exp(1.0 - 4.0 / 3.0)));
  CHECK(bleu(toks("x = 1;"), toks("x = 1;")) == 1.0);
  CHECK(bleu(toks("q"), toks("x = 1;")) == 0.0);
  CHECK(bleu({}, toks("x")) == 0.0);

  std::mt19937_64 rng(5);
  const std::vector<std::string> vocab = {"a", "b", "=", "+", ";", "(", ")"};
  for (int i = 0; i < 500; ++i) {
    std::vector<std::string> c, r;
    std::size_t lc = 1 + rng() % 9, lr = 1 + rng() % 9;
    for (std::size_t k = 0; k < lc; ++k) c.push_back(vocab[rng() % vocab.size()]);
    for (std::size_t k = 0; k < lr; ++k) r.push_back(vocab[rng() % vocab.size()]);
    double got = bleu(c, r), want = oracle::reference_bleu(c, r);
    CHECK(std::fabs(got - want) < 1e-12);
    CHECK(got >= 0.0);
    CHECK(got <= 1.0);
  }
}

TEST_CASE("diversity: deletions and new kinds") {
  auto parse = [](const std::string& src) { return syntax::parse_mini_unit(src, "a.mini").tree; };
  std::string before = "fn f(a) -> int {\n  let x = a;\n  x = x + 1;\n  return x;\n}\n";
  DiversityInput sdl{toks("x = x + 1;"), toks(";"), std::nullopt, std::nullopt};
  auto only_sdl = diversity({sdl, sdl});
  CHECK(only_sdl.deletion_ratio == 1.0);
  CHECK(only_sdl.histogram.empty());
  CHECK(only_sdl.top.empty());

  std::string after = "fn f(a) -> int {\n  let x = a;\n  x = math.abs(x) + 1;\n  return x;\n}\n";
  DiversityInput call{toks("x = x + 1;"), toks("x = math.abs(x) + 1;"), parse(before),
                      parse(after)};
  DiversityInput broken{toks("x = x + 1;"), toks("x = x +;"), std::nullopt, std::nullopt};
  auto r = diversity({sdl, call, broken});
  CHECK(r.considered == 3);
  CHECK(r.deletions == 2);  // "x = x +;" is a token subsequence too
  CHECK(r.deletion_ratio == doctest::Approx(2.0 / 3));
  CHECK(r.histogram.count(syntax::NodeKind::MethodInvocation) == 1);
  CHECK(diversity({}).deletion_ratio == 0.0);

  syntax::KindHistogram h = {{syntax::NodeKind::Literal, 3},
                             {syntax::NodeKind::Identifier, 5},
                             {syntax::NodeKind::BinaryOperation, 3},
                             {syntax::NodeKind::Block, 1}};
  auto top = top_kinds(h, 3);
  REQUIRE(top.size() == 3);
  CHECK(top[0].kind == syntax::NodeKind::Identifier);
  CHECK(top[0].share == doctest::Approx(5.0 / 12));
  CHECK(top[1].count == 3);
  CHECK(top[2].count == 3);
  CHECK(top[1].kind < top[2].kind);
}

TEST_CASE("ochiai and coupling") {
  CHECK(ochiai({"t1", "t2"}, {"t2"}) == doctest::Approx(1 / std::sqrt(2.0)));
  CHECK(ochiai({}, {"t1"}) == 0.0);
  CHECK(ochiai({"t1"}, {"t1"}) == 1.0);
  CHECK(coupled({"t1", "t3"}, {"t3"}));
  CHECK_FALSE(coupled({"t1"}, {"t3"}));

  std::vector<std::string> tests = {"t1", "t2", "t3"};
  auto m = matrix_from({{"t1"}, {"t1", "t2"}, {"t3"}, {}}, tests);
  CHECK(coupling_rate(m, {"t1"}) == doctest::Approx(0.5));
  CHECK(mean_ochiai(m, {"t1"}) == doctest::Approx((1 + 1 / std::sqrt(2.0)) / 4));
  CHECK(bug_detected(m, {"t3"}));
  CHECK_FALSE(bug_detected(m, {"t4"}));
  CHECK_THROWS_AS(coupling_rate(KillMatrix({}, tests), {"t1"}), Error);
}

TEST_CASE("property: coupling and RBD match brute force") {
  std::mt19937_64 rng(11);
  std::vector<std::string> tests = {"a", "b", "c", "d", "e"};
  for (int round = 0; round < 100; ++round) {
    std::vector<BugKillData> bugs;
    std::vector<KillMatrix> mats;
    mats.reserve(6);
    std::size_t detected = 0;
    std::size_t nbugs = 1 + rng() % 6;
    for (std::size_t b = 0; b < nbugs; ++b) {
      std::vector<std::set<std::string>> kills(1 + rng() % 6);
      for (auto& k : kills) {
        for (const auto& t : tests) {
          if (rng() % 4 == 0) k.insert(t);
        }
      }
      std::set<std::string> trig = {tests[rng() % tests.size()]};
      mats.push_back(matrix_from(kills, tests));
      std::size_t c = 0;
      for (const auto& k : kills) {
        bool hit = false;
        for (const auto& t : k) hit = hit || trig.count(t);
        c += hit;
      }
      detected += c > 0;
      CHECK(coupling_rate(mats.back(), trig) == doctest::Approx(double(c) / kills.size()));
      bugs.push_back({"bug" + std::to_string(b), &mats.back(), trig});
    }
    bugs.push_back({"none", nullptr, {"a"}});
    CHECK(real_bug_detectability(bugs) == doctest::Approx(double(detected) / (nbugs + 1)));
  }
  CHECK_THROWS_AS(real_bug_detectability({}), Error);
}

TEST_CASE("exact match against the buggy version") {
  auto fixed = testing::fixture_project("bug-001");
  auto buggy = testing::fixture_project("bug-001", true);
  MutationPool pool;
  pool.records.push_back(testing::line_mutant(fixed, "hit", "src/counter.mini", 7,
                                              "    if (i  <=  limit) {"));
  pool.records.push_back(testing::line_mutant(fixed, "miss", "src/counter.mini", 7,
                                              "    if (i > limit) {"));
  for (auto& r : pool.records) r.status.kind = StatusKind::Viable;
  CHECK(exact_match_count(pool, fixed, buggy) == 1);
  pool.records[0].status.kind = StatusKind::NonCompilable;
  CHECK(exact_match_count(pool, fixed, buggy) == 0);
}

TEST_CASE("spearman and pearson") {
  auto s = spearman({1, 2, 3, 4}, {1, 3, 2, 4}, 10000, 3);
  CHECK(s.coefficient == doctest::Approx(0.8));
  CHECK(s.permutations == 10000);
  // Exact two-sided p over all 24 orderings is 8/24.
  CHECK(s.p_value == doctest::Approx(1.0 / 3).epsilon(0.05));
  CHECK(spearman({1, 2, 3, 4}, {1, 3, 2, 4}, 10000, 3).p_value == s.p_value);
  CHECK(spearman({1, 2, 3}, {1, 2, 3}, 5).permutations == 10000);

  auto p = pearson({1, 2, 3, 4, 5}, {2, 4, 6, 8, 10});
  CHECK(p.coefficient == doctest::Approx(1.0));
  CHECK(ranks({10, 20, 20, 5}) == std::vector<double>{2, 3.5, 3.5, 1});
  CHECK_THROWS_AS(pearson_coefficient({1, 2}, {1, 2}), Error);
  CHECK_THROWS_AS(pearson_coefficient({1, 2, 3}, {1, 2}), Error);
  CHECK_THROWS_AS(pearson_coefficient({1, 1, 1}, {1, 2, 3}), Error);

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-10, 10);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> x, y;
    std::size_t n = 3 + rng() % 10;
    for (std::size_t k = 0; k < n; ++k) {
      x.push_back(std::round(u(rng)));
      y.push_back(std::round(u(rng)));
    }
    if (std::adjacent_find(x.begin(), x.end(), std::not_equal_to<>()) == x.end()) continue;
    if (std::adjacent_find(y.begin(), y.end(), std::not_equal_to<>()) == y.end()) continue;
    CHECK(std::fabs(pearson_coefficient(x, y) - static_cast<double>(ref_pearson(x, y))) < 1e-12);
    CHECK(ranks(x) == ref_ranks(x));
    CHECK(std::fabs(pearson_coefficient(ranks(x), ranks(y)) -
                    static_cast<double>(ref_pearson(ref_ranks(x), ref_ranks(y)))) < 1e-12);
  }
}

TEST_CASE("cohen kappa") {
  CHECK(cohen_kappa({"E", "N", "N", "N"}, {"N", "N", "N", "N"}) == doctest::Approx(0.0));
  CHECK(cohen_kappa({"E", "N"}, {"E", "N"}) == doctest::Approx(1.0));
  CHECK_THROWS_AS(cohen_kappa({"N", "N"}, {"N", "N"}), Error);
  CHECK_THROWS_AS(cohen_kappa({"N"}, {}), Error);

  std::mt19937_64 rng(9);
  const std::vector<std::string> cats = {"EQUIVALENT", "NONEQUIVALENT", "UNSURE"};
  int checked = 0;
  for (int i = 0; i < 1000; ++i) {
    std::vector<std::string> a, b;
    std::size_t n = 2 + rng() % 20;
    for (std::size_t k = 0; k < n; ++k) {
      a.push_back(cats[rng() % 3]);
      b.push_back(rng() % 2 ? a.back() : cats[rng() % 3]);
    }
    long double want = ref_kappa(a, b);
    if (!std::isfinite(static_cast<double>(want))) continue;
    double got = cohen_kappa(a, b);
    CHECK(std::fabs(got - static_cast<double>(want)) < 1e-12);
    CHECK(got <= 1.0 + 1e-12);
    ++checked;
  }
  CHECK(checked > 900);
}
