#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "../support/oracles.hpp"
#include "vfscan/metrics.hpp"

using namespace vfscan;

namespace {

ScoredCommit sc(std::string id, std::size_t loc, bool label, double score = 0.0) {
  ScoredCommit c;
  c.id = std::move(id);
  c.loc = loc;
  c.hunks = 1;
  c.files = 1;
  c.label = label;
  c.score = c.prob = score;
  return c;
}

std::vector<bool> labels_of(const RankedList& l) {
  std::vector<bool> out;
  for (const auto& c : l) out.push_back(*c.label);
  return out;
}

std::vector<double> scores_of(const RankedList& l) {
  std::vector<double> out;
  for (const auto& c : l) out.push_back(c.score);
  return out;
}

template <typename F>
ErrorCode code_of(F&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Io;  // sentinel: nothing thrown
}

}  // namespace

TEST_CASE("AUC examples", "[metrics][auc]") {
  const std::vector<double> s = {0.9, 0.1};
  CHECK(auc({true, false}, s) == 1.0);
  const std::vector<double> flat = {0.3, 0.3, 0.3, 0.3};
  CHECK(auc({true, false, true, false}, flat) == 0.5);
  const std::vector<double> rev = {0.1, 0.9};
  CHECK(auc({true, false}, rev) == 0.0);
  CHECK(code_of([] {
          const std::vector<double> x = {1.0, 2.0};
          auc({true, true}, x);
        }) == ErrorCode::SingleClass);
}

TEST_CASE("AUC agrees with the pairwise oracle", "[metrics][auc]") {
  Rng rng(1);
  for (int t = 0; t < 500; ++t) {
    auto list = oracle::random_ranked(rng, 2 + rng.index(49));
    const auto y = labels_of(list);
    const auto s = scores_of(list);
    REQUIRE(std::abs(auc(y, s) - oracle::pairwise_auc(y, s)) < 1e-9);

    // Invariant under a strictly increasing transform.
    std::vector<double> t2;
    for (double v : s) t2.push_back(std::exp(3.0 * v) + 7.0);
    REQUIRE(std::abs(auc(y, t2) - auc(y, s)) < 1e-12);
  }
}

TEST_CASE("CostEffort examples", "[metrics][cost]") {
  const RankedList list = {sc("a", 10, true), sc("b", 10, false), sc("c", 80, true)};
  CHECK(cost_effort(list, 10) == 0.5);
  CHECK(inspected_count(list, 10, CostUnit::Loc) == 1);
  CHECK(cost_effort(list, 100) == 1.0);
  CHECK(cost_effort(list, 19.99) == 0.5);
  CHECK(cost_effort(list, 20) == 0.5);
  CHECK(inspected_count(list, 20, CostUnit::Loc) == 2);

  const RankedList four = {sc("a", 5, true), sc("b", 7, true), sc("c", 9, false), sc("d", 11, false)};
  CHECK(cost_effort(four, 50, CostUnit::Commit) == 1.0);
  CHECK(inspected_count(four, 50, CostUnit::Commit) == 2);

  CHECK(code_of([] { cost_effort(RankedList{}, 10); }) == ErrorCode::EmptyList);
  CHECK(code_of([&] { cost_effort(list, 0); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([&] { cost_effort(list, 101); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([] { cost_effort(RankedList{sc("n", 3, false)}, 10); }) == ErrorCode::NoPositives);
}

TEST_CASE("CostEffort agrees with prefix-sum enumeration", "[metrics][cost]") {
  Rng rng(2);
  for (int t = 0; t < 500; ++t) {
    const auto list = oracle::random_ranked(rng, 2 + rng.index(49));
    const auto y = labels_of(list);
    for (auto unit : kAllCostUnits) {
      std::vector<std::uint64_t> costs;
      for (const auto& c : list) costs.push_back(static_cast<std::uint64_t>(cost_of(c, unit)));
      double prev = 0.0;
      for (std::uint64_t L = 1; L <= 100; L += 1 + rng.index(9)) {
        const double got = cost_effort(list, static_cast<double>(L), unit);
        REQUIRE(got == oracle::prefix_cost_effort(costs, y, L));
        REQUIRE(got >= prev);
        prev = got;
      }
      REQUIRE(cost_effort(list, 100, unit) == 1.0);
    }
    // Commit unit: L = 100 k / n inspects exactly the top k.
    const std::size_t n = list.size();
    const std::size_t k = rng.index(n + 1);
    if (k > 0) REQUIRE(inspected_count(list, 100.0 * static_cast<double>(k) / static_cast<double>(n), CostUnit::Commit) == k);
  }
}

TEST_CASE("Popt anchors and oracle", "[metrics][popt]") {
  Rng rng(3);
  std::size_t compared = 0;
  for (int t = 0; t < 500; ++t) {
    auto list = oracle::random_ranked(rng, 2 + rng.index(49));
    for (double L : {5.0, 10.0, 15.0, 20.0, 37.5, 100.0}) {
      double expected = 0.0;
      if (!oracle::p_opt(oracle::items_of(list), L, expected)) {
        REQUIRE(code_of([&] { p_opt(list, L); }) == ErrorCode::DegenerateOptimal);
        continue;
      }
      REQUIRE(std::abs(p_opt(list, L) - expected) < 1e-9);
      REQUIRE(p_opt(optimal_order(list), L) == 1.0);
      REQUIRE(p_opt(worst_order(list), L) == 0.0);
      ++compared;
    }
  }
  CHECK(compared > 2000);
}

TEST_CASE("Popt four-commit instance by hand", "[metrics][popt]") {
  // LOC 10, 20, 30, 40 (total 100); VF at 20 and 30. Ranked: N10, V20, V30, N40.
  const RankedList list = {sc("a", 10, false), sc("b", 20, true), sc("c", 30, true), sc("d", 40, false)};
  // Model curve: (0,0) (10,0) (30,50) (60,100) (100,100). Area on [0,20]: 0 + 10*25/2 = 125.
  // Optimal: V20, V30, N10, N40 -> (20,50) (50,100): area on [0,20] = 20*50/2 = 500.
  // Worst: N40, N10, V30, V20 -> (40,0) ...: area 0.
  CHECK(std::abs(p_opt(list, 20) - 0.25) < 1e-12);
  const auto curve = alberg_curve(list);
  REQUIRE(curve.size() == 5);
  CHECK(curve[2].x == 30.0);
  CHECK(curve[2].y == 50.0);
  CHECK(area_under(curve, 100) == 0.0 + 500.0 + 2250.0 + 4000.0);

  const auto o = optimal_order(list);
  CHECK(o[0].id == "b");
  CHECK(o[2].id == "a");
  const auto w = worst_order(list);
  CHECK(w[0].id == "d");
  CHECK(w[3].id == "b");
}

TEST_CASE("point-biserial correlation", "[metrics][spb]") {
  const std::vector<double> v = {0, 0, 1, 1};
  CHECK(std::abs(spb(v, {false, false, true, true}) - 1.0) < 1e-12);
  CHECK(code_of([&] { spb(v, {true, true, true, true}); }) == ErrorCode::DegenerateInput);
  const std::vector<double> flat = {2, 2, 2};
  CHECK(code_of([&] { spb(flat, {true, false, true}); }) == ErrorCode::DegenerateInput);
  CHECK(spb_strength(0.00289) == "very weak");
  CHECK(spb_strength(0.5) == "strong");

  // Against the Pearson correlation of values with 0/1 labels.
  Rng rng(4);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> x;
    std::vector<bool> y;
    for (int i = 0; i < 30; ++i) {
      y.push_back(rng.bernoulli(0.4));
      x.push_back(rng.uniform(0, 10) + (y.back() ? 2.0 : 0.0));
    }
    y[0] = true;
    y[1] = false;
    double mx = 0, my = 0;
    for (int i = 0; i < 30; ++i) mx += x[i], my += y[i];
    mx /= 30, my /= 30;
    double sxy = 0, sxx = 0, syy = 0;
    for (int i = 0; i < 30; ++i) {
      sxy += (x[i] - mx) * (y[i] - my);
      sxx += (x[i] - mx) * (x[i] - mx);
      syy += (y[i] - my) * (y[i] - my);
    }
    const double r = sxy / std::sqrt(sxx * syy);
    REQUIRE(std::abs(spb(x, y) - r * r) < 1e-12);
  }
}

TEST_CASE("ranking sort and the report", "[metrics]") {
  RankedList list = {sc("z", 50, true, 0.5), sc("y", 5, false, 0.5), sc("x", 5, true, 0.5), sc("w", 1, false, 0.9)};
  sort_ranked(list);
  CHECK(list[0].id == "w");
  CHECK(list[1].id == "x");
  CHECK(list[2].id == "y");
  CHECK(list[3].id == "z");

  const std::vector<double> Ls = {5, 10, 15, 20};
  const auto report = evaluate(optimal_order(list), Ls, kAllCostUnits);
  for (double L : Ls) CHECK(report.p_opt.at(L) == 1.0);
  const auto j = to_json(report);
  CHECK(j["p_opt"]["5"] == 1.0);
  CHECK(j["cost_effort"].contains("commit"));
  CHECK(j["inspected"]["loc"].contains("20"));
  CHECK(j.contains("spb_strength"));
  CHECK(parse_cost_unit("hunk") == CostUnit::Hunk);
  CHECK(code_of([] { parse_cost_unit("bytes"); }) == ErrorCode::InvalidArgument);
}
