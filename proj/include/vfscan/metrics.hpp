#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "vfscan/errors.hpp"

namespace vfscan {

struct ScoredCommit {
  std::string id;
  double prob = 0.0;
  double score = 0.0;
  std::size_t loc = 0;
  std::size_t hunks = 0;
  std::size_t files = 0;
  std::optional<bool> label;

  bool operator==(const ScoredCommit&) const = default;
};

/// Commits in inspection order (descending score).
using RankedList = std::vector<ScoredCommit>;

/// Descending score, then ascending LOC, then id.
inline void sort_ranked(RankedList& list) {
  std::stable_sort(list.begin(), list.end(), [](const ScoredCommit& a, const ScoredCommit& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.loc != b.loc) return a.loc < b.loc;
    return a.id < b.id;
  });
}

enum class CostUnit { Loc, Hunk, File, Commit };

inline constexpr CostUnit kAllCostUnits[] = {CostUnit::Loc, CostUnit::Hunk, CostUnit::File, CostUnit::Commit};

constexpr std::string_view to_string(CostUnit u) noexcept {
  switch (u) {
    case CostUnit::Loc: return "loc";
    case CostUnit::Hunk: return "hunk";
    case CostUnit::File: return "file";
    case CostUnit::Commit: return "commit";
  }
  return "?";
}

inline CostUnit parse_cost_unit(std::string_view name) {
  for (auto u : kAllCostUnits)
    if (to_string(u) == name) return u;
  fail(ErrorCode::InvalidArgument, "unknown cost unit '" + std::string(name) + "'");
}

inline double cost_of(const ScoredCommit& c, CostUnit unit) noexcept {
  switch (unit) {
    case CostUnit::Loc: return static_cast<double>(c.loc);
    case CostUnit::Hunk: return static_cast<double>(c.hunks);
    case CostUnit::File: return static_cast<double>(c.files);
    case CostUnit::Commit: return 1.0;
  }
  return 0.0;
}

namespace detail {

inline bool labeled_positive(const ScoredCommit& c) {
  require(c.label.has_value(), ErrorCode::InvalidArgument, "commit " + c.id + " has no label");
  return *c.label;
}

inline std::size_t count_positives(const RankedList& ranked) {
  std::size_t n = 0;
  for (const auto& c : ranked) n += labeled_positive(c) ? 1 : 0;
  return n;
}

inline void check_percent(double L) {
  require(L > 0.0 && L <= 100.0, ErrorCode::InvalidArgument, "L must lie in (0, 100]");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// AUC

/// Probability that a random positive outscores a random negative (ties
/// count one half), computed from the rank sum with average ranks.
inline double auc(const std::vector<bool>& labels, std::span<const double> scores) {
  require(labels.size() == scores.size(), ErrorCode::InvalidArgument, "labels and scores differ in length");
  std::size_t n_pos = 0;
  for (bool l : labels) n_pos += l ? 1 : 0;
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) fail(ErrorCode::SingleClass, "AUC needs both classes");

  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k)
      if (labels[order[k]]) rank_sum += avg_rank;
    i = j + 1;
  }
  const double np = static_cast<double>(n_pos);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

inline double auc(const RankedList& ranked) {
  std::vector<bool> labels;
  std::vector<double> scores;
  for (const auto& c : ranked) {
    labels.push_back(detail::labeled_positive(c));
    scores.push_back(c.score);
  }
  return auc(labels, scores);
}

// ---------------------------------------------------------------------------
// CostEffort@L

/// Number of leading commits inspected before the cumulative cost would
/// exceed L% of the total. A commit that exactly exhausts the budget is inspected.
inline std::size_t inspected_count(const RankedList& ranked, double L, CostUnit unit) {
  if (ranked.empty()) fail(ErrorCode::EmptyList, "ranked list is empty");
  detail::check_percent(L);
  double total = 0.0;
  for (const auto& c : ranked) total += cost_of(c, unit);
  const double budget = L * total;
  const double slack = 1e-12 * std::max(1.0, budget);
  double spent = 0.0;
  std::size_t n = 0;
  for (const auto& c : ranked) {
    spent += cost_of(c, unit);
    if (100.0 * spent > budget + slack) break;
    ++n;
  }
  return n;
}

/// Fraction of all vulnerability-fixing commits found within the budget.
inline double cost_effort(const RankedList& ranked, double L, CostUnit unit = CostUnit::Loc) {
  const auto n = inspected_count(ranked, L, unit);
  const auto positives = detail::count_positives(ranked);
  if (positives == 0) fail(ErrorCode::NoPositives, "CostEffort needs at least one vulnerability-fixing commit");
  std::size_t found = 0;
  for (std::size_t i = 0; i < n; ++i) found += detail::labeled_positive(ranked[i]) ? 1 : 0;
  return static_cast<double>(found) / static_cast<double>(positives);
}

// ---------------------------------------------------------------------------
// Popt@L

struct CurvePoint {
  double x = 0.0;  // % of total LOC inspected
  double y = 0.0;  // % of vulnerability-fixing commits found
};

/// Alberg curve of an inspection order: (0,0) then one point per commit.
inline std::vector<CurvePoint> alberg_curve(const RankedList& order) {
  double total_loc = 0.0;
  for (const auto& c : order) total_loc += static_cast<double>(c.loc);
  const auto positives = detail::count_positives(order);
  std::vector<CurvePoint> pts{{0.0, 0.0}};
  double loc = 0.0;
  std::size_t found = 0;
  for (const auto& c : order) {
    loc += static_cast<double>(c.loc);
    found += detail::labeled_positive(c) ? 1 : 0;
    pts.push_back({total_loc > 0 ? 100.0 * loc / total_loc : 0.0,
                   positives > 0 ? 100.0 * static_cast<double>(found) / static_cast<double>(positives) : 0.0});
  }
  return pts;
}

/// Trapezoidal area under a piecewise-linear curve on [0, L].
inline double area_under(const std::vector<CurvePoint>& pts, double L) {
  double area = 0.0;
  for (std::size_t k = 1; k < pts.size(); ++k) {
    const auto& a = pts[k - 1];
    const auto& b = pts[k];
    if (a.x >= L) break;
    if (b.x <= L) {
      area += (b.x - a.x) * (a.y + b.y) / 2.0;
    } else {
      const double yL = a.y + (b.y - a.y) * (L - a.x) / (b.x - a.x);
      area += (L - a.x) * (a.y + yL) / 2.0;
      break;
    }
  }
  return area;
}

/// Positives first by ascending LOC, then negatives by ascending LOC.
inline RankedList optimal_order(RankedList list) {
  std::stable_sort(list.begin(), list.end(), [](const ScoredCommit& a, const ScoredCommit& b) {
    const bool pa = detail::labeled_positive(a), pb = detail::labeled_positive(b);
    if (pa != pb) return pa;
    if (a.loc != b.loc) return a.loc < b.loc;
    return a.id < b.id;
  });
  return list;
}

/// Negatives first by descending LOC, then positives by descending LOC.
inline RankedList worst_order(RankedList list) {
  std::stable_sort(list.begin(), list.end(), [](const ScoredCommit& a, const ScoredCommit& b) {
    const bool pa = detail::labeled_positive(a), pb = detail::labeled_positive(b);
    if (pa != pb) return !pa;
    if (a.loc != b.loc) return a.loc > b.loc;
    return a.id < b.id;
  });
  return list;
}

/// Area(model, worst) / Area(optimal, worst), each integrated over [0, L] %LOC.
inline double p_opt(const RankedList& ranked, double L) {
  if (ranked.empty()) fail(ErrorCode::EmptyList, "ranked list is empty");
  detail::check_percent(L);
  if (detail::count_positives(ranked) == 0) fail(ErrorCode::NoPositives, "Popt needs at least one vulnerability-fixing commit");
  const double model = area_under(alberg_curve(ranked), L);
  const double best = area_under(alberg_curve(optimal_order(ranked)), L);
  const double worst = area_under(alberg_curve(worst_order(ranked)), L);
  const double denom = best - worst;
  if (!(denom > 0.0)) fail(ErrorCode::DegenerateOptimal, "optimal and worst curves enclose no area");
  return (model - worst) / denom;
}

// ---------------------------------------------------------------------------
// Squared point-biserial correlation

inline double spb(std::span<const double> values, const std::vector<bool>& labels) {
  require(values.size() == labels.size(), ErrorCode::InvalidArgument, "values and labels differ in length");
  const double n = static_cast<double>(values.size());
  double sum1 = 0.0, sum0 = 0.0, n1 = 0.0, mean = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    mean += values[i];
    if (labels[i]) {
      sum1 += values[i];
      n1 += 1.0;
    } else {
      sum0 += values[i];
    }
  }
  const double n0 = n - n1;
  if (n1 == 0.0 || n0 == 0.0) fail(ErrorCode::DegenerateInput, "point-biserial correlation needs both classes");
  mean /= n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= n;
  if (!(var > 0.0)) fail(ErrorCode::DegenerateInput, "values are constant");
  const double r = (sum1 / n1 - sum0 / n0) / std::sqrt(var) * std::sqrt((n1 / n) * (n0 / n));
  return std::min(1.0, r * r);
}

/// Conventional reading of a squared point-biserial value.
inline std::string_view spb_strength(double r2) noexcept {
  if (r2 >= 0.81) return "very strong";
  if (r2 >= 0.49) return "strong";
  if (r2 >= 0.25) return "moderate";
  if (r2 >= 0.09) return "weak";
  if (r2 > 0.0) return "very weak";
  return "none";
}

// ---------------------------------------------------------------------------
// Report

struct MetricReport {
  double auc = 0.0;
  std::map<std::string, std::map<double, double>> cost_effort;  // unit -> L -> value
  std::map<double, double> p_opt;
  std::optional<double> spb;
  std::map<std::string, std::map<double, std::size_t>> inspected;
};

inline MetricReport evaluate(const RankedList& ranked, std::span<const double> Ls, std::span<const CostUnit> units) {
  MetricReport report;
  report.auc = auc(ranked);
  for (auto u : units)
    for (double L : Ls) {
      report.cost_effort[std::string(to_string(u))][L] = cost_effort(ranked, L, u);
      report.inspected[std::string(to_string(u))][L] = inspected_count(ranked, L, u);
    }
  for (double L : Ls) report.p_opt[L] = p_opt(ranked, L);

  std::vector<double> locs;
  std::vector<bool> labels;
  for (const auto& c : ranked) {
    locs.push_back(static_cast<double>(c.loc));
    labels.push_back(*c.label);
  }
  try {
    report.spb = spb(locs, labels);
  } catch (const Error&) {
    report.spb.reset();
  }
  return report;
}

namespace detail {

inline std::string percent_key(double L) {
  std::ostringstream ss;
  ss << L;
  return ss.str();
}

}  // namespace detail

inline nlohmann::json to_json(const MetricReport& r) {
  nlohmann::json j;
  j["auc"] = r.auc;
  j["cost_effort"] = nlohmann::json::object();
  for (const auto& [unit, byL] : r.cost_effort)
    for (const auto& [L, v] : byL) j["cost_effort"][unit][detail::percent_key(L)] = v;
  j["inspected"] = nlohmann::json::object();
  for (const auto& [unit, byL] : r.inspected)
    for (const auto& [L, v] : byL) j["inspected"][unit][detail::percent_key(L)] = v;
  j["p_opt"] = nlohmann::json::object();
  for (const auto& [L, v] : r.p_opt) j["p_opt"][detail::percent_key(L)] = v;
  if (r.spb) {
    j["spb"] = *r.spb;
    j["spb_strength"] = std::string(spb_strength(*r.spb));
  } else {
    j["spb"] = nullptr;
  }
  return j;
}

}  // namespace vfscan
