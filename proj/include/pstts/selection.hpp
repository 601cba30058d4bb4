#pragma once

// Final candidate choice: PS argmin over DTW distances, the PS-Comet weighted
// combination, and the DTW-vs-semantic correlation diagnostic.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "pstts/error.hpp"
#include "pstts/json_io.hpp"
#include "pstts/sequences.hpp"

namespace pstts {

/// One paraphrase under consideration.
struct Candidate {
  std::size_t index = 0;
  std::string id;
  std::string text;
  DurationedSequence sequence;
  double predicted_frames = 0.0;  // duration_TTS of the tokenized text
  std::vector<double> embedding;
  std::optional<double> semantic_score;
};

enum class SelectionMode { ps, ps_comet };

inline std::string_view to_string(SelectionMode mode) {
  return mode == SelectionMode::ps ? "ps" : "ps-comet";
}

inline SelectionMode parse_selection_mode(const std::string& text) {
  if (text == "ps") return SelectionMode::ps;
  if (text == "ps-comet") return SelectionMode::ps_comet;
  fail(ErrorCode::invalid_input, "unknown selection mode \"" + text + "\" (want ps or ps-comet)");
}

struct CometParams {
  double alpha = 1.6;
  double beta = 0.4;
  /// Combine the raw DTW distance instead of the normalized, inverted one
  /// (the combination read literally, for reproduction studies).
  bool raw_dtw = false;

  void validate() const {
    require(std::isfinite(alpha) && std::isfinite(beta), "alpha and beta must be finite");
    require(alpha >= 0.0 && beta >= 0.0, "alpha and beta must be non-negative");
    require(alpha + beta > 0.0, "alpha + beta must be positive");
  }
};

struct SelectionRow {
  std::size_t index = 0;
  double dtw_raw = 0.0;
  double dtw_normalized_inverted = 0.0;
  std::optional<double> semantic_score;
  std::optional<double> combined_score;
  std::string id;
  std::string text;
};

struct SelectionReport {
  std::size_t chosen_index = 0;
  SelectionMode mode = SelectionMode::ps;
  CometParams params;
  std::vector<SelectionRow> rows;
};

namespace detail {
inline void require_finite_scores(std::span<const double> scores, const char* what) {
  require(!scores.empty(), std::string(what) + " must be non-empty");
  for (double s : scores) require(std::isfinite(s), std::string(what) + " must be finite");
}
}  // namespace detail

/// Index of the smallest DTW distance; ties go to the lowest index.
inline std::size_t ps_select(std::span<const double> dtw_scores) {
  detail::require_finite_scores(dtw_scores, "dtw scores");
  std::size_t best = 0;
  for (std::size_t i = 1; i < dtw_scores.size(); ++i)
    if (dtw_scores[i] < dtw_scores[best]) best = i;
  return best;
}

/// 1 - (s - min) / (max - min); all 1.0 when every score is equal.
inline std::vector<double> normalize_invert(std::span<const double> dtw_scores) {
  detail::require_finite_scores(dtw_scores, "dtw scores");
  auto [lo, hi] = std::minmax_element(dtw_scores.begin(), dtw_scores.end());
  const double min = *lo, range = *hi - *lo;
  std::vector<double> out(dtw_scores.size(), 1.0);
  if (range > 0.0)
    for (std::size_t i = 0; i < dtw_scores.size(); ++i)
      out[i] = 1.0 - (dtw_scores[i] - min) / range;
  return out;
}

inline SelectionReport ps_report(std::span<const double> dtw_scores) {
  SelectionReport report;
  report.mode = SelectionMode::ps;
  report.chosen_index = ps_select(dtw_scores);
  const auto inverted = normalize_invert(dtw_scores);
  for (std::size_t i = 0; i < dtw_scores.size(); ++i)
    report.rows.push_back({i, dtw_scores[i], inverted[i], std::nullopt, std::nullopt, {}, {}});
  return report;
}

/// argmax of alpha * normalize_invert(dtw) + beta * semantic, lowest index on ties.
inline SelectionReport ps_comet_select(std::span<const double> dtw_scores,
                                       std::span<const double> semantic_scores,
                                       const CometParams& params = {}) {
  params.validate();
  require(dtw_scores.size() == semantic_scores.size(),
          "dtw and semantic score lists differ in length");
  detail::require_finite_scores(semantic_scores, "semantic scores");
  const auto inverted = normalize_invert(dtw_scores);

  SelectionReport report;
  report.mode = SelectionMode::ps_comet;
  report.params = params;
  for (std::size_t i = 0; i < dtw_scores.size(); ++i) {
    const double dtw_term = params.raw_dtw ? dtw_scores[i] : inverted[i];
    const double combined = params.alpha * dtw_term + params.beta * semantic_scores[i];
    report.rows.push_back({i, dtw_scores[i], inverted[i], semantic_scores[i], combined, {}, {}});
    if (combined > *report.rows[report.chosen_index].combined_score) report.chosen_index = i;
  }
  return report;
}

inline json to_json(const SelectionReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows) {
    json row = {{"index", r.index},
                {"dtw_raw", sig9(r.dtw_raw)},
                {"dtw_normalized_inverted", sig9(r.dtw_normalized_inverted)}};
    if (!r.id.empty()) row["id"] = r.id;
    if (!r.text.empty()) row["text"] = r.text;
    if (r.semantic_score) row["semantic_score"] = sig9(*r.semantic_score);
    if (r.combined_score) row["combined_score"] = sig9(*r.combined_score);
    rows.push_back(std::move(row));
  }
  json out = {{"mode", std::string(to_string(report.mode))},
              {"chosen_index", report.chosen_index},
              {"rows", rows}};
  if (report.mode == SelectionMode::ps_comet)
    out["params"] = {{"alpha", sig9(report.params.alpha)},
                     {"beta", sig9(report.params.beta)},
                     {"raw_dtw", report.params.raw_dtw}};
  return out;
}

inline std::string format_table(const SelectionReport& report) {
  std::ostringstream out;
  const bool comet = report.mode == SelectionMode::ps_comet;
  char line[160];
  std::snprintf(line, sizeof line, "%5s  %12s  %10s", "index", "dtw", "dtw_inv");
  out << line;
  if (comet) {
    std::snprintf(line, sizeof line, "  %10s  %10s", "semantic", "combined");
    out << line;
  }
  out << "\n";
  for (const auto& r : report.rows) {
    std::snprintf(line, sizeof line, "%5zu  %12.6g  %10.6f", r.index, r.dtw_raw,
                  r.dtw_normalized_inverted);
    out << line;
    if (comet) {
      std::snprintf(line, sizeof line, "  %10.6f  %10.6f", r.semantic_score.value_or(NAN),
                    r.combined_score.value_or(NAN));
      out << line;
    }
    out << (r.index == report.chosen_index ? "  <- chosen" : "") << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Correlation diagnostic

struct CorrelationResult {
  double pearson_r = 0.0;
  double pearson_p = 1.0;
  double spearman_rho = 0.0;
  double spearman_p = 1.0;
};

/// Two-sided p-value of a correlation coefficient via t = r sqrt((n-2)/(1-r^2)).
inline double correlation_p_value(double r, std::size_t n) {
  require(n >= 3, "need at least 3 pairs for a p-value");
  if (std::abs(r) >= 1.0) return 0.0;
  const double df = static_cast<double>(n - 2);
  const double t = r * std::sqrt(df / (1.0 - r * r));
  boost::math::students_t dist(df);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

/// Pearson coefficient from centered sums, accumulated in extended precision
/// and rounded once, so exactly linear data gives exactly +1 or -1.
inline double pearson_r(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), "series differ in length");
  require(x.size() >= 2, "need at least 2 pairs");
  using wide = long double;
  const wide n = static_cast<wide>(x.size());
  wide mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  wide sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const wide dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0 || syy == 0) fail(ErrorCode::degenerate_series, "constant series has no correlation");
  return std::clamp(static_cast<double>(sxy / std::sqrt(sxx * syy)), -1.0, 1.0);
}

/// 1-based ranks with ties given their average rank.
inline std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

inline double spearman_rho(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), "series differ in length");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson_r(rx, ry);
}

inline CorrelationResult correlation_diagnostic(std::span<const double> dtw_scores,
                                                std::span<const double> semantic_scores) {
  require(dtw_scores.size() == semantic_scores.size(), "series differ in length");
  require(dtw_scores.size() >= 3, "correlation diagnostic needs at least 3 pairs");
  for (double v : dtw_scores) require(std::isfinite(v), "scores must be finite");
  for (double v : semantic_scores) require(std::isfinite(v), "scores must be finite");
  CorrelationResult out;
  out.pearson_r = pearson_r(dtw_scores, semantic_scores);
  out.pearson_p = correlation_p_value(out.pearson_r, dtw_scores.size());
  out.spearman_rho = spearman_rho(dtw_scores, semantic_scores);
  out.spearman_p = correlation_p_value(out.spearman_rho, dtw_scores.size());
  return out;
}

inline json to_json(const CorrelationResult& c, std::size_t n) {
  return {{"n", n},
          {"pearson_r", sig9(c.pearson_r)},
          {"pearson_p", sig9(c.pearson_p)},
          {"spearman_rho", sig9(c.spearman_rho)},
          {"spearman_p", sig9(c.spearman_p)}};
}

}  // namespace pstts
