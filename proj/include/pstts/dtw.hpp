#pragma once

// Banded dynamic time warping over null-masked, duration-expanded phoneme
// sequences, using the vowel distance matrix as local cost.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pstts/error.hpp"
#include "pstts/sequences.hpp"
#include "pstts/vowel_space.hpp"

namespace pstts {

/// Sakoe-Chiba radius. `automatic` resolves to max(5, ceil(0.1 * max(K, L))).
struct BandRadius {
  enum class Kind { automatic, fixed, unbounded } kind = Kind::automatic;
  std::int64_t radius = 0;

  static BandRadius fixed_at(std::int64_t r) {
    require(r >= 0, "band radius must be >= 0");
    return {Kind::fixed, r};
  }
  static BandRadius none() { return {Kind::unbounded, 0}; }

  static BandRadius parse(const std::string& text) {
    if (text == "auto") return {};
    if (text == "unbounded" || text == "none") return none();
    try {
      std::size_t used = 0;
      const long long r = std::stoll(text, &used);
      if (used == text.size()) return fixed_at(r);
    } catch (const std::exception&) {
    }
    fail(ErrorCode::invalid_input, "band radius must be auto, unbounded or an integer >= 0");
  }

  std::string to_string() const {
    switch (kind) {
      case Kind::automatic: return "auto";
      case Kind::unbounded: return "unbounded";
      case Kind::fixed: return std::to_string(radius);
    }
    return "auto";
  }

  /// nullopt means unbounded.
  std::optional<std::int64_t> resolve(std::size_t K, std::size_t L) const {
    switch (kind) {
      case Kind::unbounded: return std::nullopt;
      case Kind::fixed: return radius;
      case Kind::automatic: {
        const auto longest = static_cast<std::int64_t>(std::max(K, L));
        return std::max<std::int64_t>(5, (longest + 9) / 10);
      }
    }
    return std::nullopt;
  }
};

/// A distance matrix bound to alphabet ids: vowel ids of the source language
/// index rows, vowel ids of the target language index columns.
class VowelCostModel {
 public:
  VowelCostModel(const VowelDistanceMatrix& matrix, const PhonemeAlphabet& alphabet)
      : matrix_(matrix), null_id_(alphabet.null_id()) {
    row_of_.assign(alphabet.size(), kAbsent);
    col_of_.assign(alphabet.size(), kAbsent);
    for (std::size_t r = 0; r < matrix.rows(); ++r) {
      auto id = alphabet.find(matrix.source_language, matrix.source_vowels[r]);
      if (!id)
        fail(ErrorCode::unknown_vowel, "matrix vowel " + matrix.source_language + "/" +
                                           matrix.source_vowels[r] + " is not in the alphabet");
      row_of_[*id] = r;
    }
    for (std::size_t c = 0; c < matrix.cols(); ++c) {
      auto id = alphabet.find(matrix.target_language, matrix.target_vowels[c]);
      if (!id)
        fail(ErrorCode::unknown_vowel, "matrix vowel " + matrix.target_language + "/" +
                                           matrix.target_vowels[c] + " is not in the alphabet");
      col_of_[*id] = c;
    }
  }

  /// Vowel/vowel: matrix entry. Null/null: 0. Null against a vowel: null_cost.
  double operator()(PhonemeId x, PhonemeId y) const {
    const bool xn = x == null_id_, yn = y == null_id_;
    if (xn && yn) return 0.0;
    if (!xn) lookup(row_of_, x, "source");
    if (!yn) lookup(col_of_, y, "target");
    if (xn || yn) return matrix_.null_cost;
    return matrix_.at(row_of_[x], col_of_[y]);
  }

  const VowelDistanceMatrix& matrix() const noexcept { return matrix_; }
  PhonemeId null_id() const noexcept { return null_id_; }

 private:
  static constexpr std::size_t kAbsent = std::numeric_limits<std::size_t>::max();

  void lookup(const std::vector<std::size_t>& table, PhonemeId id, const char* side) const {
    if (id < 0 || static_cast<std::size_t>(id) >= table.size() || table[id] == kAbsent)
      fail(ErrorCode::unknown_vowel,
           "id " + std::to_string(id) + " is neither null nor a " + side + " vowel in the matrix");
  }

  VowelDistanceMatrix matrix_;
  PhonemeId null_id_;
  std::vector<std::size_t> row_of_;
  std::vector<std::size_t> col_of_;
};

inline double local_cost(PhonemeId x, PhonemeId y, const VowelCostModel& model) {
  return model(x, y);
}

struct DtwResult {
  double distance = 0.0;
  std::vector<std::pair<std::size_t, std::size_t>> path;
};

/// Cell (k, l) lies in the band when its offset from the rescaled diagonal,
/// measured along the longer sequence, is at most `radius`:
/// |k*L - l*K| <= radius * max(K, L). For K >= L this is |k * L/K - l| <= radius.
/// Measuring along the longer axis keeps the band the same when the two
/// sequences are swapped.
inline bool in_band(std::size_t k, std::size_t l, std::size_t K, std::size_t L,
                    std::optional<std::int64_t> radius) {
  if (!radius) return true;
  const auto lhs = static_cast<std::int64_t>(k) * static_cast<std::int64_t>(L) -
                   static_cast<std::int64_t>(l) * static_cast<std::int64_t>(K);
  return std::abs(lhs) <= *radius * static_cast<std::int64_t>(std::max(K, L));
}

/// Minimum cumulative local cost over monotone paths from (0,0) to
/// (K-1, L-1) with steps (1,0), (0,1), (1,1), restricted to the band.
/// `cost(k, l)` must return a non-negative local cost. Backtracking prefers
/// the diagonal, then the vertical (k-1, l) step.
template <typename CostFn>
DtwResult dtw_with(std::size_t K, std::size_t L, CostFn&& cost,
                   std::optional<std::int64_t> radius = std::nullopt) {
  require(K > 0 && L > 0, "dtw needs non-empty sequences");
  if (!in_band(0, 0, K, L, radius) || !in_band(K - 1, L - 1, K, L, radius))
    fail(ErrorCode::band_infeasible, "band radius " + std::to_string(radius.value_or(-1)) +
                                         " excludes a corner cell for lengths " +
                                         std::to_string(K) + "x" + std::to_string(L));
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> acc(K * L, kInf);
  auto at = [&](std::size_t k, std::size_t l) -> double& { return acc[k * L + l]; };

  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t l = 0; l < L; ++l) {
      if (!in_band(k, l, K, L, radius)) continue;
      double best;
      if (k == 0 && l == 0) {
        best = 0.0;
      } else {
        best = kInf;
        if (k > 0 && l > 0) best = std::min(best, at(k - 1, l - 1));
        if (k > 0) best = std::min(best, at(k - 1, l));
        if (l > 0) best = std::min(best, at(k, l - 1));
        if (best == kInf) continue;
      }
      at(k, l) = best + cost(k, l);
    }
  }
  if (at(K - 1, L - 1) == kInf)
    fail(ErrorCode::band_infeasible, "no monotone path inside band radius " +
                                         std::to_string(radius.value_or(-1)));

  DtwResult out;
  out.distance = at(K - 1, L - 1);
  std::size_t k = K - 1, l = L - 1;
  out.path.emplace_back(k, l);
  while (k > 0 || l > 0) {
    if (k == 0) {
      --l;
    } else if (l == 0) {
      --k;
    } else {
      const double diag = at(k - 1, l - 1), vert = at(k - 1, l), horiz = at(k, l - 1);
      if (diag <= vert && diag <= horiz) {
        --k;
        --l;
      } else if (vert <= horiz) {
        --k;
      } else {
        --l;
      }
    }
    out.path.emplace_back(k, l);
  }
  std::reverse(out.path.begin(), out.path.end());
  return out;
}

struct DtwParams {
  BandRadius band;
};

inline DtwResult dtw(const ExpandedSequence& xs, const ExpandedSequence& ys,
                     const VowelCostModel& costs, const DtwParams& params = {}) {
  require(!xs.empty() && !ys.empty(), "dtw needs non-empty sequences");
  const auto radius = params.band.resolve(xs.size(), ys.size());
  return dtw_with(
      xs.size(), ys.size(),
      [&](std::size_t k, std::size_t l) { return costs(xs.frame_ids[k], ys.frame_ids[l]); }, radius);
}

/// DTW distance of each candidate against the source, in input order.
/// Failures are rethrown with the candidate index in the message.
inline std::vector<double> candidate_dtw_scores(const ExpandedSequence& source,
                                                std::span<const ExpandedSequence> candidates,
                                                const VowelCostModel& costs,
                                                const DtwParams& params = {}) {
  std::vector<double> scores;
  scores.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    try {
      scores.push_back(dtw(source, candidates[i], costs, params).distance);
    } catch (const Error& e) {
      throw Error(e.code(), "candidate " + std::to_string(i) + ": " + e.what());
    }
  }
  return scores;
}

}  // namespace pstts
