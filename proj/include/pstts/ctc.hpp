#pragma once

// CTC Viterbi forced alignment over externally supplied emission matrices.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pstts/error.hpp"
#include "pstts/json_io.hpp"

namespace pstts {

class EmissionMatrix {
 public:
  EmissionMatrix() = default;

  /// `log_probs` is row-major frames x vocab. Every row must be a normalized
  /// log distribution to within `tolerance`.
  EmissionMatrix(std::vector<double> log_probs, std::size_t frames, std::size_t vocab,
                 int blank_index, double tolerance = 1e-6)
      : log_probs_(std::move(log_probs)), frames_(frames), vocab_(vocab), blank_(blank_index) {
    require(frames_ >= 1, "emission matrix needs at least one frame");
    require(vocab_ >= 1, "emission matrix needs a non-empty vocabulary");
    require(log_probs_.size() == frames_ * vocab_, "emission matrix size mismatch");
    require(blank_ >= 0 && static_cast<std::size_t>(blank_) < vocab_,
            "blank index outside vocabulary");
    for (std::size_t t = 0; t < frames_; ++t) {
      auto r = row(t);
      double peak = -std::numeric_limits<double>::infinity();
      for (double v : r) {
        require(!std::isnan(v) && v <= 0.0 + tolerance, "emission entries must be log-probabilities");
        peak = std::max(peak, v);
      }
      require(std::isfinite(peak), "emission row " + std::to_string(t) + " has no mass");
      double acc = 0.0;
      for (double v : r) acc += std::exp(v - peak);
      double lse = peak + std::log(acc);
      require(std::abs(lse) <= tolerance,
              "emission row " + std::to_string(t) + " is not normalized (log-sum-exp " +
                  format_sig9(lse) + ")");
    }
  }

  std::size_t frames() const noexcept { return frames_; }
  std::size_t vocab() const noexcept { return vocab_; }
  int blank_index() const noexcept { return blank_; }
  double at(std::size_t t, std::size_t v) const noexcept { return log_probs_[t * vocab_ + v]; }
  std::span<const double> row(std::size_t t) const noexcept {
    return {log_probs_.data() + t * vocab_, vocab_};
  }

 private:
  std::vector<double> log_probs_;
  std::size_t frames_ = 0;
  std::size_t vocab_ = 0;
  int blank_ = 0;
};

/// Emission fixture: the matrix plus, optionally, the target tokens and the
/// word-separator token carried alongside it.
struct EmissionFixture {
  EmissionMatrix emissions;
  std::vector<int> targets;
  std::optional<int> separator;
};

inline EmissionFixture emission_fixture_from_json(const json& j,
                                                  const std::string& origin = "emissions") {
  const int blank = get_field<int>(j, "blank_index", origin);
  const json& rows = j.at("log_probs");
  require(rows.is_array() && !rows.empty(), origin + ": log_probs must be a non-empty list");
  const std::size_t vocab = rows.front().size();
  std::vector<double> flat;
  for (const auto& r : rows) {
    require(r.is_array() && r.size() == vocab, origin + ": ragged log_probs rows");
    for (const auto& v : r) flat.push_back(v.get<double>());
  }
  EmissionFixture out{EmissionMatrix(std::move(flat), rows.size(), vocab, blank), {}, {}};
  if (j.contains("targets")) out.targets = j.at("targets").get<std::vector<int>>();
  if (j.contains("separator")) out.separator = j.at("separator").get<int>();
  return out;
}

/// Binary layout: "CTCE", frames u32, vocab u32, blank_index u32, then
/// frames*vocab little-endian float32 log-probabilities, row-major.
inline EmissionMatrix decode_emissions_binary(std::span<const unsigned char> bytes,
                                              const std::string& origin = "emissions") {
  auto u32 = [&](std::size_t off) {
    return static_cast<std::uint32_t>(bytes[off]) | (static_cast<std::uint32_t>(bytes[off + 1]) << 8) |
           (static_cast<std::uint32_t>(bytes[off + 2]) << 16) |
           (static_cast<std::uint32_t>(bytes[off + 3]) << 24);
  };
  require(bytes.size() >= 16 && std::memcmp(bytes.data(), "CTCE", 4) == 0,
          origin + ": missing CTCE header");
  const std::size_t frames = u32(4), vocab = u32(8);
  const int blank = static_cast<int>(u32(12));
  require(bytes.size() == 16 + 4 * frames * vocab, origin + ": payload size mismatch");
  std::vector<double> flat(frames * vocab);
  for (std::size_t i = 0; i < flat.size(); ++i) {
    std::uint32_t raw = u32(16 + 4 * i);
    float f;
    std::memcpy(&f, &raw, sizeof f);
    flat[i] = f;
  }
  // float32 storage cannot hold rows normalized to 1e-6 in general.
  return EmissionMatrix(std::move(flat), frames, vocab, blank, 1e-5);
}

inline std::string encode_emissions_binary(const EmissionMatrix& m) {
  std::string out = "CTCE";
  auto put = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  put(static_cast<std::uint32_t>(m.frames()));
  put(static_cast<std::uint32_t>(m.vocab()));
  put(static_cast<std::uint32_t>(m.blank_index()));
  for (std::size_t t = 0; t < m.frames(); ++t)
    for (double v : m.row(t)) {
      float f = static_cast<float>(v);
      std::uint32_t raw;
      std::memcpy(&raw, &f, sizeof raw);
      put(raw);
    }
  return out;
}

/// Loads either the binary form or (for .json files) the JSON fixture form.
inline EmissionFixture load_emissions(const std::filesystem::path& path) {
  std::string raw = read_text_file(path);
  if (raw.size() >= 4 && raw.compare(0, 4, "CTCE") == 0)
    return {decode_emissions_binary({reinterpret_cast<const unsigned char*>(raw.data()), raw.size()},
                                    path.string()),
            {}, {}};
  return emission_fixture_from_json(parse_json(raw, path.string()), path.string());
}

struct AlignmentResult {
  std::vector<int> frame_labels;                                // vocab id per frame
  std::vector<std::pair<std::int64_t, std::int64_t>> token_spans;  // [start, end) per target
  double path_log_prob = 0.0;
};

/// Merge repeats, then drop blanks.
inline std::vector<int> ctc_collapse(std::span<const int> labels, int blank) {
  std::vector<int> out;
  int prev = -1;
  for (int l : labels) {
    if (l != prev && l != blank) out.push_back(l);
    prev = l;
  }
  return out;
}

/// Maximum-probability monotone path through the CTC graph (targets
/// interleaved with blanks; skips allowed between distinct labels). Score
/// ties prefer the blank predecessor, then the lower vocabulary index.
inline AlignmentResult ctc_viterbi_align(const EmissionMatrix& em, std::span<const int> targets) {
  const int blank = em.blank_index();
  for (int id : targets) {
    require(id >= 0 && static_cast<std::size_t>(id) < em.vocab(),
            "target id " + std::to_string(id) + " outside vocabulary");
    require(id != blank, "targets may not contain the blank index");
  }
  const std::size_t T = em.frames();
  const std::size_t S = 2 * targets.size() + 1;
  auto label = [&](std::size_t s) { return s % 2 == 0 ? blank : targets[s / 2]; };

  // Minimum frames: one per target plus one per separating blank between repeats.
  std::size_t needed = targets.size();
  for (std::size_t i = 1; i < targets.size(); ++i)
    if (targets[i] == targets[i - 1]) ++needed;
  if (needed > T)
    fail(ErrorCode::alignment_infeasible, std::to_string(targets.size()) + " targets need " +
                                              std::to_string(needed) + " frames, have " +
                                              std::to_string(T));

  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  std::vector<double> score(T * S, kNegInf);
  std::vector<std::uint32_t> back(T * S, 0);

  // Candidate a beats incumbent b on strictly higher score, or equal score
  // with (blank first, then lower vocabulary index).
  auto better = [&](double sa, std::size_t a, double sb, std::size_t b) {
    if (sa != sb) return sa > sb;
    const int la = label(a), lb = label(b);
    if ((la == blank) != (lb == blank)) return la == blank;
    return la < lb;
  };

  score[0] = em.at(0, blank);
  if (S > 1) score[1] = em.at(0, label(1));
  for (std::size_t t = 1; t < T; ++t) {
    const double* prev = score.data() + (t - 1) * S;
    for (std::size_t s = 0; s < S; ++s) {
      std::size_t best = s;
      double best_score = prev[s];
      if (s >= 1 && better(prev[s - 1], s - 1, best_score, best)) {
        best = s - 1;
        best_score = prev[s - 1];
      }
      if (s >= 2 && s % 2 == 1 && label(s) != label(s - 2) &&
          better(prev[s - 2], s - 2, best_score, best)) {
        best = s - 2;
        best_score = prev[s - 2];
      }
      if (best_score == kNegInf) continue;
      score[t * S + s] = best_score + em.at(t, label(s));
      back[t * S + s] = static_cast<std::uint32_t>(best);
    }
  }

  const double* last = score.data() + (T - 1) * S;
  std::size_t state = S - 1;
  if (S > 1 && better(last[S - 2], S - 2, last[S - 1], S - 1)) state = S - 2;
  if (last[state] == kNegInf)
    fail(ErrorCode::alignment_infeasible, "no path with non-zero probability");

  AlignmentResult out;
  out.path_log_prob = last[state];
  out.frame_labels.assign(T, blank);
  out.token_spans.assign(targets.size(), {-1, -1});
  for (std::size_t t = T; t-- > 0;) {
    out.frame_labels[t] = label(state);
    if (state % 2 == 1) {
      auto& span = out.token_spans[state / 2];
      if (span.second < 0) span.second = static_cast<std::int64_t>(t) + 1;
      span.first = static_cast<std::int64_t>(t);
    }
    if (t > 0) state = back[t * S + state];
  }
  return out;
}

/// Word spans from token spans: words are maximal runs of targets between
/// separator tokens. Without a separator every target is its own word.
inline std::vector<std::pair<std::int64_t, std::int64_t>> word_spans(
    const AlignmentResult& alignment, std::span<const int> targets, std::optional<int> separator) {
  std::vector<std::pair<std::int64_t, std::int64_t>> words;
  bool open = false;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (separator && targets[i] == *separator) {
      open = false;
      continue;
    }
    const auto& span = alignment.token_spans[i];
    if (open && separator) {
      words.back().second = span.second;
    } else {
      words.push_back(span);
      open = true;
    }
  }
  return words;
}

}  // namespace pstts
