#pragma once

// Duration matching between source speech and translated candidates: the
// pause-free frame count, speaking rate, scaled candidate duration, the
// semantic gate and the bounded paraphrase loop.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pstts/error.hpp"
#include "pstts/json_io.hpp"
#include "pstts/pauses.hpp"
#include "pstts/providers.hpp"
#include "pstts/selection.hpp"
#include "pstts/sequences.hpp"

namespace pstts {

struct IsoParams {
  std::int64_t window_frames = 26;
  double sim_threshold = 0.75;
  std::int64_t max_iterations = 60;

  void validate() const {
    require(window_frames >= 0, "window_frames must be >= 0");
    require(sim_threshold >= 0.0 && sim_threshold <= 1.0, "sim_threshold must lie in [0, 1]");
    require(max_iterations >= 1, "max_iterations must be >= 1");
  }
};

struct IsoEvaluation {
  std::size_t candidate_index = 0;
  double scaled_duration = 0.0;
  double similarity = 0.0;
  bool accepted = false;
};

/// K' = K - sum of pause lengths.
inline std::int64_t effective_frames(std::int64_t total_frames, const PauseIntervalSet& pauses) {
  require(total_frames >= 0, "total frame count must be non-negative");
  std::int64_t paused = 0;
  for (const auto& iv : pauses.intervals) {
    require(iv.length_frames >= 0, "negative pause length");
    paused += iv.length_frames;
  }
  require(paused <= total_frames, "pause frames (" + std::to_string(paused) +
                                      ") exceed total frames (" + std::to_string(total_frames) + ")");
  return total_frames - paused;
}

/// R = K' / duration(S_b). Both terms are kept so that a scaled duration can
/// be formed as K' * (T / P), which gives K' exactly when T == P.
struct SpeakingRate {
  std::int64_t effective = 0;
  double predicted = 1.0;

  double value() const noexcept { return static_cast<double>(effective) / predicted; }
  operator double() const noexcept { return value(); }
};

inline SpeakingRate speaking_rate(std::int64_t effective, double predicted_duration) {
  require(effective >= 0, "effective frame count must be non-negative");
  if (!(predicted_duration > 0.0) || !std::isfinite(predicted_duration))
    fail(ErrorCode::division_degenerate, "predicted source duration must be positive");
  return {effective, predicted_duration};
}

inline double scaled_duration(double rate, double target_predicted_duration) {
  require(std::isfinite(rate) && std::isfinite(target_predicted_duration),
          "scaled_duration inputs must be finite");
  require(rate >= 0.0 && target_predicted_duration >= 0.0,
          "scaled_duration inputs must be non-negative");
  return rate * target_predicted_duration;
}

inline double scaled_duration(const SpeakingRate& rate, double target_predicted_duration) {
  require(std::isfinite(target_predicted_duration) && target_predicted_duration >= 0.0,
          "target duration must be finite and non-negative");
  return static_cast<double>(rate.effective) * (target_predicted_duration / rate.predicted);
}

inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "embedding dimensions differ (" + std::to_string(a.size()) +
                                    " vs " + std::to_string(b.size()) + ")");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) fail(ErrorCode::degenerate_embedding, "zero-norm embedding");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

/// Inclusive duration window around K' and inclusive similarity threshold.
inline bool iso_accept(std::int64_t effective, double eval_duration, double similarity,
                       const IsoParams& params = {}) {
  const double lo = static_cast<double>(effective - params.window_frames);
  const double hi = static_cast<double>(effective + params.window_frames);
  return lo <= eval_duration && eval_duration <= hi && similarity >= params.sim_threshold;
}

struct IsoSource {
  std::string text;  // source-language sentence, keys the paraphrase stream
  std::int64_t effective_frames = 0;
  std::vector<double> embedding;
  TokenizedSequence sequence;
};

struct IsoResult {
  Candidate chosen;
  IsoEvaluation evaluation;
  std::vector<IsoEvaluation> trail;
  std::vector<Candidate> evaluated;
  double speaking_rate = 0.0;
  bool fallback = false;
};

/// Phonemize, tokenize and time a sentence. Fixture misses surface as
/// ProviderError tagged with `index`.
inline Candidate make_candidate(std::size_t index, std::string id, const std::string& text,
                                const std::string& language, const PhonemeAlphabet& alphabet,
                                const ProviderRefs& providers, bool with_embedding) {
  try {
    Candidate c;
    c.index = index;
    c.id = std::move(id);
    c.text = text;
    const auto phonemes = providers.phonemizer->phonemize(text, language);
    c.sequence.base = tokenize_with_blanks(phonemes, alphabet, language);
    const auto prediction = providers.durations->predict_duration(c.sequence.base);
    c.predicted_frames = prediction.total_frames;
    for (double d : prediction.per_token_frames) c.sequence.durations.push_back(std::llround(d));
    if (with_embedding) c.embedding = providers.embedder->embed_sentence(text);
    return c;
  } catch (const ProviderError&) {
    throw;
  } catch (const Error& e) {
    throw ProviderError(index, e.code(), e.what());
  }
}

/// Evaluates the initial candidate, then up to `max_iterations` paraphrases
/// in stream order. Returns the first accepted candidate, or else the
/// evaluated candidate with the highest similarity (earliest on ties).
inline IsoResult iso_select(const IsoSource& source, Candidate initial,
                            const std::string& target_language, const PhonemeAlphabet& alphabet,
                            const ProviderRefs& providers, double source_predicted_frames,
                            const IsoParams& params = {}) {
  params.validate();
  IsoResult result;
  const auto rate = speaking_rate(source.effective_frames, source_predicted_frames);
  result.speaking_rate = rate.value();

  auto evaluate = [&](Candidate& c) {
    IsoEvaluation ev;
    ev.candidate_index = c.index;
    ev.scaled_duration = scaled_duration(rate, c.predicted_frames);
    try {
      ev.similarity = cosine_similarity(source.embedding, c.embedding);
    } catch (const Error& e) {
      throw ProviderError(c.index, e.code(), e.what());
    }
    ev.accepted = iso_accept(source.effective_frames, ev.scaled_duration, ev.similarity, params);
    result.trail.push_back(ev);
    result.evaluated.push_back(c);
    return ev.accepted;
  };

  initial.index = 0;
  if (evaluate(initial)) {
    result.chosen = std::move(initial);
    result.evaluation = result.trail.back();
    return result;
  }

  std::vector<std::string> prior;
  for (std::int64_t iter = 1; iter <= params.max_iterations; ++iter) {
    const auto next = providers.paraphraser->next_paraphrase({source.text, "iso", prior});
    if (!next) break;
    prior.push_back(next->text);
    auto c = make_candidate(static_cast<std::size_t>(iter), next->id, next->text, target_language,
                            alphabet, providers, true);
    if (evaluate(c)) {
      result.chosen = std::move(c);
      result.evaluation = result.trail.back();
      return result;
    }
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i < result.trail.size(); ++i)
    if (result.trail[i].similarity > result.trail[best].similarity) best = i;
  result.fallback = true;
  result.chosen = result.evaluated[best];
  result.evaluation = result.trail[best];
  return result;
}

inline json to_json(const IsoEvaluation& ev) {
  return {{"candidate_index", ev.candidate_index},
          {"scaled_duration", sig9(ev.scaled_duration)},
          {"similarity", sig9(ev.similarity)},
          {"accepted", ev.accepted}};
}

}  // namespace pstts
