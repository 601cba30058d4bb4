#pragma once

// Frame energies and pause intervals over source audio.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pstts/audio.hpp"
#include "pstts/error.hpp"
#include "pstts/json_io.hpp"

namespace pstts {

struct FramingParams {
  int window = 1024;
  int hop = 256;
  int sample_rate = kDefaultSampleRate;
  bool allow_resample = false;
};

struct EnergySeries {
  std::vector<double> energies;

  std::int64_t frame_count() const noexcept { return static_cast<std::int64_t>(energies.size()); }
};

struct PauseInterval {
  std::int64_t start_frame = 0;
  std::int64_t length_frames = 0;

  std::int64_t end_frame() const noexcept { return start_frame + length_frames; }
  friend bool operator==(const PauseInterval&, const PauseInterval&) = default;
};

struct PauseIntervalSet {
  std::vector<PauseInterval> intervals;
  std::int64_t total_frames = 0;

  std::int64_t paused_frames() const noexcept {
    std::int64_t sum = 0;
    for (const auto& iv : intervals) sum += iv.length_frames;
    return sum;
  }

  /// Sorted, disjoint, non-empty intervals inside [0, total_frames).
  void validate() const {
    require(total_frames >= 0, "negative total frame count");
    std::int64_t prev_end = 0;
    for (const auto& iv : intervals) {
      require(iv.length_frames > 0, "pause interval with non-positive length");
      require(iv.start_frame >= prev_end, "pause intervals must be sorted and disjoint");
      require(iv.end_frame() <= total_frames, "pause interval exceeds total frames");
      prev_end = iv.end_frame();
    }
  }

  friend bool operator==(const PauseIntervalSet&, const PauseIntervalSet&) = default;
};

inline json to_json(const PauseIntervalSet& set) {
  json list = json::array();
  for (const auto& iv : set.intervals)
    list.push_back({{"start_frame", iv.start_frame}, {"length_frames", iv.length_frames}});
  return {{"total_frames", set.total_frames}, {"intervals", list}};
}

/// Accepts either the report object {"total_frames", "intervals"} or a bare
/// interval list, in which case `total_frames_hint` supplies K.
inline PauseIntervalSet pause_set_from_json(const json& j, std::int64_t total_frames_hint = -1,
                                            const std::string& origin = "pauses") {
  PauseIntervalSet set;
  const json* list = &j;
  if (j.is_object()) {
    set.total_frames = get_field<std::int64_t>(j, "total_frames", origin);
    list = &j.at("intervals");
  } else {
    require(total_frames_hint >= 0, origin + ": bare interval list needs a total frame count");
    set.total_frames = total_frames_hint;
  }
  require(list->is_array(), origin + ": intervals must be a list");
  for (const auto& row : *list)
    set.intervals.push_back({get_field<std::int64_t>(row, "start_frame", origin),
                             get_field<std::int64_t>(row, "length_frames", origin)});
  set.validate();
  return set;
}

/// Mean of squared samples over each full window; partial trailing windows
/// are discarded.
inline EnergySeries frame_energies(const AudioBuffer& input, const FramingParams& params = {}) {
  require(params.window > 0 && params.hop > 0, "window and hop must be positive");
  require(input.sample_rate > 0, "sample rate must be positive");
  const AudioBuffer* audio = &input;
  AudioBuffer resampled;
  if (input.sample_rate != params.sample_rate) {
    if (!params.allow_resample)
      fail(ErrorCode::rate_mismatch, "audio is " + std::to_string(input.sample_rate) +
                                         " Hz, expected " + std::to_string(params.sample_rate));
    resampled = resample_linear(input, params.sample_rate);
    audio = &resampled;
  }
  const auto n = audio->samples.size();
  const auto window = static_cast<std::size_t>(params.window);
  if (n < window)
    fail(ErrorCode::invalid_input, "audio has " + std::to_string(n) +
                                       " samples, fewer than one analysis window");
  const std::size_t frames = (n - window) / params.hop + 1;
  EnergySeries out;
  out.energies.resize(frames);
  for (std::size_t k = 0; k < frames; ++k) {
    const double* w = audio->samples.data() + k * params.hop;
    double acc = 0.0;
    for (std::size_t i = 0; i < window; ++i) acc += w[i] * w[i];
    out.energies[k] = acc / static_cast<double>(window);
  }
  return out;
}

/// Maximal runs of frames with energy strictly below `threshold` lasting at
/// least `min_run` frames.
inline PauseIntervalSet detect_pauses_rms(const EnergySeries& energies, double threshold = 0.01,
                                          std::int64_t min_run = 18) {
  require(threshold > 0.0, "threshold must be positive");
  require(min_run >= 1, "min_run must be at least 1");
  PauseIntervalSet out;
  out.total_frames = energies.frame_count();
  std::int64_t run_start = -1;
  auto close_run = [&](std::int64_t end) {
    if (run_start >= 0 && end - run_start >= min_run)
      out.intervals.push_back({run_start, end - run_start});
    run_start = -1;
  };
  for (std::int64_t k = 0; k < out.total_frames; ++k) {
    if (energies.energies[k] < threshold) {
      if (run_start < 0) run_start = k;
    } else {
      close_run(k);
    }
  }
  close_run(out.total_frames);
  return out;
}

/// Boundary refinement by energy change rate. Leading frames whose step to
/// the next frame exceeds `slope_threshold` are trimmed from the start;
/// trailing frames whose step from the previous frame exceeds it are trimmed
/// from the end. Only differences inside the interval are inspected.
/// Intervals left shorter than `min_run` are dropped; nothing is merged.
inline PauseIntervalSet refine_pauses(const EnergySeries& energies, const PauseIntervalSet& pauses,
                                      double slope_threshold = 0.005, std::int64_t min_run = 18) {
  require(slope_threshold >= 0.0, "slope threshold must be non-negative");
  require(pauses.total_frames == energies.frame_count(),
          "pause set does not match the energy series length");
  pauses.validate();
  const auto& e = energies.energies;
  PauseIntervalSet out;
  out.total_frames = pauses.total_frames;
  for (const auto& iv : pauses.intervals) {
    std::int64_t first = iv.start_frame;
    std::int64_t last = iv.end_frame() - 1;
    while (first < last && std::abs(e[first + 1] - e[first]) > slope_threshold) ++first;
    while (last > first && std::abs(e[last] - e[last - 1]) > slope_threshold) --last;
    const std::int64_t length = last - first + 1;
    if (length >= min_run) out.intervals.push_back({first, length});
  }
  return out;
}

/// Gaps between consecutive word spans [start, end) with end exclusive.
inline PauseIntervalSet silence_between_words(
    std::span<const std::pair<std::int64_t, std::int64_t>> spans, std::int64_t total_frames = -1) {
  PauseIntervalSet out;
  std::int64_t prev_end = 0;
  for (std::size_t j = 0; j < spans.size(); ++j) {
    auto [start, end] = spans[j];
    require(start >= 0 && end >= start, "word span " + std::to_string(j) + " is malformed");
    require(j == 0 || start >= prev_end, "word spans must be ordered and non-overlapping");
    if (j > 0 && start > prev_end) out.intervals.push_back({prev_end, start - prev_end});
    prev_end = end;
  }
  out.total_frames = total_frames >= 0 ? total_frames : prev_end;
  require(out.total_frames >= prev_end, "word spans exceed total frames");
  return out;
}

}  // namespace pstts
