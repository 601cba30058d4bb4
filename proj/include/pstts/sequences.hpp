#pragma once

// Phoneme alphabets and the blank-interleaved / duration-expanded sequence
// representations consumed by pause alignment, isochrony and DTW matching.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pstts/error.hpp"
#include "pstts/json_io.hpp"

namespace pstts {

using PhonemeId = std::int32_t;

struct PhonemeEntry {
  PhonemeId id = 0;
  std::string symbol;
  std::string language;
  bool is_vowel = false;
};

class PhonemeAlphabet {
 public:
  PhonemeAlphabet() = default;

  /// Validates: ids unique and contiguous from 0, blank/null distinct
  /// non-vowel entries, symbols unique per language.
  PhonemeAlphabet(std::vector<PhonemeEntry> entries, PhonemeId blank_id, PhonemeId null_id)
      : blank_id_(blank_id), null_id_(null_id) {
    entries_.resize(entries.size());
    std::vector<bool> seen(entries.size(), false);
    for (auto& e : entries) {
      require(e.id >= 0 && static_cast<std::size_t>(e.id) < entries.size(),
              "alphabet ids must be contiguous from 0 (bad id " + std::to_string(e.id) + ")");
      require(!seen[e.id], "duplicate alphabet id " + std::to_string(e.id));
      seen[e.id] = true;
      auto key = std::make_pair(e.language, e.symbol);
      require(!by_symbol_.contains(key),
              "duplicate symbol \"" + e.symbol + "\" in language \"" + e.language + "\"");
      by_symbol_.emplace(std::move(key), e.id);
      entries_[e.id] = std::move(e);
    }
    require(blank_id != null_id, "blank_id and null_id must differ");
    require(contains(blank_id), "blank_id not in alphabet");
    require(contains(null_id), "null_id not in alphabet");
    require(!entries_[blank_id].is_vowel, "blank entry must not be a vowel");
    require(!entries_[null_id].is_vowel, "null entry must not be a vowel");
  }

  static PhonemeAlphabet from_json(const json& j, const std::string& origin = "alphabet") {
    const json& list = j.contains("entries") ? j.at("entries") : j.at("phonemes");
    require(list.is_array(), origin + ": entries must be a list");
    std::vector<PhonemeEntry> entries;
    for (const auto& row : list) {
      entries.push_back({get_field<PhonemeId>(row, "id", origin),
                         get_field<std::string>(row, "symbol", origin),
                         get_field<std::string>(row, "language", origin),
                         get_field<bool>(row, "is_vowel", origin)});
    }
    return PhonemeAlphabet(std::move(entries), get_field<PhonemeId>(j, "blank_id", origin),
                           get_field<PhonemeId>(j, "null_id", origin));
  }

  static PhonemeAlphabet load(const std::filesystem::path& path) {
    return from_json(read_json_file(path), path.string());
  }

  json to_json() const {
    json list = json::array();
    for (const auto& e : entries_)
      list.push_back({{"id", e.id}, {"symbol", e.symbol}, {"language", e.language},
                      {"is_vowel", e.is_vowel}});
    return {{"entries", list}, {"blank_id", blank_id_}, {"null_id", null_id_}};
  }

  PhonemeId blank_id() const noexcept { return blank_id_; }
  PhonemeId null_id() const noexcept { return null_id_; }
  std::size_t size() const noexcept { return entries_.size(); }
  std::span<const PhonemeEntry> entries() const noexcept { return entries_; }

  bool contains(PhonemeId id) const noexcept {
    return id >= 0 && static_cast<std::size_t>(id) < entries_.size();
  }

  const PhonemeEntry& at(PhonemeId id) const {
    if (!contains(id)) fail(ErrorCode::unknown_phoneme, "id " + std::to_string(id));
    return entries_[id];
  }

  bool is_vowel(PhonemeId id) const { return at(id).is_vowel; }

  std::optional<PhonemeId> find(const std::string& language, const std::string& symbol) const {
    auto it = by_symbol_.find({language, symbol});
    if (it == by_symbol_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::vector<PhonemeEntry> entries_;
  std::map<std::pair<std::string, std::string>, PhonemeId> by_symbol_;
  PhonemeId blank_id_ = 0;
  PhonemeId null_id_ = 1;
};

/// {b, s1, b, s2, ..., b, sN, b}: blanks on even positions.
struct TokenizedSequence {
  std::vector<PhonemeId> token_ids;
  std::string language;

  std::size_t phoneme_count() const noexcept { return token_ids.size() / 2; }

  /// The phonemes at odd positions, i.e. the sequence before tokenization.
  std::vector<PhonemeId> phonemes() const {
    std::vector<PhonemeId> out;
    out.reserve(phoneme_count());
    for (std::size_t i = 1; i < token_ids.size(); i += 2) out.push_back(token_ids[i]);
    return out;
  }

  friend bool operator==(const TokenizedSequence&, const TokenizedSequence&) = default;
};

struct DurationedSequence {
  TokenizedSequence base;
  std::vector<std::int64_t> durations;  // frames, one per token

  std::int64_t total_frames() const {
    return std::accumulate(durations.begin(), durations.end(), std::int64_t{0});
  }
};

/// One alphabet id per acoustic frame.
struct ExpandedSequence {
  std::vector<PhonemeId> frame_ids;

  std::size_t size() const noexcept { return frame_ids.size(); }
  bool empty() const noexcept { return frame_ids.empty(); }
  friend bool operator==(const ExpandedSequence&, const ExpandedSequence&) = default;
};

inline TokenizedSequence tokenize_with_blanks(std::span<const PhonemeId> phoneme_ids,
                                              const PhonemeAlphabet& alphabet,
                                              std::string language = {}) {
  TokenizedSequence out;
  out.language = std::move(language);
  out.token_ids.reserve(2 * phoneme_ids.size() + 1);
  out.token_ids.push_back(alphabet.blank_id());
  for (PhonemeId id : phoneme_ids) {
    if (!alphabet.contains(id)) fail(ErrorCode::unknown_phoneme, "id " + std::to_string(id));
    require(id != alphabet.blank_id() && id != alphabet.null_id(),
            "phoneme input may not contain the blank or null id");
    out.token_ids.push_back(id);
    out.token_ids.push_back(alphabet.blank_id());
  }
  return out;
}

inline ExpandedSequence expand_with_durations(const DurationedSequence& seq) {
  require(seq.durations.size() == seq.base.token_ids.size(),
          "durations length " + std::to_string(seq.durations.size()) +
              " does not match token count " + std::to_string(seq.base.token_ids.size()));
  ExpandedSequence out;
  for (std::size_t i = 0; i < seq.durations.size(); ++i) {
    require(seq.durations[i] >= 0, "negative duration at token " + std::to_string(i));
    out.frame_ids.insert(out.frame_ids.end(), static_cast<std::size_t>(seq.durations[i]),
                         seq.base.token_ids[i]);
  }
  return out;
}

inline ExpandedSequence mask_non_vowels(const ExpandedSequence& seq,
                                        const PhonemeAlphabet& alphabet) {
  ExpandedSequence out;
  out.frame_ids.reserve(seq.size());
  for (PhonemeId id : seq.frame_ids)
    out.frame_ids.push_back(alphabet.is_vowel(id) ? id : alphabet.null_id());
  return out;
}

/// Converts a predicted duration in seconds to hop-sized frames (rounded up).
inline std::int64_t seconds_to_frames(double seconds, double sample_rate = 22050.0,
                                      int hop = 256) {
  require(seconds >= 0.0, "negative duration");
  return static_cast<std::int64_t>(std::ceil(seconds * sample_rate / hop - 1e-9));
}

}  // namespace pstts
