#pragma once

// Contracts for the external model calls (duration predictor, sentence
// embedder, semantic scorer, paraphraser, phonemizer) and their file-backed
// implementations. File-backed providers load once and are immutable, so a
// bundle may be shared across threads.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pstts/error.hpp"
#include "pstts/json_io.hpp"
#include "pstts/sequences.hpp"

namespace pstts {

// ---------------------------------------------------------------------------
// Contracts

struct DurationPrediction {
  double total_frames = 0.0;
  std::vector<double> per_token_frames;
};

class DurationProvider {
 public:
  virtual ~DurationProvider() = default;
  virtual DurationPrediction predict_duration(const TokenizedSequence& sequence) const = 0;
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::vector<double> embed_sentence(const std::string& text) const = 0;
};

class SemanticProvider {
 public:
  virtual ~SemanticProvider() = default;
  /// Score in [0, 1].
  virtual double semantic_score(const std::string& source, const std::string& candidate) const = 0;
};

struct ParaphraseContext {
  std::string source;                   // source-language sentence
  std::string stage = "iso";            // "iso" or "ps" stream
  std::span<const std::string> prior;   // paraphrases already produced, in order
};

struct Paraphrase {
  std::string id;
  std::string text;
};

class ParaphraseProvider {
 public:
  virtual ~ParaphraseProvider() = default;
  /// Next candidate after `context.prior`, or nullopt at end of stream.
  virtual std::optional<Paraphrase> next_paraphrase(const ParaphraseContext& context) const = 0;
};

class PhonemeProvider {
 public:
  virtual ~PhonemeProvider() = default;
  virtual std::vector<PhonemeId> phonemize(const std::string& text,
                                           const std::string& language) const = 0;
};

// ---------------------------------------------------------------------------
// Fixture keys

/// Trims and collapses ASCII whitespace runs to one space.
inline std::string normalize_whitespace(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (char c : text) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

/// 64-bit FNV-1a, hex encoded.
inline std::string content_hash(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string text_key(std::string_view text, std::string_view language = {}) {
  std::string material = normalize_whitespace(text);
  material.push_back('\x1f');
  material.append(language);
  return content_hash(material);
}

inline std::string phoneme_key(std::span<const PhonemeId> phonemes, std::string_view language) {
  std::string material = "phonemes:";
  for (PhonemeId id : phonemes) material += std::to_string(id) + ",";
  material.push_back('\x1f');
  material.append(language);
  return content_hash(material);
}

inline std::string pair_key(std::string_view source, std::string_view candidate) {
  return text_key(source) + ":" + text_key(candidate);
}

[[noreturn]] inline void fixture_miss(const std::string& what) {
  fail(ErrorCode::fixture_miss, what);
}

inline std::string quote_text(std::string_view text) {
  constexpr std::size_t kMax = 60;
  std::string t(text.substr(0, kMax));
  if (text.size() > kMax) t += "...";
  return "\"" + t + "\"";
}

// ---------------------------------------------------------------------------
// File-backed implementations

/// JSON lines: {"language", "phonemes": [ids] | "tokens": [blank-interleaved
/// ids], "per_token": [..], "total"?, "unit"?: "frames"|"seconds", "id"?}.
/// Seconds are converted to frames with ceil(s * 22050 / 256).
class FileDurationProvider final : public DurationProvider {
 public:
  explicit FileDurationProvider(const std::vector<json>& rows, const std::string& origin = "durations") {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& row = rows[i];
      const std::string where = origin + " line " + std::to_string(i + 1);
      const auto language = get_field<std::string>(row, "language", where);
      std::vector<PhonemeId> phonemes;
      std::size_t token_count = 0;
      if (row.contains("tokens")) {
        auto tokens = row.at("tokens").get<std::vector<PhonemeId>>();
        require(tokens.size() % 2 == 1, where + ": token list must have odd length");
        for (std::size_t t = 1; t < tokens.size(); t += 2) phonemes.push_back(tokens[t]);
        token_count = tokens.size();
      } else {
        phonemes = get_field<std::vector<PhonemeId>>(row, "phonemes", where);
        token_count = 2 * phonemes.size() + 1;
      }
      Entry e;
      e.label = row.value("id", std::string{});
      auto per_token = get_field<std::vector<double>>(row, "per_token", where);
      require(per_token.size() == token_count, where + ": per_token length " +
                                                   std::to_string(per_token.size()) +
                                                   " does not match " + std::to_string(token_count) +
                                                   " tokens");
      const bool seconds = row.value("unit", std::string{"frames"}) == "seconds";
      double sum = 0.0;
      for (double d : per_token) {
        require(std::isfinite(d) && d >= 0.0, where + ": durations must be finite and >= 0");
        double frames = seconds ? static_cast<double>(seconds_to_frames(d)) : d;
        e.prediction.per_token_frames.push_back(frames);
        sum += frames;
      }
      e.prediction.total_frames = sum;
      if (row.contains("total") && !seconds) {
        double total = row.at("total").get<double>();
        require(std::abs(total - sum) <= 1e-6, where + ": total does not equal sum of per_token");
      }
      entries_[phoneme_key(phonemes, language)] = std::move(e);
    }
  }

  static FileDurationProvider load(const std::filesystem::path& path) {
    return FileDurationProvider(read_json_lines(path), path.string());
  }

  DurationPrediction predict_duration(const TokenizedSequence& sequence) const override {
    const auto phonemes = sequence.phonemes();
    const auto key = phoneme_key(phonemes, sequence.language);
    auto it = entries_.find(key);
    if (it == entries_.end())
      fixture_miss("no duration fixture for sequence " + key + " (" + sequence.language + ", " +
                   std::to_string(phonemes.size()) + " phonemes)");
    require(it->second.prediction.per_token_frames.size() == sequence.token_ids.size(),
            "duration fixture " + it->second.label + " has the wrong token count");
    return it->second.prediction;
  }

 private:
  struct Entry {
    std::string label;
    DurationPrediction prediction;
  };
  std::unordered_map<std::string, Entry> entries_;
};

/// JSON lines: {"text", "vector": [..]}.
class FileEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit FileEmbeddingProvider(const std::vector<json>& rows, const std::string& origin = "embeddings") {
    std::optional<std::size_t> dim;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const std::string where = origin + " line " + std::to_string(i + 1);
      auto text = get_field<std::string>(rows[i], "text", where);
      auto vec = get_field<std::vector<double>>(rows[i], "vector", where);
      require(!vec.empty(), where + ": empty embedding");
      if (!dim) dim = vec.size();
      require(vec.size() == *dim, where + ": embedding dimension differs from earlier lines");
      vectors_[text_key(text)] = std::move(vec);
    }
  }

  static FileEmbeddingProvider load(const std::filesystem::path& path) {
    return FileEmbeddingProvider(read_json_lines(path), path.string());
  }

  std::vector<double> embed_sentence(const std::string& text) const override {
    auto it = vectors_.find(text_key(text));
    if (it == vectors_.end()) fixture_miss("no embedding fixture for " + quote_text(text));
    return it->second;
  }

 private:
  std::unordered_map<std::string, std::vector<double>> vectors_;
};

/// JSON lines: {"source", "candidate", "score"} with score in [0, 1].
class FileSemanticProvider final : public SemanticProvider {
 public:
  explicit FileSemanticProvider(const std::vector<json>& rows, const std::string& origin = "semantic") {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const std::string where = origin + " line " + std::to_string(i + 1);
      auto score = get_field<double>(rows[i], "score", where);
      require(std::isfinite(score) && score >= 0.0 && score <= 1.0,
              where + ": semantic score must lie in [0, 1]");
      scores_[pair_key(get_field<std::string>(rows[i], "source", where),
                       get_field<std::string>(rows[i], "candidate", where))] = score;
    }
  }

  static FileSemanticProvider load(const std::filesystem::path& path) {
    return FileSemanticProvider(read_json_lines(path), path.string());
  }

  double semantic_score(const std::string& source, const std::string& candidate) const override {
    auto it = scores_.find(pair_key(source, candidate));
    if (it == scores_.end())
      fixture_miss("no semantic score for " + quote_text(source) + " -> " + quote_text(candidate));
    return it->second;
  }

 private:
  std::unordered_map<std::string, double> scores_;
};

/// JSON lines: {"source", "stage"?: "iso"|"ps", "id"?, "text"}; each
/// (source, stage) stream is consumed in file order.
class FileParaphraseProvider final : public ParaphraseProvider {
 public:
  explicit FileParaphraseProvider(const std::vector<json>& rows, const std::string& origin = "paraphrases") {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const std::string where = origin + " line " + std::to_string(i + 1);
      const auto source = get_field<std::string>(rows[i], "source", where);
      const auto stage = rows[i].value("stage", std::string{"iso"});
      auto& stream = streams_[stream_key(source, stage)];
      Paraphrase p{rows[i].value("id", stage + "-" + std::to_string(stream.size())),
                   get_field<std::string>(rows[i], "text", where)};
      stream.push_back(std::move(p));
    }
  }

  static FileParaphraseProvider load(const std::filesystem::path& path) {
    return FileParaphraseProvider(read_json_lines(path), path.string());
  }

  std::optional<Paraphrase> next_paraphrase(const ParaphraseContext& context) const override {
    auto it = streams_.find(stream_key(context.source, context.stage));
    if (it == streams_.end() || context.prior.size() >= it->second.size()) return std::nullopt;
    return it->second[context.prior.size()];
  }

  std::size_t stream_length(const std::string& source, const std::string& stage) const {
    auto it = streams_.find(stream_key(source, stage));
    return it == streams_.end() ? 0 : it->second.size();
  }

 private:
  static std::string stream_key(const std::string& source, const std::string& stage) {
    return stage + ":" + text_key(source);
  }
  std::unordered_map<std::string, std::vector<Paraphrase>> streams_;
};

/// JSON lines: {"text", "language", "phonemes": [ids]}.
class FilePhonemeProvider final : public PhonemeProvider {
 public:
  explicit FilePhonemeProvider(const std::vector<json>& rows, const std::string& origin = "phonemes") {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const std::string where = origin + " line " + std::to_string(i + 1);
      sequences_[text_key(get_field<std::string>(rows[i], "text", where),
                          get_field<std::string>(rows[i], "language", where))] =
          get_field<std::vector<PhonemeId>>(rows[i], "phonemes", where);
    }
  }

  static FilePhonemeProvider load(const std::filesystem::path& path) {
    return FilePhonemeProvider(read_json_lines(path), path.string());
  }

  std::vector<PhonemeId> phonemize(const std::string& text, const std::string& language) const override {
    if (normalize_whitespace(text).empty()) return {};
    auto it = sequences_.find(text_key(text, language));
    if (it == sequences_.end())
      fixture_miss("no phoneme fixture for " + quote_text(text) + " (" + language + ")");
    return it->second;
  }

 private:
  std::unordered_map<std::string, std::vector<PhonemeId>> sequences_;
};

/// Non-owning view of the five provider contracts.
struct ProviderRefs {
  const DurationProvider* durations = nullptr;
  const EmbeddingProvider* embedder = nullptr;
  const SemanticProvider* semantic = nullptr;  // optional; PS-Comet only
  const ParaphraseProvider* paraphraser = nullptr;
  const PhonemeProvider* phonemizer = nullptr;
};

/// Owns file-backed providers listed in a manifest:
/// {"phonemes", "durations", "embeddings", "paraphrases", "semantic"?}, with
/// paths relative to the manifest.
class ProviderBundle {
 public:
  static ProviderBundle load(const std::filesystem::path& manifest_path) {
    const json manifest = read_json_file(manifest_path);
    const auto base = manifest_path.parent_path();
    const std::string origin = manifest_path.string();
    auto path_of = [&](const char* key) { return base / get_field<std::string>(manifest, key, origin); };
    ProviderBundle b;
    b.phonemes_ = std::make_shared<FilePhonemeProvider>(FilePhonemeProvider::load(path_of("phonemes")));
    b.durations_ = std::make_shared<FileDurationProvider>(FileDurationProvider::load(path_of("durations")));
    b.embeddings_ =
        std::make_shared<FileEmbeddingProvider>(FileEmbeddingProvider::load(path_of("embeddings")));
    b.paraphrases_ =
        std::make_shared<FileParaphraseProvider>(FileParaphraseProvider::load(path_of("paraphrases")));
    if (manifest.contains("semantic") && !manifest.at("semantic").is_null())
      b.semantic_ = std::make_shared<FileSemanticProvider>(FileSemanticProvider::load(path_of("semantic")));
    return b;
  }

  ProviderRefs refs() const {
    return {durations_.get(), embeddings_.get(), semantic_.get(), paraphrases_.get(), phonemes_.get()};
  }

  bool has_semantic() const noexcept { return semantic_ != nullptr; }
  const FileParaphraseProvider& paraphrases() const { return *paraphrases_; }

 private:
  std::shared_ptr<const FilePhonemeProvider> phonemes_;
  std::shared_ptr<const FileDurationProvider> durations_;
  std::shared_ptr<const FileEmbeddingProvider> embeddings_;
  std::shared_ptr<const FileParaphraseProvider> paraphrases_;
  std::shared_ptr<const FileSemanticProvider> semantic_;
};

}  // namespace pstts
