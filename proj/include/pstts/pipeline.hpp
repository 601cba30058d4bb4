#pragma once

// End-to-end wiring: pause detection -> isochrony loop -> PS / PS-Comet
// selection, driven by a single JSON configuration document.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pstts/audio.hpp"
#include "pstts/ctc.hpp"
#include "pstts/dtw.hpp"
#include "pstts/error.hpp"
#include "pstts/isochrony.hpp"
#include "pstts/json_io.hpp"
#include "pstts/pauses.hpp"
#include "pstts/providers.hpp"
#include "pstts/selection.hpp"
#include "pstts/sequences.hpp"
#include "pstts/vowel_space.hpp"

namespace pstts {

namespace fs = std::filesystem;

/// Every configurable field with its default. CLI flags are generated from
/// the leaves of this document (e.g. --iso.window_frames).
inline json default_config() {
  return json::parse(R"({
    "paths": {
      "audio": "",
      "emissions": "",
      "pauses": "",
      "alphabet": "",
      "fixtures": "",
      "distance_matrix": "",
      "vowel_corpus": ""
    },
    "source": {"text": "", "language": ""},
    "target": {"text": "", "language": ""},
    "pauses": {
      "method": "rms",
      "threshold": 0.01,
      "min_run": 18,
      "slope_threshold": 0.005,
      "allow_resample": false,
      "ctc_targets": [],
      "ctc_separator": -1
    },
    "iso": {"window_frames": 26, "sim_threshold": 0.75, "max_iterations": 60},
    "dtw": {"band_radius": "auto"},
    "comet": {"alpha": 1.6, "beta": 0.4, "raw_dtw": false},
    "vowel_map": {"k": 5, "null_cost": "mean"},
    "selection": {"mode": "ps", "candidates": 60},
    "output_dir": "out",
    "seed": 0
  })");
}

struct PipelineConfig {
  struct Paths {
    fs::path audio, emissions, pauses, alphabet, fixtures, distance_matrix, vowel_corpus;
  } paths;
  std::string source_text, source_language;
  std::string target_text, target_language;

  std::string pause_method = "rms";
  double pause_threshold = 0.01;
  std::int64_t min_run = 18;
  double slope_threshold = 0.005;
  bool allow_resample = false;
  std::vector<int> ctc_targets;
  std::optional<int> ctc_separator;

  IsoParams iso;
  DtwParams dtw;
  CometParams comet;
  std::size_t vowel_k = 5;
  NullCostPolicy null_cost;
  SelectionMode mode = SelectionMode::ps;
  std::size_t ps_candidates = 60;
  fs::path output_dir = "out";
  std::uint64_t seed = 0;

  /// Reads a merged configuration document (defaults already applied).
  static PipelineConfig from_json(const json& j) {
    PipelineConfig c;
    try {
      const auto& p = j.at("paths");
      c.paths = {p.at("audio").get<std::string>(),           p.at("emissions").get<std::string>(),
                 p.at("pauses").get<std::string>(),          p.at("alphabet").get<std::string>(),
                 p.at("fixtures").get<std::string>(),        p.at("distance_matrix").get<std::string>(),
                 p.at("vowel_corpus").get<std::string>()};
      c.source_text = j.at("source").at("text").get<std::string>();
      c.source_language = j.at("source").at("language").get<std::string>();
      c.target_text = j.at("target").at("text").get<std::string>();
      c.target_language = j.at("target").at("language").get<std::string>();
      const auto& pz = j.at("pauses");
      c.pause_method = pz.at("method").get<std::string>();
      c.pause_threshold = pz.at("threshold").get<double>();
      c.min_run = pz.at("min_run").get<std::int64_t>();
      c.slope_threshold = pz.at("slope_threshold").get<double>();
      c.allow_resample = pz.at("allow_resample").get<bool>();
      c.ctc_targets = pz.at("ctc_targets").get<std::vector<int>>();
      if (const int sep = pz.at("ctc_separator").get<int>(); sep >= 0) c.ctc_separator = sep;
      const auto& iso = j.at("iso");
      c.iso = {iso.at("window_frames").get<std::int64_t>(), iso.at("sim_threshold").get<double>(),
               iso.at("max_iterations").get<std::int64_t>()};
      const auto& band = j.at("dtw").at("band_radius");
      c.dtw.band = BandRadius::parse(band.is_string() ? band.get<std::string>() : band.dump());
      const auto& comet = j.at("comet");
      c.comet = {comet.at("alpha").get<double>(), comet.at("beta").get<double>(),
                 comet.at("raw_dtw").get<bool>()};
      const auto& vm = j.at("vowel_map");
      c.vowel_k = vm.at("k").get<std::size_t>();
      const auto& nc = vm.at("null_cost");
      c.null_cost = NullCostPolicy::parse(nc.is_string() ? nc.get<std::string>() : nc.dump());
      c.mode = parse_selection_mode(j.at("selection").at("mode").get<std::string>());
      c.ps_candidates = j.at("selection").at("candidates").get<std::size_t>();
      c.output_dir = j.at("output_dir").get<std::string>();
      c.seed = j.at("seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
      fail(ErrorCode::invalid_input, std::string("config: ") + e.what());
    }
    require(c.pause_method == "rms" || c.pause_method == "ctc",
            "pauses.method must be rms or ctc");
    c.iso.validate();
    c.comet.validate();
    require(c.vowel_k >= 1, "vowel_map.k must be >= 1");
    require(c.ps_candidates >= 1, "selection.candidates must be >= 1");
    return c;
  }
};

/// Overlays `patch` onto `base`, refusing keys the defaults do not know.
inline void merge_config(json& base, const json& patch, const std::string& prefix = "") {
  require(patch.is_object(), "config" + (prefix.empty() ? "" : " field " + prefix) +
                                 " must be an object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string name = prefix.empty() ? it.key() : prefix + "." + it.key();
    require(base.contains(it.key()), "unknown config field " + name);
    auto& slot = base[it.key()];
    if (slot.is_object())
      merge_config(slot, it.value(), name);
    else
      slot = it.value();
  }
}

/// Defaults overlaid with the config file. Relative paths inside the file are
/// resolved against the file's directory.
inline json load_config_document(const fs::path& path) {
  json doc = default_config();
  json file = read_json_file(path);
  if (file.contains("paths") && file["paths"].is_object()) {
    const auto base = path.parent_path();
    for (auto& [key, value] : file["paths"].items())
      if (value.is_string() && !value.get<std::string>().empty() &&
          fs::path(value.get<std::string>()).is_relative())
        value = (base / value.get<std::string>()).lexically_normal().string();
  }
  if (file.contains("output_dir") && file["output_dir"].is_string() &&
      fs::path(file["output_dir"].get<std::string>()).is_relative())
    file["output_dir"] = (path.parent_path() / file["output_dir"].get<std::string>())
                             .lexically_normal()
                             .string();
  merge_config(doc, file);
  return doc;
}

// ---------------------------------------------------------------------------
// Stage: pause detection

struct PauseStageResult {
  std::string method;
  PauseIntervalSet raw;
  PauseIntervalSet refined;  // SP'; equals raw for CTC
  std::int64_t effective_frames = 0;
};

inline PauseStageResult run_pause_stage(const PipelineConfig& cfg) {
  PauseStageResult out;
  out.method = cfg.pause_method;
  if (cfg.pause_method == "rms") {
    require(!cfg.paths.audio.empty(), "rms pause detection needs paths.audio");
    const auto audio = read_wav(cfg.paths.audio);
    FramingParams framing;
    framing.allow_resample = cfg.allow_resample;
    const auto energies = frame_energies(audio, framing);
    out.raw = detect_pauses_rms(energies, cfg.pause_threshold, cfg.min_run);
    out.refined = refine_pauses(energies, out.raw, cfg.slope_threshold, cfg.min_run);
  } else {
    require(!cfg.paths.emissions.empty(), "ctc pause detection needs paths.emissions");
    auto fixture = load_emissions(cfg.paths.emissions);
    const auto targets = cfg.ctc_targets.empty() ? fixture.targets : cfg.ctc_targets;
    const auto separator = cfg.ctc_separator ? cfg.ctc_separator : fixture.separator;
    const auto alignment = ctc_viterbi_align(fixture.emissions, targets);
    const auto words = word_spans(alignment, targets, separator);
    out.raw = silence_between_words(words, static_cast<std::int64_t>(fixture.emissions.frames()));
    out.refined = out.raw;
  }
  out.effective_frames = effective_frames(out.refined.total_frames, out.refined);
  return out;
}

inline json to_json(const PauseStageResult& r) {
  json j = to_json(r.refined);
  j["method"] = r.method;
  j["effective_frames"] = r.effective_frames;
  j["raw_intervals"] = to_json(r.raw)["intervals"];
  return j;
}

/// Pause set from a previously written pauses file (report object or list).
inline PauseStageResult load_pause_stage(const fs::path& path) {
  const json j = read_json_file(path);
  PauseStageResult out;
  out.refined = pause_set_from_json(j, -1, path.string());
  out.raw = out.refined;
  out.method = j.is_object() ? j.value("method", std::string{"file"}) : "file";
  out.effective_frames = effective_frames(out.refined.total_frames, out.refined);
  return out;
}

// ---------------------------------------------------------------------------
// Stage: isochrony

inline Candidate make_source(const PipelineConfig& cfg, const PhonemeAlphabet& alphabet,
                             const ProviderRefs& providers, bool with_embedding) {
  try {
    return make_candidate(0, "source", cfg.source_text, cfg.source_language, alphabet, providers,
                          with_embedding);
  } catch (const ProviderError& e) {
    throw Error(e.cause(), std::string("source sentence: ") + e.what());
  }
}

struct IsoStageResult {
  IsoResult result;
  double source_predicted_frames = 0.0;
  std::int64_t effective_frames = 0;
};

inline IsoStageResult run_iso_stage(const PipelineConfig& cfg, std::int64_t effective,
                                    const PhonemeAlphabet& alphabet, const ProviderRefs& providers) {
  const auto source = make_source(cfg, alphabet, providers, true);
  IsoSource iso_source{cfg.source_text, effective, source.embedding, source.sequence.base};
  auto initial = make_candidate(0, "initial", cfg.target_text, cfg.target_language, alphabet,
                                providers, true);
  IsoStageResult out;
  out.source_predicted_frames = source.predicted_frames;
  out.effective_frames = effective;
  out.result = iso_select(iso_source, std::move(initial), cfg.target_language, alphabet, providers,
                          source.predicted_frames, cfg.iso);
  return out;
}

inline json to_json(const IsoStageResult& r, const IsoParams& params) {
  json trail = json::array();
  for (std::size_t i = 0; i < r.result.trail.size(); ++i) {
    json row = to_json(r.result.trail[i]);
    row["id"] = r.result.evaluated[i].id;
    row["text"] = r.result.evaluated[i].text;
    row["predicted_frames"] = sig9(r.result.evaluated[i].predicted_frames);
    trail.push_back(std::move(row));
  }
  json chosen = to_json(r.result.evaluation);
  chosen["id"] = r.result.chosen.id;
  chosen["text"] = r.result.chosen.text;
  return {{"effective_frames", r.effective_frames},
          {"source_predicted_frames", sig9(r.source_predicted_frames)},
          {"speaking_rate", sig9(r.result.speaking_rate)},
          {"params",
           {{"window_frames", params.window_frames},
            {"sim_threshold", sig9(params.sim_threshold)},
            {"max_iterations", params.max_iterations}}},
          {"fallback", r.result.fallback},
          {"chosen", chosen},
          {"trail", trail}};
}

// ---------------------------------------------------------------------------
// Stage: PS / PS-Comet selection

struct VowelMapSource {
  VowelDistanceMatrix matrix;
  bool built = false;  // built from a corpus in this run
  VowelMapOptions options;
};

inline VowelMapSource resolve_vowel_map(const PipelineConfig& cfg) {
  VowelMapSource out;
  if (!cfg.paths.distance_matrix.empty()) {
    out.matrix = load_vowel_map(cfg.paths.distance_matrix);
    return out;
  }
  require(!cfg.paths.vowel_corpus.empty(),
          "selection needs paths.distance_matrix or paths.vowel_corpus");
  out.options.k = cfg.vowel_k;
  out.options.seed = cfg.seed;
  out.options.null_cost = cfg.null_cost;
  out.options.source_language = cfg.source_language;
  out.options.target_language = cfg.target_language;
  out.matrix = build_vowel_map(VowelVectorCorpus::load(cfg.paths.vowel_corpus), out.options);
  out.built = true;
  return out;
}

struct SelectStageResult {
  SelectionReport report;
  std::vector<Candidate> candidates;
};

inline SelectStageResult run_select_stage(const PipelineConfig& cfg, const PhonemeAlphabet& alphabet,
                                          const ProviderRefs& providers,
                                          const VowelDistanceMatrix& matrix) {
  const VowelCostModel costs(matrix, alphabet);
  const auto source = make_source(cfg, alphabet, providers, false);
  const auto source_frames = mask_non_vowels(expand_with_durations(source.sequence), alphabet);

  SelectStageResult out;
  std::vector<std::string> prior;
  while (out.candidates.size() < cfg.ps_candidates) {
    const auto next = providers.paraphraser->next_paraphrase({cfg.source_text, "ps", prior});
    if (!next) break;
    prior.push_back(next->text);
    out.candidates.push_back(make_candidate(out.candidates.size(), next->id, next->text,
                                            cfg.target_language, alphabet, providers, false));
  }
  require(!out.candidates.empty(), "no PS candidates in the paraphrase stream for the source");

  std::vector<ExpandedSequence> expanded;
  for (const auto& c : out.candidates)
    expanded.push_back(mask_non_vowels(expand_with_durations(c.sequence), alphabet));
  const auto scores = candidate_dtw_scores(source_frames, expanded, costs, cfg.dtw);

  if (cfg.mode == SelectionMode::ps_comet) {
    require(providers.semantic != nullptr, "ps-comet selection needs semantic fixtures");
    std::vector<double> semantic;
    for (auto& c : out.candidates) {
      try {
        c.semantic_score = providers.semantic->semantic_score(cfg.source_text, c.text);
      } catch (const Error& e) {
        throw ProviderError(c.index, e.code(), e.what());
      }
      semantic.push_back(*c.semantic_score);
    }
    out.report = ps_comet_select(scores, semantic, cfg.comet);
  } else {
    out.report = ps_report(scores);
  }
  for (std::size_t i = 0; i < out.candidates.size(); ++i) {
    out.report.rows[i].id = out.candidates[i].id;
    out.report.rows[i].text = out.candidates[i].text;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Preflight

/// Issues every provider lookup a full run could make and reports all
/// fixture misses at once, before any stage runs.
inline void preflight(const PipelineConfig& cfg, const ProviderBundle& bundle, bool need_iso,
                      bool need_select) {
  std::vector<std::string> misses;
  const auto providers = bundle.refs();
  auto probe = [&](const std::string& what, auto&& call) {
    try {
      call();
      return true;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::fixture_miss) throw;
      misses.push_back(what + ": " + e.what());
      return false;
    }
  };
  auto probe_sentence = [&](const std::string& label, const std::string& text,
                            const std::string& language, bool embedding, bool semantic) {
    std::vector<PhonemeId> phonemes;
    if (probe(label, [&] { phonemes = providers.phonemizer->phonemize(text, language); })) {
      TokenizedSequence seq{{}, language};
      // Duration fixtures are keyed by phonemes, so blank ids do not matter here.
      seq.token_ids.assign(2 * phonemes.size() + 1, 0);
      for (std::size_t i = 0; i < phonemes.size(); ++i) seq.token_ids[2 * i + 1] = phonemes[i];
      probe(label, [&] { providers.durations->predict_duration(seq); });
    }
    if (embedding) probe(label, [&] { providers.embedder->embed_sentence(text); });
    if (semantic) probe(label, [&] { providers.semantic->semantic_score(cfg.source_text, text); });
  };

  require(!cfg.source_text.empty() && !cfg.source_language.empty(),
          "source.text and source.language are required");
  probe_sentence("source", cfg.source_text, cfg.source_language, need_iso, false);

  const bool comet = cfg.mode == SelectionMode::ps_comet && need_select;
  if (comet && !bundle.has_semantic())
    misses.push_back("ps-comet mode: fixture manifest lists no semantic scores");

  if (need_iso) {
    require(!cfg.target_text.empty() && !cfg.target_language.empty(),
            "target.text and target.language are required");
    probe_sentence("initial target", cfg.target_text, cfg.target_language, true, false);
    const auto n = std::min<std::size_t>(bundle.paraphrases().stream_length(cfg.source_text, "iso"),
                                         static_cast<std::size_t>(cfg.iso.max_iterations));
    std::vector<std::string> prior;
    for (std::size_t i = 0; i < n; ++i) {
      const auto p = providers.paraphraser->next_paraphrase({cfg.source_text, "iso", prior});
      prior.push_back(p->text);
      probe_sentence("iso candidate " + std::to_string(i + 1), p->text, cfg.target_language, true,
                     false);
    }
  }
  if (need_select) {
    require(!cfg.target_language.empty(), "target.language is required");
    const auto n = std::min(bundle.paraphrases().stream_length(cfg.source_text, "ps"),
                            cfg.ps_candidates);
    if (n == 0) misses.push_back("no \"ps\" paraphrase stream for the source sentence");
    std::vector<std::string> prior;
    for (std::size_t i = 0; i < n; ++i) {
      const auto p = providers.paraphraser->next_paraphrase({cfg.source_text, "ps", prior});
      prior.push_back(p->text);
      probe_sentence("ps candidate " + std::to_string(i), p->text, cfg.target_language, false,
                     comet && bundle.has_semantic());
    }
  }

  if (!misses.empty()) {
    std::string msg = std::to_string(misses.size()) + " fixture miss(es) found in preflight:";
    for (const auto& m : misses) msg += "\n  " + m;
    fail(ErrorCode::fixture_miss, msg);
  }
}

inline void require_file(const fs::path& path, const std::string& field) {
  require(!path.empty(), field + " is required");
  if (!fs::exists(path)) fail(ErrorCode::io_error, field + ": " + path.string() + " does not exist");
}

inline void preflight_paths(const PipelineConfig& cfg, bool need_pauses, bool need_select) {
  require_file(cfg.paths.alphabet, "paths.alphabet");
  require_file(cfg.paths.fixtures, "paths.fixtures");
  if (need_pauses) {
    if (!cfg.paths.pauses.empty())
      require_file(cfg.paths.pauses, "paths.pauses");
    else if (cfg.pause_method == "rms")
      require_file(cfg.paths.audio, "paths.audio");
    else
      require_file(cfg.paths.emissions, "paths.emissions");
  }
  if (need_select) {
    if (!cfg.paths.distance_matrix.empty())
      require_file(cfg.paths.distance_matrix, "paths.distance_matrix");
    else
      require_file(cfg.paths.vowel_corpus, "paths.vowel_corpus");
  }
}

// ---------------------------------------------------------------------------
// Full run

struct PipelineOutputs {
  PauseStageResult pauses;
  IsoStageResult iso;
  SelectStageResult selection;
  std::vector<fs::path> written;
};

namespace detail {
template <typename Fn>
auto in_stage(const std::string& stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ProviderError& e) {
    throw ProviderError(e.candidate_index(), e.cause(), "stage " + stage + ": " + e.what());
  } catch (const Error& e) {
    throw Error(e.code(), "stage " + stage + ": " + e.what());
  }
}
}  // namespace detail

inline PauseStageResult pause_stage_for(const PipelineConfig& cfg) {
  return cfg.paths.pauses.empty() ? run_pause_stage(cfg) : load_pause_stage(cfg.paths.pauses);
}

/// Runs pauses -> ISO -> PS/PS-Comet and writes every stage artifact into
/// cfg.output_dir. Outputs depend only on inputs and the seed.
inline PipelineOutputs run_pipeline(const PipelineConfig& cfg) {
  preflight_paths(cfg, true, true);
  const auto alphabet = PhonemeAlphabet::load(cfg.paths.alphabet);
  const auto bundle = ProviderBundle::load(cfg.paths.fixtures);
  preflight(cfg, bundle, true, true);
  const auto providers = bundle.refs();

  PipelineOutputs out;
  out.pauses = detail::in_stage("pauses", [&] { return pause_stage_for(cfg); });
  out.iso = detail::in_stage("iso", [&] {
    return run_iso_stage(cfg, out.pauses.effective_frames, alphabet, providers);
  });
  const auto vowel_map = detail::in_stage("vowel-map", [&] { return resolve_vowel_map(cfg); });
  out.selection = detail::in_stage("select", [&] {
    return run_select_stage(cfg, alphabet, providers, vowel_map.matrix);
  });

  auto write = [&](const fs::path& name, const json& j) {
    write_text_file(cfg.output_dir / name, dump_report(j));
    out.written.push_back(cfg.output_dir / name);
  };
  write("pauses.json", to_json(out.pauses));
  write("iso_report.json", to_json(out.iso, cfg.iso));
  write("selection_report.json", to_json(out.selection.report));
  if (vowel_map.built) {
    save_vowel_map(cfg.output_dir / "vowel_map.csv", vowel_map.matrix, vowel_map.options);
    out.written.push_back(cfg.output_dir / "vowel_map.csv");
    out.written.push_back(cfg.output_dir / "vowel_map.json");
  }
  return out;
}

}  // namespace pstts
