// pstts: command-line front end for pause detection, isochrony selection,
// vowel-map construction and PS / PS-Comet candidate selection.
//
//   pstts detect-pauses --config run.json [--out pauses.json]
//   pstts iso --config run.json
//   pstts build-vowel-map --corpus vowels.jsonl --k 5 --seed 0 --out map.csv
//   pstts select --config run.json --mode ps-comet
//   pstts run-pipeline --config run.json
//   pstts diagnose-correlation --input selection_report.json
//
// Every field of the JSON configuration can be overridden with a flag of the
// same dotted name, e.g. --iso.window_frames 30 or --dtw.band_radius unbounded.

#include <cstdio>
#include <sstream>
#include <exception>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pstts/pstts.hpp"

namespace {

using pstts::json;
using pstts::require;
namespace fs = std::filesystem;

/// Collects dotted-name overrides for every leaf of the default config.
class ConfigFlags {
 public:
  void attach(CLI::App* app) {
    add_leaves(app, pstts::default_config(), "");
    app->add_option("--config", config_path_, "JSON configuration file");
  }

  void set(const std::string& dotted, const std::string& value) { values_[dotted] = value; }

  json document() const {
    json doc = config_path_.empty() ? pstts::default_config()
                                    : pstts::load_config_document(config_path_);
    const json defaults = pstts::default_config();
    for (const auto& [dotted, raw] : values_) {
      if (raw.empty() && !explicit_empty_.contains(dotted)) continue;
      const json::json_pointer ptr("/" + replace_dots(dotted));
      doc[ptr] = coerce(defaults[ptr], raw, dotted);
    }
    return doc;
  }

  pstts::PipelineConfig config() const { return pstts::PipelineConfig::from_json(document()); }

 private:
  static std::string replace_dots(std::string s) {
    for (char& c : s)
      if (c == '.') c = '/';
    return s;
  }

  static json coerce(const json& like, const std::string& raw, const std::string& name) {
    if (like.is_string()) return raw;
    if (like.is_array()) {
      if (!raw.empty() && raw.front() == '[') return pstts::parse_json(raw, "--" + name);
      json list = json::array();
      std::stringstream ss(raw);
      std::string item;
      while (std::getline(ss, item, ','))
        if (!item.empty()) list.push_back(pstts::parse_json(item, "--" + name));
      return list;
    }
    return pstts::parse_json(raw, "--" + name);
  }

  void add_leaves(CLI::App* app, const json& node, const std::string& prefix) {
    for (auto it = node.begin(); it != node.end(); ++it) {
      const std::string name = prefix.empty() ? it.key() : prefix + "." + it.key();
      if (it.value().is_object()) {
        add_leaves(app, it.value(), name);
        continue;
      }
      auto* opt = app->add_option_function<std::string>(
          "--" + name, [this, name](const std::string& v) {
            values_[name] = v;
            if (v.empty()) explicit_empty_[name] = true;
          },
          "config field " + name + " (default " + it.value().dump() + ")");
      opt->group("Config overrides");
    }
  }

  std::string config_path_;
  std::map<std::string, std::string> values_;
  std::map<std::string, bool> explicit_empty_;
};

void print_json(const json& j) { std::cout << pstts::dump_report(j); }

int cmd_detect_pauses(const pstts::PipelineConfig& cfg, const std::string& out_path) {
  auto result = pstts::run_pause_stage(cfg);
  const fs::path out = out_path.empty() ? cfg.output_dir / "pauses.json" : fs::path(out_path);
  pstts::write_text_file(out, pstts::dump_report(pstts::to_json(result)));
  std::cout << "K=" << result.refined.total_frames << " K'=" << result.effective_frames
            << " intervals=" << result.refined.intervals.size() << " -> " << out.string() << "\n";
  return 0;
}

int cmd_iso(const pstts::PipelineConfig& cfg) {
  pstts::preflight_paths(cfg, true, false);
  const auto alphabet = pstts::PhonemeAlphabet::load(cfg.paths.alphabet);
  const auto bundle = pstts::ProviderBundle::load(cfg.paths.fixtures);
  pstts::preflight(cfg, bundle, true, false);
  const auto pauses = pstts::pause_stage_for(cfg);
  const auto iso = pstts::run_iso_stage(cfg, pauses.effective_frames, alphabet, bundle.refs());
  const fs::path out = cfg.output_dir / "iso_report.json";
  pstts::write_text_file(out, pstts::dump_report(pstts::to_json(iso, cfg.iso)));
  std::cout << "K'=" << iso.effective_frames << " R=" << pstts::format_sig9(iso.result.speaking_rate)
            << " evaluated=" << iso.result.trail.size() << " chosen=" << iso.result.chosen.index
            << (iso.result.fallback ? " (fallback)" : "") << " -> " << out.string() << "\n";
  return 0;
}

int cmd_build_vowel_map(const pstts::PipelineConfig& cfg, const std::string& out_path) {
  require(!cfg.paths.vowel_corpus.empty(), "--corpus (paths.vowel_corpus) is required");
  pstts::VowelMapOptions options;
  options.k = cfg.vowel_k;
  options.seed = cfg.seed;
  options.null_cost = cfg.null_cost;
  options.source_language = cfg.source_language;
  options.target_language = cfg.target_language;
  const auto corpus = pstts::VowelVectorCorpus::load(cfg.paths.vowel_corpus);
  const auto matrix = pstts::build_vowel_map(corpus, options);
  const fs::path out = out_path.empty() ? cfg.output_dir / "vowel_map.csv" : fs::path(out_path);
  pstts::save_vowel_map(out, matrix, options);
  std::cout << matrix.rows() << "x" << matrix.cols() << " vowel map (" << matrix.source_language
            << " -> " << matrix.target_language
            << ", null_cost=" << pstts::format_sig9(matrix.null_cost) << ") -> " << out.string()
            << "\n";
  return 0;
}

int cmd_select(const pstts::PipelineConfig& cfg) {
  pstts::preflight_paths(cfg, false, true);
  const auto alphabet = pstts::PhonemeAlphabet::load(cfg.paths.alphabet);
  const auto bundle = pstts::ProviderBundle::load(cfg.paths.fixtures);
  pstts::preflight(cfg, bundle, false, true);
  const auto vowel_map = pstts::resolve_vowel_map(cfg);
  const auto result = pstts::run_select_stage(cfg, alphabet, bundle.refs(), vowel_map.matrix);
  const fs::path out = cfg.output_dir / "selection_report.json";
  pstts::write_text_file(out, pstts::dump_report(pstts::to_json(result.report)));
  std::cout << pstts::format_table(result.report) << "-> " << out.string() << "\n";
  return 0;
}

int cmd_run_pipeline(const pstts::PipelineConfig& cfg) {
  const auto out = pstts::run_pipeline(cfg);
  std::cout << "pauses: K=" << out.pauses.refined.total_frames
            << " K'=" << out.pauses.effective_frames
            << " intervals=" << out.pauses.refined.intervals.size() << "\n"
            << "iso: chosen=" << out.iso.result.chosen.index << " of "
            << out.iso.result.trail.size() << (out.iso.result.fallback ? " (fallback)" : "") << "\n"
            << "select (" << pstts::to_string(out.selection.report.mode)
            << "): chosen=" << out.selection.report.chosen_index << " of "
            << out.selection.report.rows.size() << "\n";
  for (const auto& p : out.written) std::cout << "wrote " << p.string() << "\n";
  return 0;
}

int cmd_diagnose_correlation(const std::string& input, const std::string& out_path) {
  require(!input.empty(), "--input is required");
  const json j = pstts::read_json_file(input);
  std::vector<double> dtw, semantic;
  if (j.contains("rows")) {
    for (const auto& row : j.at("rows")) {
      require(row.contains("semantic_score"), input + ": report rows lack semantic_score "
                                                      "(run select in ps-comet mode)");
      dtw.push_back(row.at("dtw_raw").get<double>());
      semantic.push_back(row.at("semantic_score").get<double>());
    }
  } else {
    dtw = pstts::get_field<std::vector<double>>(j, "dtw", input);
    semantic = pstts::get_field<std::vector<double>>(j, "semantic", input);
  }
  const auto result = pstts::correlation_diagnostic(dtw, semantic);
  const json report = pstts::to_json(result, dtw.size());
  if (!out_path.empty()) pstts::write_text_file(out_path, pstts::dump_report(report));
  print_json(report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dubbing synchronization: isochrony gating and phonetic candidate selection"};
  app.require_subcommand(1);

  ConfigFlags pauses_flags, iso_flags, map_flags, select_flags, run_flags;
  std::string pauses_out, map_out, corr_input, corr_out;

  auto* detect = app.add_subcommand("detect-pauses", "Detect pause intervals (RMS or CTC)");
  pauses_flags.attach(detect);
  detect->add_option("--out", pauses_out, "output pause-set JSON");
  detect->add_option_function<std::string>(
      "--audio", [&](const std::string& v) { pauses_flags.set("paths.audio", v); }, "source WAV");
  detect->add_option_function<std::string>(
      "--method", [&](const std::string& v) { pauses_flags.set("pauses.method", v); },
      "rms or ctc");
  detect->add_option_function<std::string>(
      "--emissions", [&](const std::string& v) { pauses_flags.set("paths.emissions", v); },
      "CTC emission matrix (binary or JSON)");

  auto* iso = app.add_subcommand("iso", "Run the isochrony paraphrase loop");
  iso_flags.attach(iso);

  auto* build = app.add_subcommand("build-vowel-map", "Cluster vowel vectors into a distance matrix");
  map_flags.attach(build);
  build->add_option("--out", map_out, "output CSV (sidecar JSON written next to it)");
  build->add_option_function<std::string>(
      "--corpus", [&](const std::string& v) { map_flags.set("paths.vowel_corpus", v); },
      "vowel vector corpus (JSON lines)");
  build->add_option_function<std::string>(
      "--k", [&](const std::string& v) { map_flags.set("vowel_map.k", v); }, "clusters per vowel");
  build->add_option_function<std::string>(
      "--null-cost", [&](const std::string& v) { map_flags.set("vowel_map.null_cost", v); },
      "mean or a constant");

  auto* select = app.add_subcommand("select", "PS / PS-Comet candidate selection");
  select_flags.attach(select);
  select->add_option_function<std::string>(
      "--mode", [&](const std::string& v) { select_flags.set("selection.mode", v); },
      "ps or ps-comet");

  auto* run = app.add_subcommand("run-pipeline", "pauses -> iso -> select, writing every stage");
  run_flags.attach(run);
  run->add_option_function<std::string>(
      "--mode", [&](const std::string& v) { run_flags.set("selection.mode", v); }, "ps or ps-comet");

  auto* corr = app.add_subcommand("diagnose-correlation",
                                  "Pearson/Spearman between DTW and semantic scores");
  corr->add_option("--input", corr_input,
                   "selection report or {\"dtw\": [...], \"semantic\": [...]}")
      ->required();
  corr->add_option("--out", corr_out, "write the result JSON here as well");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*detect) return cmd_detect_pauses(pauses_flags.config(), pauses_out);
    if (*iso) return cmd_iso(iso_flags.config());
    if (*build) return cmd_build_vowel_map(map_flags.config(), map_out);
    if (*select) return cmd_select(select_flags.config());
    if (*run) return cmd_run_pipeline(run_flags.config());
    if (*corr) return cmd_diagnose_correlation(corr_input, corr_out);
  } catch (const pstts::Error& e) {
    const int rc = pstts::exit_code_for(e);
    std::cerr << json{{"error", std::string(pstts::to_string(e.code()))},
                      {"exit_code", rc},
                      {"message", e.what()}}
                     .dump()
              << "\n";
    return rc;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "internal"}, {"exit_code", 5}, {"message", e.what()}}.dump()
              << "\n";
    return 5;
  }
  return 5;
}
