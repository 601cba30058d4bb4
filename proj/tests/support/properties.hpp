#pragma once

// Randomized property suite: one entry per module invariant. Each property
// body runs a single random case and reports violations through `Check`.
// The same suite runs under GoogleTest and in the acceptance binary.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pstts/pstts.hpp"
#include "support/fakes.hpp"
#include "support/oracles.hpp"

namespace props {

namespace fs = std::filesystem;
using pstts::PhonemeId;
using Rng = std::mt19937_64;

struct Check {
  std::vector<std::string> failures;

  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
};

struct Env {
  fs::path corpus;   // shipped fixture corpus
  fs::path scratch;  // writable temporary directory
};

struct Property {
  std::string module;
  std::string name;
  std::function<void(Rng&, Check&, const Env&)> body;
};

struct Outcome {
  std::string module;
  std::string name;
  std::size_t cases = 0;
  std::size_t failed_cases = 0;
  std::string first_failure;
  double seconds = 0.0;

  bool passed() const { return failed_cases == 0 && cases > 0; }
};

inline Outcome run_property(const Property& p, std::size_t cases, const Env& env,
                            std::uint64_t seed = 0x5eed) {
  Outcome out;
  out.module = p.module;
  out.name = p.name;
  Rng rng(seed ^ std::hash<std::string>{}(p.name));
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < cases; ++i) {
    Check chk;
    try {
      p.body(rng, chk, env);
    } catch (const std::exception& e) {
      chk.failures.push_back(std::string("unexpected exception: ") + e.what());
    }
    ++out.cases;
    if (!chk.failures.empty()) {
      if (out.failed_cases == 0)
        out.first_failure = "case " + std::to_string(i) + ": " + chk.failures.front();
      ++out.failed_cases;
    }
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

// ---------------------------------------------------------------------------
// Generators

inline std::int64_t rint(Rng& rng, std::int64_t lo, std::int64_t hi) {
  return oracle::uniform_int(rng, lo, hi);
}
inline double runif(Rng& rng, double lo, double hi) { return oracle::uniform(rng, lo, hi); }

inline std::vector<PhonemeId> random_phonemes(Rng& rng, std::size_t max_len) {
  std::vector<PhonemeId> out(static_cast<std::size_t>(rint(rng, 0, max_len)));
  for (auto& id : out) id = static_cast<PhonemeId>(rint(rng, 2, 14));
  return out;
}

inline std::vector<double> random_scores(Rng& rng, std::size_t n, double lo = 0.0,
                                         double hi = 100.0) {
  std::vector<double> s(n);
  for (auto& x : s) x = runif(rng, lo, hi);
  return s;
}

/// A random emission matrix (rows normalized in log space).
inline pstts::EmissionMatrix random_emissions(Rng& rng, std::size_t T, std::size_t V, int blank,
                                              std::vector<std::vector<double>>* rows_out = nullptr) {
  std::vector<double> flat;
  std::vector<std::vector<double>> rows;
  for (std::size_t t = 0; t < T; ++t) {
    std::vector<double> w(V);
    double sum = 0;
    for (auto& x : w) sum += (x = runif(rng, 0.01, 1.0));
    std::vector<double> row;
    for (double x : w) row.push_back(std::log(x / sum));
    flat.insert(flat.end(), row.begin(), row.end());
    rows.push_back(row);
  }
  if (rows_out) *rows_out = rows;
  return pstts::EmissionMatrix(flat, T, V, blank);
}

/// Random targets over the non-blank labels.
inline std::vector<int> random_targets(Rng& rng, std::size_t V, int blank, std::size_t max_len) {
  std::vector<int> t(static_cast<std::size_t>(rint(rng, 0, max_len)));
  for (auto& x : t) {
    do x = static_cast<int>(rint(rng, 0, V - 1));
    while (x == blank);
  }
  return t;
}

/// A random symmetric non-negative cost over `symbols` ids.
inline std::vector<double> random_symmetric_costs(Rng& rng, std::size_t symbols) {
  std::vector<double> c(symbols * symbols);
  for (std::size_t i = 0; i < symbols; ++i)
    for (std::size_t j = i; j < symbols; ++j) c[i * symbols + j] = c[j * symbols + i] = runif(rng, 0, 5);
  return c;
}

inline std::optional<std::int64_t> random_radius(Rng& rng) {
  switch (rint(rng, 0, 2)) {
    case 0: return std::nullopt;
    case 1: return rint(rng, 0, 4);
    default: return std::max<std::int64_t>(1, rint(rng, 1, 8));
  }
}

/// A corpus in which each vowel has `k` tight blobs of equal size, so every
/// k-means seeding converges to the same partition.
inline pstts::VowelVectorCorpus blob_corpus(Rng& rng, std::size_t k, std::size_t dim,
                                            std::size_t vowels_per_language) {
  pstts::VowelVectorCorpus corpus;
  const std::size_t per_blob = static_cast<std::size_t>(rint(rng, 1, 3));
  for (const char* lang : {"src", "tgt"})
    for (std::size_t v = 0; v < vowels_per_language; ++v) {
      const pstts::VowelKey key{lang, "v" + std::to_string(v)};
      for (std::size_t b = 0; b < k; ++b) {
        std::vector<double> center(dim);
        for (auto& x : center) x = runif(rng, -10, 10);
        for (std::size_t p = 0; p < per_blob; ++p) {
          auto point = center;
          for (auto& x : point) x += 1e-3 * oracle::gaussian(rng);
          corpus.add(key, point);
        }
      }
    }
  return corpus;
}

inline pstts::VowelVectorCorpus transformed(const pstts::VowelVectorCorpus& in,
                                            const std::function<pstts::Vector(const pstts::Vector&)>& f) {
  pstts::VowelVectorCorpus out;
  for (const auto& key : in.order)
    for (const auto& v : in.vectors.at(key)) out.add(key, f(v));
  return out;
}

/// Random orthogonal matrix by Gram-Schmidt on Gaussian columns.
inline std::vector<std::vector<double>> random_rotation(Rng& rng, std::size_t dim) {
  std::vector<std::vector<double>> q;
  while (q.size() < dim) {
    std::vector<double> v(dim);
    for (auto& x : v) x = oracle::gaussian(rng);
    for (const auto& u : q) {
      double dot = 0;
      for (std::size_t i = 0; i < dim; ++i) dot += v[i] * u[i];
      for (std::size_t i = 0; i < dim; ++i) v[i] -= dot * u[i];
    }
    double n = 0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    if (n < 1e-6) continue;
    for (auto& x : v) x /= n;
    q.push_back(v);
  }
  return q;
}

inline bool rel_close(double a, double b, double tol) {
  return std::fabs(a - b) <= tol * std::max({1.0, std::fabs(a), std::fabs(b)});
}

inline bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

inline std::string read_all(const fs::path& p) { return pstts::read_text_file(p); }

/// Every file under `dir`, relative path -> bytes.
inline std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = read_all(e.path());
  return out;
}

inline pstts::PipelineConfig corpus_config(const Env& env, const fs::path& output_dir) {
  auto doc = pstts::load_config_document(env.corpus / "pipeline.json");
  doc["output_dir"] = output_dir.string();
  return pstts::PipelineConfig::from_json(doc);
}

// ---------------------------------------------------------------------------
// The suite

inline std::vector<Property> all_properties() {
  std::vector<Property> ps;
  const auto alphabet = fakes::small_alphabet();

  // core_sequences -----------------------------------------------------------

  ps.push_back({"core_sequences", "tokenize round-trip", [alphabet](Rng& rng, Check& c, const Env&) {
    const auto in = random_phonemes(rng, 40);
    const auto seq = pstts::tokenize_with_blanks(in, alphabet, "xx");
    c.expect(seq.token_ids.size() == 2 * in.size() + 1, "length is not 2N+1");
    for (std::size_t i = 0; i < seq.token_ids.size(); i += 2)
      c.expect(seq.token_ids[i] == alphabet.blank_id(), "even position is not blank");
    std::vector<PhonemeId> odd;
    for (std::size_t i = 1; i < seq.token_ids.size(); i += 2) odd.push_back(seq.token_ids[i]);
    c.expect(odd == in, "removing even positions does not recover the input");
  }});

  ps.push_back({"core_sequences", "expansion length equals duration sum",
                [alphabet](Rng& rng, Check& c, const Env&) {
    pstts::DurationedSequence d;
    d.base = pstts::tokenize_with_blanks(random_phonemes(rng, 30), alphabet, "xx");
    std::vector<PhonemeId> expected;
    for (PhonemeId id : d.base.token_ids) {
      d.durations.push_back(rint(rng, 0, 6));
      expected.insert(expected.end(), static_cast<std::size_t>(d.durations.back()), id);
    }
    const auto e = pstts::expand_with_durations(d);
    c.expect(static_cast<std::int64_t>(e.size()) == d.total_frames(), "length differs from sum");
    c.expect(e.frame_ids == expected, "expansion is not token-wise repetition");
  }});

  ps.push_back({"core_sequences", "masking is idempotent", [alphabet](Rng& rng, Check& c, const Env&) {
    pstts::ExpandedSequence e;
    e.frame_ids.resize(static_cast<std::size_t>(rint(rng, 0, 60)));
    for (auto& id : e.frame_ids) id = static_cast<PhonemeId>(rint(rng, 0, 14));
    const auto once = pstts::mask_non_vowels(e, alphabet);
    c.expect(pstts::mask_non_vowels(once, alphabet) == once, "mask(mask(x)) != mask(x)");
    c.expect(once.size() == e.size(), "length changed");
    for (std::size_t i = 0; i < e.size(); ++i)
      c.expect(once.frame_ids[i] ==
                   (alphabet.is_vowel(e.frame_ids[i]) ? e.frame_ids[i] : alphabet.null_id()),
               "frame not masked per vowel flag");
  }});

  // pause_detection ----------------------------------------------------------

  ps.push_back({"pause_detection", "detection is threshold-relative", [](Rng& rng, Check& c, const Env&) {
    const double threshold = runif(rng, 1e-4, 0.1);
    const std::int64_t min_run = rint(rng, 1, 20);
    pstts::EnergySeries e;
    const auto n = rint(rng, 0, 200);
    double level = 0.5;
    for (std::int64_t k = 0; k < n; ++k) {
      if (runif(rng, 0, 1) < 0.1) level = 1 - level;  // switch between quiet and loud stretches
      e.energies.push_back(level < 0.5 ? threshold * runif(rng, 0.0, 0.9)
                                       : threshold * runif(rng, 1.1, 5.0));
    }
    const double scale = std::exp(runif(rng, -7, 7));
    pstts::EnergySeries scaled = e;
    for (auto& x : scaled.energies) x *= scale;
    c.expect(pstts::detect_pauses_rms(e, threshold, min_run) ==
                 pstts::detect_pauses_rms(scaled, threshold * scale, min_run),
             "scaling energies and threshold together changed the pauses");
  }});

  ps.push_back({"pause_detection", "CTC Viterbi equals exhaustive search", [](Rng& rng, Check& c, const Env&) {
    const auto V = static_cast<std::size_t>(rint(rng, 2, 4));
    const auto T = static_cast<std::size_t>(rint(rng, 1, 6));
    const int blank = static_cast<int>(rint(rng, 0, V - 1));
    std::vector<std::vector<double>> rows;
    const auto em = random_emissions(rng, T, V, blank, &rows);
    const auto targets = random_targets(rng, V, blank, 3);
    const auto best = oracle::ctc_brute(rows, blank, targets);
    try {
      const auto r = pstts::ctc_viterbi_align(em, targets);
      c.expect(best.has_value(), "aligned an instance with no valid path");
      if (best) c.expect(r.path_log_prob == *best, "path_log_prob differs from the exhaustive max");
    } catch (const pstts::Error& e) {
      c.expect(e.code() == pstts::ErrorCode::alignment_infeasible && !best.has_value(),
               std::string("unexpected failure: ") + e.what());
    }
  }});

  ps.push_back({"pause_detection", "CTC path collapses to the targets", [](Rng& rng, Check& c, const Env&) {
    const auto V = static_cast<std::size_t>(rint(rng, 2, 10));
    const int blank = static_cast<int>(rint(rng, 0, V - 1));
    const auto targets = random_targets(rng, V, blank, 15);
    std::size_t needed = targets.size();
    for (std::size_t i = 1; i < targets.size(); ++i) needed += targets[i] == targets[i - 1];
    const auto T = static_cast<std::size_t>(rint(rng, std::max<std::size_t>(1, needed), needed + 40));
    const auto em = random_emissions(rng, T, V, blank);
    const auto r = pstts::ctc_viterbi_align(em, targets);
    c.expect(pstts::ctc_collapse(r.frame_labels, blank) == targets, "collapse != targets");
    double sum = 0;
    for (std::size_t t = 0; t < T; ++t) sum += em.at(t, r.frame_labels[t]);
    c.expect(sum == r.path_log_prob, "path_log_prob is not the sum along the path");
    std::int64_t prev_end = 0;
    for (const auto& [s, e] : r.token_spans) {
      c.expect(s >= prev_end && e > s, "token spans not monotone and disjoint");
      prev_end = e;
    }
  }});

  ps.push_back({"pause_detection", "refinement never enlarges or overlaps", [](Rng& rng, Check& c, const Env&) {
    pstts::EnergySeries e;
    const auto n = rint(rng, 0, 300);
    for (std::int64_t k = 0; k < n; ++k)
      e.energies.push_back(runif(rng, 0, 1) < 0.7 ? runif(rng, 0, 0.012) : runif(rng, 0, 0.2));
    const std::int64_t min_run = rint(rng, 1, 20);
    const auto raw = pstts::detect_pauses_rms(e, 0.01, min_run);
    const auto refined = pstts::refine_pauses(e, raw, runif(rng, 0, 0.01), min_run);
    refined.validate();
    for (const auto& iv : refined.intervals) {
      bool inside = false;
      for (const auto& o : raw.intervals)
        inside |= iv.start_frame >= o.start_frame && iv.end_frame() <= o.end_frame();
      c.expect(inside, "refined interval not contained in a detected one");
      c.expect(iv.length_frames >= min_run, "refined interval shorter than min_run");
    }
    c.expect(refined.intervals.size() <= raw.intervals.size(), "refinement created intervals");
  }});

  // isochrony ----------------------------------------------------------------

  ps.push_back({"isochrony", "acceptance is monotone in similarity", [](Rng& rng, Check& c, const Env&) {
    const pstts::IsoParams p{rint(rng, 0, 40), runif(rng, 0, 1), 60};
    const auto K = rint(rng, 0, 1000);
    const double eval = K + runif(rng, -60, 60);
    const double s = runif(rng, -1, 1), s2 = runif(rng, s, 1);
    if (pstts::iso_accept(K, eval, s, p)) c.expect(pstts::iso_accept(K, eval, s2, p), "not monotone");
  }});

  ps.push_back({"isochrony", "acceptance is symmetric around K'", [](Rng& rng, Check& c, const Env&) {
    const pstts::IsoParams p{rint(rng, 0, 40), 0.75, 60};
    const auto K = rint(rng, 60, 100000);
    const double d = static_cast<double>(rint(rng, 0, 8 * 60)) / 8.0;  // exact in binary
    const double s = runif(rng, 0, 1);
    c.expect(pstts::iso_accept(K, K + d, s, p) == pstts::iso_accept(K, K - d, s, p),
             "K'+d and K'-d disagree");
  }});

  ps.push_back({"isochrony", "at most 1 + max_iterations evaluations", [](Rng& rng, Check& c, const Env&) {
    const auto max_iter = rint(rng, 1, 15);
    const auto stream = rint(rng, 0, 2 * max_iter + 2);
    std::vector<std::pair<double, double>> cands;
    for (std::int64_t i = 0; i <= stream; ++i) cands.push_back({runif(rng, 50, 150), runif(rng, 0.3, 1.0)});
    auto s = fakes::make_iso_scenario(100, 100, cands);
    const auto r = fakes::run_iso(s, {static_cast<std::int64_t>(rint(rng, 0, 30)), 0.8, max_iter});
    c.expect(r.trail.size() <= static_cast<std::size_t>(1 + max_iter), "too many evaluations");
    c.expect(s.providers.paraphrase_calls <= static_cast<std::size_t>(max_iter), "paraphraser over-called");
    for (std::size_t i = 0; i < r.trail.size(); ++i)
      c.expect(r.trail[i].candidate_index == i, "trail not in generation order");
  }});

  ps.push_back({"isochrony", "fallback picks the maximum similarity", [](Rng& rng, Check& c, const Env&) {
    const auto n = rint(rng, 0, 30);
    std::vector<std::pair<double, double>> cands;
    for (std::int64_t i = 0; i <= n; ++i)
      cands.push_back({runif(rng, 50, 150), std::round(runif(rng, 0.0, 0.7) * 20) / 20});  // ties likely
    auto s = fakes::make_iso_scenario(100, 100, cands);
    const auto r = fakes::run_iso(s);
    c.expect(r.fallback, "no candidate can pass yet fallback flag unset");
    for (std::size_t i = 0; i < r.trail.size(); ++i) {
      c.expect(r.evaluation.similarity >= r.trail[i].similarity, "fallback below another candidate");
      if (r.trail[i].similarity == r.evaluation.similarity)
        c.expect(r.evaluation.candidate_index <= i, "tie not broken toward the earliest candidate");
    }
  }});

  ps.push_back({"isochrony", "equal predicted durations scale to exactly K'", [](Rng& rng, Check& c, const Env&) {
    pstts::PauseIntervalSet pauses;
    std::int64_t at = 0;
    for (int i = 0; i < rint(rng, 0, 5); ++i) {
      at += rint(rng, 0, 50);
      const auto len = rint(rng, 1, 40);
      pauses.intervals.push_back({at, len});
      at += len;
    }
    pauses.total_frames = at + rint(rng, 0, 100000);
    const auto Kp = pstts::effective_frames(pauses.total_frames, pauses);
    c.expect(Kp == pauses.total_frames - pauses.paused_frames(), "K' != K - sum r");
    const double P = std::exp(runif(rng, -3, 10));
    const auto R = pstts::speaking_rate(Kp, P);
    c.expect(pstts::scaled_duration(R, P) == static_cast<double>(Kp), "scaled duration != K'");
  }});

  // vowel_space --------------------------------------------------------------

  ps.push_back({"vowel_space", "triangle inequality", [](Rng& rng, Check& c, const Env&) {
    const auto dim = static_cast<std::size_t>(rint(rng, 1, 8));
    std::vector<pstts::Vector> mus(static_cast<std::size_t>(rint(rng, 3, 8)), pstts::Vector(dim));
    for (auto& m : mus)
      for (auto& x : m) x = runif(rng, -5, 5);
    const auto d = pstts::build_distance_matrix(mus, mus);
    for (std::size_t a = 0; a < mus.size(); ++a)
      for (std::size_t b = 0; b < mus.size(); ++b)
        for (std::size_t x = 0; x < mus.size(); ++x)
          c.expect(d.at(a, b) <= d.at(a, x) + d.at(x, b) + 1e-12 * (1 + d.at(a, b)),
                   "triangle inequality violated");
  }});

  ps.push_back({"vowel_space", "rotation leaves the matrix unchanged", [](Rng& rng, Check& c, const Env&) {
    const auto k = static_cast<std::size_t>(rint(rng, 1, 5));
    const auto dim = static_cast<std::size_t>(rint(rng, 2, 6));
    const auto corpus = blob_corpus(rng, k, dim, static_cast<std::size_t>(rint(rng, 1, 4)));
    const auto q = random_rotation(rng, dim);
    const auto rotated = transformed(corpus, [&](const pstts::Vector& v) {
      pstts::Vector out(dim, 0.0);
      for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j < dim; ++j) out[i] += q[i][j] * v[j];
      return out;
    });
    pstts::VowelMapOptions o;
    o.k = k;
    o.seed = rng();
    const auto a = pstts::build_vowel_map(corpus, o), b = pstts::build_vowel_map(rotated, o);
    for (std::size_t i = 0; i < a.d.size(); ++i)
      c.expect(rel_close(a.d[i], b.d[i], 1e-9), "entry changed under rotation");
  }});

  ps.push_back({"vowel_space", "fixed seed is bit-deterministic", [](Rng& rng, Check& c, const Env&) {
    pstts::VowelVectorCorpus corpus;
    const auto dim = static_cast<std::size_t>(rint(rng, 1, 6));
    const auto k = static_cast<std::size_t>(rint(rng, 1, 5));
    for (const char* lang : {"src", "tgt"})
      for (int v = 0; v < rint(rng, 1, 4); ++v)
        for (std::int64_t i = 0; i < rint(rng, static_cast<std::int64_t>(k), 20); ++i) {
          pstts::Vector x(dim);
          for (auto& e : x) e = runif(rng, -3, 3);
          corpus.add({lang, "v" + std::to_string(v)}, x);
        }
    pstts::VowelMapOptions o;
    o.k = k;
    o.seed = rng();
    const auto a = pstts::build_vowel_map(corpus, o), b = pstts::build_vowel_map(corpus, o);
    c.expect(bit_equal(a.d, b.d) && a.null_cost == b.null_cost, "matrices differ bitwise");
    c.expect(pstts::matrix_to_csv(a) == pstts::matrix_to_csv(b), "CSV differs");
  }});

  ps.push_back({"vowel_space", "scaling vectors scales distances", [](Rng& rng, Check& c, const Env&) {
    const auto k = static_cast<std::size_t>(rint(rng, 1, 5));
    const auto corpus = blob_corpus(rng, k, static_cast<std::size_t>(rint(rng, 1, 6)),
                                    static_cast<std::size_t>(rint(rng, 1, 4)));
    const double factor = std::exp(runif(rng, -3, 3));
    const auto scaled = transformed(corpus, [&](const pstts::Vector& v) {
      auto out = v;
      for (auto& x : out) x *= factor;
      return out;
    });
    pstts::VowelMapOptions o;
    o.k = k;
    const auto a = pstts::build_vowel_map(corpus, o), b = pstts::build_vowel_map(scaled, o);
    for (std::size_t i = 0; i < a.d.size(); ++i)
      c.expect(rel_close(b.d[i], factor * a.d[i], 1e-9), "entry not scaled by c");
    for (std::size_t r = 0; r < a.rows(); ++r) {
      auto row_a = a.d.begin() + r * a.cols(), row_b = b.d.begin() + r * b.cols();
      c.expect(std::min_element(row_a, row_a + a.cols()) - row_a ==
                   std::min_element(row_b, row_b + b.cols()) - row_b,
               "row argmin changed");
    }
  }});

  // dtw_matching -------------------------------------------------------------

  ps.push_back({"dtw_matching", "symmetric under swapping", [](Rng& rng, Check& c, const Env&) {
    const auto V = static_cast<std::size_t>(rint(rng, 1, 5));
    const auto cost = random_symmetric_costs(rng, V);
    std::vector<int> x(static_cast<std::size_t>(rint(rng, 1, 14))), y(static_cast<std::size_t>(rint(rng, 1, 14)));
    for (auto& v : x) v = static_cast<int>(rint(rng, 0, V - 1));
    for (auto& v : y) v = static_cast<int>(rint(rng, 0, V - 1));
    const auto radius = random_radius(rng);
    auto run = [&](const std::vector<int>& a, const std::vector<int>& b) -> std::optional<double> {
      try {
        return pstts::dtw_with(a.size(), b.size(),
                               [&](std::size_t k, std::size_t l) { return cost[a[k] * V + b[l]]; }, radius)
            .distance;
      } catch (const pstts::Error&) {
        return std::nullopt;
      }
    };
    c.expect(run(x, y) == run(y, x), "dtw(x, y) != dtw(y, x)");
  }});

  ps.push_back({"dtw_matching", "wider band never increases distance", [](Rng& rng, Check& c, const Env&) {
    const auto K = static_cast<std::size_t>(rint(rng, 1, 16)), L = static_cast<std::size_t>(rint(rng, 1, 16));
    std::vector<double> cost(K * L);
    for (auto& x : cost) x = runif(rng, 0, 3);
    auto f = [&](std::size_t k, std::size_t l) { return cost[k * L + l]; };
    const auto r1 = rint(rng, 0, 6), r2 = r1 + rint(rng, 0, 6);
    std::optional<double> d1, d2;
    try { d1 = pstts::dtw_with(K, L, f, r1).distance; } catch (const pstts::Error&) {}
    try { d2 = pstts::dtw_with(K, L, f, r2).distance; } catch (const pstts::Error&) {}
    const double d3 = pstts::dtw_with(K, L, f, std::nullopt).distance;
    if (d1) c.expect(d2 && *d2 <= *d1, "widening the band increased the distance");
    if (d2) c.expect(d3 <= *d2, "removing the band increased the distance");
  }});

  ps.push_back({"dtw_matching", "distance equals brute force for K, L <= 8", [](Rng& rng, Check& c, const Env&) {
    const auto K = static_cast<std::size_t>(rint(rng, 1, 8)), L = static_cast<std::size_t>(rint(rng, 1, 8));
    std::vector<double> cost(K * L);
    for (auto& x : cost) x = runif(rng, 0, 10);
    auto f = [&](std::size_t k, std::size_t l) { return cost[k * L + l]; };
    const auto radius = random_radius(rng);
    const auto best = oracle::dtw_brute(K, L, f, radius);
    try {
      const auto r = pstts::dtw_with(K, L, f, radius);
      c.expect(best && r.distance == *best, "dtw differs from brute force");
    } catch (const pstts::Error& e) {
      c.expect(e.code() == pstts::ErrorCode::band_infeasible && !best, "unexpected failure");
    }
  }});

  ps.push_back({"dtw_matching", "zero-cost shared prefix leaves distance unchanged",
                [](Rng& rng, Check& c, const Env&) {
    const auto V = static_cast<std::size_t>(rint(rng, 1, 5));
    std::vector<double> cost((V + 1) * (V + 1));
    for (auto& x : cost) x = runif(rng, 0, 4);
    // Symbol V is the prefix symbol: free against itself, expensive otherwise.
    const double big = 1e6;
    for (std::size_t i = 0; i <= V; ++i) cost[V * (V + 1) + i] = cost[i * (V + 1) + V] = big;
    cost[V * (V + 1) + V] = 0.0;
    const auto K = static_cast<std::size_t>(rint(rng, 1, 10));
    const bool same_length = rint(rng, 0, 1) == 1;
    const auto L = same_length ? K : static_cast<std::size_t>(rint(rng, 1, 10));
    std::vector<int> x(K), y(L);
    for (auto& v : x) v = static_cast<int>(rint(rng, 0, V - 1));
    for (auto& v : y) v = static_cast<int>(rint(rng, 0, V - 1));
    // Equal lengths keep the band geometry under a shared prefix; otherwise unbounded.
    std::optional<std::int64_t> radius;
    if (same_length) radius.emplace(rint(rng, 0, 4));
    auto dist = [&](const std::vector<int>& a, const std::vector<int>& b) {
      return pstts::dtw_with(a.size(), b.size(),
                             [&](std::size_t k, std::size_t l) { return cost[a[k] * (V + 1) + b[l]]; },
                             radius)
          .distance;
    };
    auto px = x, py = y;
    const auto p = static_cast<std::size_t>(rint(rng, 1, 6));
    px.insert(px.begin(), p, static_cast<int>(V));
    py.insert(py.begin(), p, static_cast<int>(V));
    c.expect(dist(x, y) == dist(px, py), "prefix changed the distance");
  }});

  ps.push_back({"dtw_matching", "path cost equals distance", [](Rng& rng, Check& c, const Env&) {
    const auto K = static_cast<std::size_t>(rint(rng, 1, 30)), L = static_cast<std::size_t>(rint(rng, 1, 30));
    std::vector<double> cost(K * L);
    for (auto& x : cost) x = runif(rng, 0, 10);
    const auto radius = pstts::BandRadius{}.resolve(K, L);
    const auto r = pstts::dtw_with(K, L, [&](std::size_t k, std::size_t l) { return cost[k * L + l]; }, radius);
    double sum = 0;
    for (const auto& [k, l] : r.path) sum += cost[k * L + l];
    c.expect(rel_close(sum, r.distance, 1e-12), "path cost differs from distance");
    c.expect(r.path.front() == std::make_pair<std::size_t, std::size_t>(0, 0) &&
                 r.path.back() == std::make_pair(K - 1, L - 1),
             "path endpoints wrong");
    for (std::size_t i = 1; i < r.path.size(); ++i) {
      const auto dk = r.path[i].first - r.path[i - 1].first, dl = r.path[i].second - r.path[i - 1].second;
      c.expect((dk == 1 || dk == 0) && (dl == 1 || dl == 0) && dk + dl > 0, "illegal step");
    }
    for (const auto& [k, l] : r.path) c.expect(pstts::in_band(k, l, K, L, radius), "path leaves the band");
  }});

  // selection ----------------------------------------------------------------

  ps.push_back({"selection", "ps_select invariant to shift and scale", [](Rng& rng, Check& c, const Env&) {
    const auto s = random_scores(rng, static_cast<std::size_t>(rint(rng, 1, 60)));
    const double shift = runif(rng, -50, 50), scale = std::exp(runif(rng, -4, 4));
    auto t = s;
    for (auto& x : t) x = x * scale + shift;
    c.expect(pstts::ps_select(s) == pstts::ps_select(t), "argmin moved");
  }});

  ps.push_back({"selection", "ps_comet invariant to positive affine DTW maps", [](Rng& rng, Check& c, const Env&) {
    const auto n = static_cast<std::size_t>(rint(rng, 1, 60));
    const auto dtw = random_scores(rng, n), sem = random_scores(rng, n, 0, 1);
    const double a = std::exp(runif(rng, -4, 4)), b = runif(rng, -100, 100);
    auto t = dtw;
    for (auto& x : t) x = a * x + b;
    const auto r1 = pstts::ps_comet_select(dtw, sem), r2 = pstts::ps_comet_select(t, sem);
    c.expect(r1.chosen_index == r2.chosen_index, "chosen index moved");
    const auto n1 = pstts::normalize_invert(dtw), n2 = pstts::normalize_invert(t);
    for (std::size_t i = 0; i < n; ++i) c.expect(std::fabs(n1[i] - n2[i]) <= 1e-9, "normalized score moved");
  }});

  ps.push_back({"selection", "normalize_invert bounded and anti-monotone", [](Rng& rng, Check& c, const Env&) {
    auto s = random_scores(rng, static_cast<std::size_t>(rint(rng, 1, 60)), -1e3, 1e3);
    if (rint(rng, 0, 3) == 0)
      for (auto& x : s) x = std::round(x / 300);  // force ties
    const auto out = pstts::normalize_invert(s);
    for (std::size_t i = 0; i < s.size(); ++i) {
      c.expect(out[i] >= 0.0 && out[i] <= 1.0, "value outside [0, 1]");
      for (std::size_t j = 0; j < s.size(); ++j) {
        if (s[i] < s[j]) c.expect(out[i] > out[j], "order not reversed");
        if (s[i] == s[j]) c.expect(out[i] == out[j], "equal scores normalized differently");
      }
    }
    const auto argmax = std::max_element(out.begin(), out.end()) - out.begin();
    c.expect(static_cast<std::size_t>(argmax) == pstts::ps_select(s), "argmin did not become argmax");
  }});

  ps.push_back({"selection", "beta = 0 agrees with ps_select", [](Rng& rng, Check& c, const Env&) {
    const auto n = static_cast<std::size_t>(rint(rng, 1, 60));
    const auto dtw = random_scores(rng, n), sem = random_scores(rng, n, 0, 1);
    const pstts::CometParams params{runif(rng, 0.01, 5), 0.0, false};
    c.expect(pstts::ps_comet_select(dtw, sem, params).chosen_index == pstts::ps_select(dtw),
             "beta = 0 chose differently from ps_select");
  }});

  // providers ----------------------------------------------------------------

  ps.push_back({"providers", "file providers are referentially transparent", [](Rng& rng, Check& c, const Env& env) {
    static const auto rows = pstts::read_json_lines(env.corpus / "phonemes.jsonl");
    static const auto a = pstts::ProviderBundle::load(env.corpus / "manifest.json");
    const auto b = pstts::ProviderBundle::load(env.corpus / "manifest.json");  // a fresh load
    const auto& row = rows[static_cast<std::size_t>(rint(rng, 0, rows.size() - 1))];
    std::string text = row.at("text");
    const std::string lang = row.at("language");
    // Whitespace-only edits keep the key.
    std::string noisy;
    for (char ch : text) noisy += ch == ' ' ? std::string(static_cast<std::size_t>(rint(rng, 1, 3)), ' ') : std::string(1, ch);
    if (rint(rng, 0, 1)) noisy = "  " + noisy + "\t";
    const auto pa = a.refs().phonemizer->phonemize(text, lang);
    c.expect(pa == b.refs().phonemizer->phonemize(noisy, lang), "phonemes differ");
    const auto seq = pstts::tokenize_with_blanks(pa, pstts::PhonemeAlphabet::load(env.corpus / "alphabet.json"), lang);
    c.expect(a.refs().durations->predict_duration(seq).per_token_frames ==
                 b.refs().durations->predict_duration(seq).per_token_frames,
             "durations differ");
    if (lang == "en") {
      bool known = true;
      std::vector<double> ea, eb;
      try { ea = a.refs().embedder->embed_sentence(text); } catch (const pstts::Error&) { known = false; }
      if (known) {
        eb = b.refs().embedder->embed_sentence(noisy);
        c.expect(bit_equal(ea, eb), "embeddings differ");
      }
    }
  }});

  ps.push_back({"providers", "preflight finds every fixture miss", [](Rng& rng, Check& c, const Env& env) {
    const fs::path dir = env.scratch / "preflight";
    fs::remove_all(dir);
    fs::create_directories(dir);
    for (const char* f : {"alphabet.json", "source.wav", "vowel_corpus.jsonl", "manifest.json"})
      fs::copy_file(env.corpus / f, dir / f);
    // Drop a few random lines from the provider fixtures.
    const double drop = runif(rng, 0.0, 0.08);
    for (const char* f : {"phonemes.jsonl", "durations.jsonl", "embeddings.jsonl", "paraphrases.jsonl",
                          "semantic.jsonl"}) {
      std::istringstream in(read_all(env.corpus / f));
      std::string line, kept;
      while (std::getline(in, line))
        if (runif(rng, 0, 1) >= drop) kept += line + "\n";
      pstts::write_text_file(dir / f, kept);
    }
    auto doc = pstts::load_config_document(env.corpus / "pipeline.json");
    for (auto& [key, value] : doc["paths"].items())
      if (!value.get<std::string>().empty()) value = (dir / fs::path(value.get<std::string>()).filename()).string();
    doc["output_dir"] = (dir / "out").string();
    doc["selection"]["mode"] = rint(rng, 0, 1) ? "ps" : "ps-comet";
    const auto cfg = pstts::PipelineConfig::from_json(doc);
    const auto bundle = pstts::ProviderBundle::load(cfg.paths.fixtures);
    const auto alphabet = pstts::PhonemeAlphabet::load(cfg.paths.alphabet);
    bool preflight_ok = true;
    try {
      pstts::preflight(cfg, bundle, true, true);
    } catch (const pstts::Error& e) {
      c.expect(e.code() == pstts::ErrorCode::fixture_miss, "preflight raised a non-miss error");
      preflight_ok = false;
    }
    // A clean preflight means every stage must run to completion.
    if (!preflight_ok) return;
    try {
      const auto pauses = pstts::pause_stage_for(cfg);
      pstts::run_iso_stage(cfg, pauses.effective_frames, alphabet, bundle.refs());
      const auto vm = pstts::resolve_vowel_map(cfg);
      pstts::run_select_stage(cfg, alphabet, bundle.refs(), vm.matrix);
    } catch (const pstts::Error& e) {
      c.expect(false, std::string("preflight passed but a stage failed: ") + e.what());
    }
  }});

  // cli_pipeline -------------------------------------------------------------

  ps.push_back({"cli_pipeline", "re-running gives byte-identical outputs", [](Rng& rng, Check& c, const Env& env) {
    auto doc = pstts::load_config_document(env.corpus / "pipeline.json");
    doc["selection"]["mode"] = rint(rng, 0, 1) ? "ps" : "ps-comet";
    doc["seed"] = rng() % 1000;
    doc["vowel_map"]["k"] = rint(rng, 1, 6);
    doc["iso"]["window_frames"] = rint(rng, 0, 60);
    doc["iso"]["sim_threshold"] = runif(rng, 0.5, 1.0);
    doc["dtw"]["band_radius"] = rint(rng, 0, 2) == 0 ? std::string("unbounded") : std::to_string(rint(rng, 5, 40));
    if (rint(rng, 0, 1)) doc["vowel_map"]["null_cost"] = std::to_string(runif(rng, 0, 2));
    std::map<std::string, std::string> first;
    for (int run = 0; run < 2; ++run) {
      const fs::path out = env.scratch / ("idem" + std::to_string(run));
      fs::remove_all(out);
      doc["output_dir"] = out.string();
      pstts::run_pipeline(pstts::PipelineConfig::from_json(doc));
      if (run == 0) first = snapshot(out);
      else c.expect(first == snapshot(out), "outputs differ between runs");
    }
  }});

  ps.push_back({"cli_pipeline", "exit codes follow the error class", [](Rng& rng, Check& c, const Env&) {
    using pstts::ErrorCode;
    static const std::map<ErrorCode, int> expected = {
        {ErrorCode::invalid_input, 2},        {ErrorCode::unknown_phoneme, 2},
        {ErrorCode::unknown_vowel, 2},        {ErrorCode::rate_mismatch, 2},
        {ErrorCode::division_degenerate, 2},  {ErrorCode::degenerate_embedding, 2},
        {ErrorCode::degenerate_series, 2},    {ErrorCode::io_error, 2},
        {ErrorCode::fixture_miss, 3},         {ErrorCode::alignment_infeasible, 4},
        {ErrorCode::band_infeasible, 4},      {ErrorCode::provider_error, 5}};
    auto it = expected.begin();
    std::advance(it, rint(rng, 0, expected.size() - 1));
    try {
      if (rint(rng, 0, 1) && it->first != ErrorCode::provider_error)
        throw pstts::ProviderError(static_cast<std::size_t>(rint(rng, 0, 59)), it->first, "x");
      pstts::fail(it->first, "x");
    } catch (const pstts::Error& e) {
      c.expect(pstts::exit_code_for(e) == it->second,
               "code " + std::string(pstts::to_string(it->first)) + " maps to " +
                   std::to_string(pstts::exit_code_for(e)));
    }
  }});

  return ps;
}

}  // namespace props
