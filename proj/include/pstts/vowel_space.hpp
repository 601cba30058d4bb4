#pragma once

// Cross-lingual vowel distance matrix: per-vowel K-means over mean vectors,
// the average of the resulting centroids, and pairwise Euclidean distances.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pstts/error.hpp"
#include "pstts/json_io.hpp"
#include "pstts/sequences.hpp"

namespace pstts {

using Vector = std::vector<double>;

struct VowelKey {
  std::string language;
  std::string symbol;

  auto operator<=>(const VowelKey&) const = default;
};

/// Vectors per vowel, plus the order in which vowels and languages first
/// appeared in the input so exports are stable.
struct VowelVectorCorpus {
  std::map<VowelKey, std::vector<Vector>> vectors;
  std::vector<VowelKey> order;
  std::vector<std::string> languages;
  std::size_t dimension = 0;

  void add(const VowelKey& key, Vector v) {
    require(!v.empty(), "vowel vectors must have dimension >= 1");
    if (dimension == 0) dimension = v.size();
    require(v.size() == dimension, "vowel vector dimension mismatch for " + key.language + "/" +
                                       key.symbol);
    for (double x : v) require(std::isfinite(x), "vowel vectors must be finite");
    auto [it, inserted] = vectors.try_emplace(key);
    if (inserted) order.push_back(key);
    if (std::find(languages.begin(), languages.end(), key.language) == languages.end())
      languages.push_back(key.language);
    it->second.push_back(std::move(v));
  }

  /// Vowels of one language in first-appearance order.
  std::vector<VowelKey> vowels_of(const std::string& language) const {
    std::vector<VowelKey> out;
    for (const auto& k : order)
      if (k.language == language) out.push_back(k);
    return out;
  }

  /// JSON lines {"language", "vowel", "vector": [...]}.
  static VowelVectorCorpus load(const std::filesystem::path& path) {
    VowelVectorCorpus corpus;
    const auto rows = read_json_lines(path);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const std::string where = path.string() + " line " + std::to_string(i + 1);
      corpus.add({get_field<std::string>(rows[i], "language", where),
                  get_field<std::string>(rows[i], "vowel", where)},
                 get_field<Vector>(rows[i], "vector", where));
    }
    require(!corpus.vectors.empty(), path.string() + ": empty vowel corpus");
    return corpus;
  }
};

// ---------------------------------------------------------------------------
// K-means

/// Portable uniform draw in [0, 1) from a 64-bit Mersenne Twister.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

inline double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  return std::sqrt(squared_distance(a, b));
}

struct KMeansResult {
  std::vector<Vector> centroids;
  std::vector<std::size_t> assignment;
  std::size_t iterations = 0;
};

/// Lloyd iterations from k-means++ seeding, run until the assignment stops
/// changing or `max_iterations` passes. Deterministic for a fixed seed.
/// Assignment ties go to the lower centroid index; an empty cluster takes the
/// point farthest from its current centroid.
inline KMeansResult kmeans_full(std::span<const Vector> points, std::size_t k, std::uint64_t seed,
                                std::size_t max_iterations = 300) {
  require(k >= 1, "k must be at least 1");
  require(points.size() >= k, "kmeans needs at least k=" + std::to_string(k) + " vectors, got " +
                                  std::to_string(points.size()));
  const std::size_t n = points.size();
  const std::size_t dim = points.front().size();
  for (const auto& p : points) require(p.size() == dim, "kmeans vectors differ in dimension");

  std::mt19937_64 rng(seed);
  KMeansResult out;

  // k-means++ seeding.
  std::vector<std::size_t> chosen;
  chosen.push_back(static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)));
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  while (chosen.size() < k) {
    const auto& last = points[chosen.back()];
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(points[i], last));
      total += d2[i];
    }
    std::size_t pick = n;
    if (total > 0.0) {
      double target = uniform01(rng) * total;
      for (std::size_t i = 0; i < n; ++i) {
        if (d2[i] <= 0.0) continue;
        pick = i;
        if (target < d2[i]) break;
        target -= d2[i];
      }
    } else {
      // Every point coincides with a chosen center: take the first unchosen index.
      for (std::size_t i = 0; i < n && pick == n; ++i)
        if (std::find(chosen.begin(), chosen.end(), i) == chosen.end()) pick = i;
    }
    chosen.push_back(pick);
  }
  for (std::size_t c : chosen) out.centroids.push_back(points[c]);

  out.assignment.assign(n, k);
  for (std::size_t iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    std::vector<double> dist(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = squared_distance(points[i], out.centroids[0]);
      for (std::size_t c = 1; c < k; ++c) {
        const double d = squared_distance(points[i], out.centroids[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      dist[i] = best_d;
      if (out.assignment[i] != best) {
        out.assignment[i] = best;
        changed = true;
      }
    }

    std::vector<std::size_t> counts(k, 0);
    for (std::size_t a : out.assignment) ++counts[a];
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i)
        if (counts[out.assignment[i]] > 1 && (far == n || dist[i] > dist[far])) far = i;
      if (far == n) continue;
      --counts[out.assignment[far]];
      out.assignment[far] = c;
      dist[far] = 0.0;
      ++counts[c];
      changed = true;
    }

    ++out.iterations;
    if (!changed && iter > 0) break;

    std::vector<Vector> sums(k, Vector(dim, 0.0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t d = 0; d < dim; ++d) sums[out.assignment[i]][d] += points[i][d];
    for (std::size_t c = 0; c < k; ++c)
      for (std::size_t d = 0; d < dim; ++d)
        out.centroids[c][d] = sums[c][d] / static_cast<double>(counts[c]);
  }
  return out;
}

inline std::vector<Vector> kmeans(std::span<const Vector> points, std::size_t k = 5,
                                  std::uint64_t seed = 0) {
  return kmeans_full(points, k, seed).centroids;
}

/// Elementwise mean of the centroids.
inline Vector averaged_centroid(std::span<const Vector> centroids) {
  require(!centroids.empty(), "averaged_centroid needs at least one centroid");
  const std::size_t dim = centroids.front().size();
  Vector mu(dim, 0.0);
  for (const auto& c : centroids) {
    require(c.size() == dim, "centroids differ in dimension");
    for (std::size_t d = 0; d < dim; ++d) mu[d] += c[d];
  }
  for (double& x : mu) x /= static_cast<double>(centroids.size());
  return mu;
}

// ---------------------------------------------------------------------------
// Distance matrix

struct VowelDistanceMatrix {
  std::string source_language;
  std::string target_language;
  std::vector<std::string> source_vowels;
  std::vector<std::string> target_vowels;
  std::vector<double> d;  // row-major, source x target
  double null_cost = 0.0;

  std::size_t rows() const noexcept { return source_vowels.size(); }
  std::size_t cols() const noexcept { return target_vowels.size(); }
  double at(std::size_t m, std::size_t n) const noexcept { return d[m * cols() + n]; }

  double mean_entry() const {
    require(!d.empty(), "empty distance matrix");
    double acc = 0.0;
    for (double x : d) acc += x;
    return acc / static_cast<double>(d.size());
  }
};

inline VowelDistanceMatrix build_distance_matrix(std::span<const Vector> source_mus,
                                                 std::span<const Vector> target_mus,
                                                 double null_cost = 0.0) {
  require(!source_mus.empty() && !target_mus.empty(), "distance matrix needs vowels on both sides");
  require(std::isfinite(null_cost) && null_cost >= 0.0, "null_cost must be finite and >= 0");
  const std::size_t dim = source_mus.front().size();
  for (const auto& v : source_mus) require(v.size() == dim, "centroid dimension mismatch");
  for (const auto& v : target_mus) require(v.size() == dim, "centroid dimension mismatch");
  VowelDistanceMatrix m;
  m.source_vowels.resize(source_mus.size());
  m.target_vowels.resize(target_mus.size());
  m.d.reserve(source_mus.size() * target_mus.size());
  for (const auto& s : source_mus)
    for (const auto& t : target_mus) m.d.push_back(euclidean_distance(s, t));
  m.null_cost = null_cost;
  return m;
}

/// How the cost of matching a null frame against a vowel frame is chosen.
struct NullCostPolicy {
  enum class Kind { mean_entry, constant } kind = Kind::mean_entry;
  double value = 0.0;

  static NullCostPolicy parse(const std::string& text) {
    if (text == "mean") return {};
    try {
      std::size_t used = 0;
      const double v = std::stod(text, &used);
      if (used == text.size() && std::isfinite(v) && v >= 0.0) return {Kind::constant, v};
    } catch (const std::exception&) {
    }
    fail(ErrorCode::invalid_input, "null cost policy must be \"mean\" or a non-negative number");
  }

  std::string to_string() const { return kind == Kind::mean_entry ? "mean" : format_sig9(value); }
};

struct VowelMapOptions {
  std::size_t k = 5;
  std::uint64_t seed = 0;
  NullCostPolicy null_cost;
  std::string source_language;  // empty: first language in the corpus
  std::string target_language;  // empty: second language (or the first again)
};

/// Per-vowel K-means, centroid average, then pairwise distances.
inline VowelDistanceMatrix build_vowel_map(const VowelVectorCorpus& corpus,
                                           const VowelMapOptions& options = {}) {
  require(!corpus.languages.empty(), "empty vowel corpus");
  const std::string src = options.source_language.empty() ? corpus.languages.front()
                                                          : options.source_language;
  const std::string tgt = !options.target_language.empty() ? options.target_language
                          : corpus.languages.size() > 1    ? corpus.languages[1]
                                                           : corpus.languages.front();
  auto centroids_for = [&](const std::string& language, std::vector<std::string>& symbols) {
    std::vector<Vector> mus;
    for (const auto& key : corpus.vowels_of(language)) {
      const auto& vecs = corpus.vectors.at(key);
      require(vecs.size() >= options.k, "vowel " + key.language + "/" + key.symbol + " has " +
                                            std::to_string(vecs.size()) + " vectors, needs k=" +
                                            std::to_string(options.k));
      mus.push_back(averaged_centroid(kmeans(vecs, options.k, options.seed)));
      symbols.push_back(key.symbol);
    }
    require(!mus.empty(), "no vowels for language \"" + language + "\" in corpus");
    return mus;
  };
  std::vector<std::string> src_symbols, tgt_symbols;
  const auto src_mus = centroids_for(src, src_symbols);
  const auto tgt_mus = centroids_for(tgt, tgt_symbols);
  auto m = build_distance_matrix(src_mus, tgt_mus);
  m.source_language = src;
  m.target_language = tgt;
  m.source_vowels = std::move(src_symbols);
  m.target_vowels = std::move(tgt_symbols);
  m.null_cost = options.null_cost.kind == NullCostPolicy::Kind::mean_entry ? m.mean_entry()
                                                                           : options.null_cost.value;
  return m;
}

// ---------------------------------------------------------------------------
// CSV export / import with a JSON sidecar

inline std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        out.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else if (c != '\r') {
      out.back() += c;
    }
  }
  return out;
}

/// Header row of target vowels (first cell names the language pair), then
/// one row per source vowel. Entries carry 9 significant digits.
inline std::string matrix_to_csv(const VowelDistanceMatrix& m) {
  std::string out = csv_escape(m.source_language + "\\" + m.target_language);
  for (const auto& t : m.target_vowels) out += "," + csv_escape(t);
  out += "\n";
  for (std::size_t r = 0; r < m.rows(); ++r) {
    out += csv_escape(m.source_vowels[r]);
    for (std::size_t c = 0; c < m.cols(); ++c) out += "," + format_sig9(m.at(r, c));
    out += "\n";
  }
  return out;
}

struct VowelMapSidecar {
  double null_cost = 0.0;
  std::size_t k = 5;
  std::uint64_t seed = 0;
  std::string null_cost_policy = "mean";
  std::string source_language;
  std::string target_language;
};

inline json to_json(const VowelMapSidecar& s) {
  return {{"null_cost", sig9(s.null_cost)},
          {"k", s.k},
          {"seed", s.seed},
          {"null_cost_policy", s.null_cost_policy},
          {"source_language", s.source_language},
          {"target_language", s.target_language}};
}

inline std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
  auto p = csv;
  return p.replace_extension(".json");
}

inline void save_vowel_map(const std::filesystem::path& csv_path, const VowelDistanceMatrix& m,
                           const VowelMapOptions& options) {
  write_text_file(csv_path, matrix_to_csv(m));
  write_text_file(sidecar_path(csv_path),
                  dump_report(to_json(VowelMapSidecar{m.null_cost, options.k, options.seed,
                                                      options.null_cost.to_string(),
                                                      m.source_language, m.target_language})));
}

inline VowelDistanceMatrix load_vowel_map(const std::filesystem::path& csv_path) {
  const std::string origin = csv_path.string();
  std::istringstream in(read_text_file(csv_path));
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), origin + ": empty matrix file");
  auto header = csv_split(line);
  require(header.size() >= 2, origin + ": header needs at least one target vowel");
  VowelDistanceMatrix m;
  m.target_vowels.assign(header.begin() + 1, header.end());
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \r") == std::string::npos) continue;
    auto cells = csv_split(line);
    require(cells.size() == header.size(), origin + ": ragged row for " + cells.front());
    m.source_vowels.push_back(cells.front());
    for (std::size_t c = 1; c < cells.size(); ++c) {
      double v = 0.0;
      try {
        v = std::stod(cells[c]);
      } catch (const std::exception&) {
        fail(ErrorCode::invalid_input, origin + ": bad number \"" + cells[c] + "\"");
      }
      require(std::isfinite(v) && v >= 0.0, origin + ": distances must be finite and >= 0");
      m.d.push_back(v);
    }
  }
  require(!m.source_vowels.empty(), origin + ": matrix has no rows");

  const json side = read_json_file(sidecar_path(csv_path));
  m.null_cost = get_field<double>(side, "null_cost", sidecar_path(csv_path).string());
  m.source_language = side.value("source_language", std::string{});
  m.target_language = side.value("target_language", std::string{});
  if (m.source_language.empty() || m.target_language.empty()) {
    const auto pos = header.front().find('\\');
    require(pos != std::string::npos, origin + ": languages missing from sidecar and header");
    m.source_language = header.front().substr(0, pos);
    m.target_language = header.front().substr(pos + 1);
  }
  require(std::isfinite(m.null_cost) && m.null_cost >= 0.0, origin + ": null_cost must be >= 0");
  return m;
}

}  // namespace pstts
