#pragma once

// Helpers shared by the unit and acceptance suites: random models and the
// independent oracles the implementation is checked against.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "gov2vec/query.hpp"
#include "gov2vec/random.hpp"
#include "gov2vec/trainer.hpp"

namespace gov2vec::testing {

inline Vocabulary random_vocab(std::size_t m, Rng& rng) {
  std::vector<VocabEntry> entries;
  for (std::size_t i = 0; i < m; ++i) {
    entries.push_back({"w" + std::to_string(i), static_cast<std::uint64_t>(uniform_int(rng, 2, 500))});
  }
  return Vocabulary(std::move(entries));
}

template <typename T>
Matrix<T> random_matrix(std::size_t rows, std::size_t cols, double scale, Rng& rng) {
  Matrix<T> m(rows, cols);
  for (auto& x : m.data()) x = static_cast<T>(uniform_real(rng, -scale, scale));
  return m;
}

inline EmbeddingModel random_model(std::size_t m, std::size_t s, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  EmbeddingModel model;
  model.vocab = random_vocab(m, rng);
  model.tree = HuffmanTree(model.vocab);
  for (std::size_t i = 0; i < s; ++i) model.sources.push_back({"g" + std::to_string(i), static_cast<std::int64_t>(i)});
  model.params.words = random_matrix<float>(m, d, 1.0, rng);
  model.params.sources = random_matrix<float>(s, d, 1.0, rng);
  model.params.nodes = random_matrix<float>(m - 1, d, 1.0, rng);
  model.config.dim = static_cast<int>(d);
  return model;
}

// Minimum of sum(freq * depth) over every full binary tree with these leaves:
// cost(S) = sum(S) + min over splits of S into two nonempty parts.
inline std::uint64_t brute_force_min_code_cost(const std::vector<std::uint64_t>& freqs) {
  const std::size_t n = freqs.size();
  if (n <= 1) return 0;
  const std::uint32_t full = (1u << n) - 1;
  std::vector<std::uint64_t> sum(full + 1, 0), cost(full + 1, 0);
  for (std::uint32_t s = 1; s <= full; ++s) {
    const auto low = static_cast<std::uint32_t>(__builtin_ctz(s));
    sum[s] = sum[s & (s - 1)] + freqs[low];
    if ((s & (s - 1)) == 0) continue;
    std::uint64_t best = std::numeric_limits<std::uint64_t>::max();
    // Enumerate proper subsets containing the lowest bit so each split is seen once.
    const std::uint32_t rest = s & ~(1u << low);
    for (std::uint32_t sub = rest;; sub = (sub - 1) & rest) {
      const std::uint32_t a = sub | (1u << low), b = s & ~a;
      if (b != 0) best = std::min(best, cost[a] + cost[b]);
      if (sub == 0) break;
    }
    cost[s] = best + sum[s];
  }
  return cost[full];
}

// Central differences of f at x (perturbed in place and restored).
template <typename F>
double central_difference(double& x, double eps, F&& f) {
  const double orig = x;
  x = orig + eps;
  const double up = f();
  x = orig - eps;
  const double down = f();
  x = orig;
  return (up - down) / (2 * eps);
}

inline double relative_error(double a, double b) {
  // The floor keeps near-zero components from amplifying finite-difference roundoff.
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-4});
}

// Exhaustive scan for nearest words: recomputes every cosine from scratch.
inline std::vector<WordHit> brute_force_nearest(const EmbeddingModel& model, const QuerySpec& spec) {
  const std::size_t d = model.dim();
  std::vector<double> q(d, 0.0);
  std::set<std::string> exclude;
  for (const auto& t : spec.terms) {
    std::span<const float> row = t.kind == QueryTerm::Kind::kWord
                                     ? model.word_vector(model.vocab.index_of(t.id))
                                     : model.source_vector(model.source_index(t.id));
    for (std::size_t i = 0; i < d; ++i) q[i] += t.sign * static_cast<double>(row[i]);
    if (t.kind == QueryTerm::Kind::kWord) exclude.insert(t.id);
  }
  for (auto& x : q) x /= static_cast<double>(spec.terms.size());
  const std::size_t pool = std::min(spec.pool.value_or(model.vocab.analysis_size()), model.vocab.size());
  std::vector<WordHit> all;
  for (std::size_t w = 0; w < pool; ++w) {
    const auto& word = model.vocab[w].word;
    if (exclude.count(word)) continue;
    const auto row = model.word_vector(static_cast<std::uint32_t>(w));
    double ab = 0, aa = 0, bb = 0;
    for (std::size_t i = 0; i < d; ++i) {
      ab += row[i] * q[i];
      aa += static_cast<double>(row[i]) * row[i];
      bb += q[i] * q[i];
    }
    all.push_back({word, ab / std::sqrt(aa * bb)});
  }
  std::sort(all.begin(), all.end(), [](const WordHit& a, const WordHit& b) {
    return a.similarity != b.similarity ? a.similarity > b.similarity : a.word < b.word;
  });
  std::vector<WordHit> out;
  for (const auto& h : all) {
    if (h.similarity > spec.threshold) out.push_back(h);
  }
  if (spec.top_k > 0 && out.size() > spec.top_k) out.resize(spec.top_k);
  return out;
}

inline bool same_hits(const std::vector<WordHit>& a, const std::vector<WordHit>& b, double tol = 1e-12) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].word != b[i].word || std::abs(a[i].similarity - b[i].similarity) > tol) return false;
  }
  return true;
}

inline std::vector<QueryTerm> random_terms(const EmbeddingModel& model, Rng& rng, std::size_t count) {
  std::vector<QueryTerm> terms;
  for (std::size_t i = 0; i < count; ++i) {
    QueryTerm t;
    t.sign = uniform01(rng) < 0.5 ? -1 : 1;
    if (uniform01(rng) < 0.35) {
      t.kind = QueryTerm::Kind::kSource;
      t.id = model.sources[static_cast<std::size_t>(uniform_int(rng, 0, model.sources.size() - 1))].id;
    } else {
      t.kind = QueryTerm::Kind::kWord;
      t.id = model.vocab[static_cast<std::size_t>(uniform_int(rng, 0, model.vocab.size() - 1))].word;
    }
    terms.push_back(std::move(t));
  }
  return terms;
}

}  // namespace gov2vec::testing
