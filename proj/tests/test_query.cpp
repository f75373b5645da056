#include <sstream>

#include "doctest.h"
#include "gov2vec/error.hpp"
#include "gov2vec/query.hpp"
#include "support.hpp"

using namespace gov2vec;
using namespace gov2vec::testing;

namespace {

// Model whose rows are set by hand: words w0..w(m-1), sources g0..
EmbeddingModel tiny_model(const std::vector<std::vector<float>>& words,
                          const std::vector<std::vector<float>>& sources) {
  std::vector<VocabEntry> entries;
  for (std::size_t i = 0; i < words.size(); ++i) {
    entries.push_back({"w" + std::to_string(i), static_cast<std::uint64_t>(100 - i)});
  }
  EmbeddingModel m;
  m.vocab = Vocabulary(entries);
  m.tree = HuffmanTree(m.vocab);
  const std::size_t d = words.front().size();
  m.params.words = Matrix<float>(words.size(), d);
  for (std::size_t i = 0; i < words.size(); ++i) std::copy(words[i].begin(), words[i].end(), m.params.words.row(i).begin());
  m.params.sources = Matrix<float>(sources.size(), d);
  for (std::size_t i = 0; i < sources.size(); ++i) {
    std::copy(sources[i].begin(), sources[i].end(), m.params.sources.row(i).begin());
    m.sources.push_back({"g" + std::to_string(i), std::nullopt});
  }
  m.params.nodes = Matrix<float>(words.size() - 1, d);
  m.config.dim = static_cast<int>(d);
  return m;
}

QueryTerm word(std::string id, int sign = 1) { return {QueryTerm::Kind::kWord, std::move(id), sign}; }
QueryTerm gov(std::string id, int sign = 1) { return {QueryTerm::Kind::kSource, std::move(id), sign}; }

}  // namespace

TEST_CASE("cosine") {
  const std::vector<float> x{1, 0}, y{0, 1}, a{1, 2}, b{2, 4}, z{0, 0};
  CHECK(cosine(x, x) == 1.0);
  CHECK(cosine(x, y) == 0.0);
  CHECK(cosine(a, b) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(cosine(a, b) == cosine(b, a));
  CHECK_THROWS_AS(cosine(x, z), ZeroVector);
}

TEST_CASE("query expressions") {
  const auto t = parse_query("+word:climate +word:emissions +gov:house113 -gov:obama +word:economic -word:environmental");
  REQUIRE(t.size() == 6);
  CHECK(t[0] == word("climate"));
  CHECK(t[3] == gov("obama", -1));
  CHECK(t[5] == word("environmental", -1));
  CHECK(format_query(t) == "+word:climate +word:emissions +gov:house113 -gov:obama +word:economic -word:environmental");
  CHECK(parse_query("word:war")[0] == word("war"));
  CHECK_THROWS_AS(parse_query("+climate"), InvalidArgument);
  CHECK_THROWS_AS(parse_query("+tag:x"), InvalidArgument);
  CHECK_THROWS_AS(parse_query("   "), InvalidArgument);
  CHECK_THROWS_AS(parse_query("+word:"), InvalidArgument);
}

TEST_CASE("compose_query") {
  const auto m = tiny_model({{1, 0}, {0, 1}, {1, 1}}, {{2, 0}});
  auto q = compose_query(m, std::vector{word("w0"), word("w1", -1)});
  CHECK(q.vector == std::vector<double>{0.5, -0.5});
  q = compose_query(m, std::vector{word("w2")});
  CHECK(q.vector == std::vector<double>{1, 1});
  q = compose_query(m, std::vector{word("w2"), word("w2", -1)});
  CHECK(q.degenerate());
  q = compose_query(m, std::vector{gov("g0"), word("w1")});
  CHECK(q.vector == std::vector<double>{1, 0.5});

  try {
    compose_query(m, std::vector{word("w0"), gov("nobody")});
    FAIL("expected UnknownIdentifier");
  } catch (const UnknownIdentifier& e) {
    CHECK(e.identifier() == "gov:nobody");
  }
}

TEST_CASE("nearest_words rules") {
  const auto m = tiny_model({{1, 0}, {0.9f, 0.1f}, {0, 1}, {-1, 0}, {0.8f, 0.2f}}, {{1, 0}});
  QuerySpec spec;
  spec.terms = {word("w0")};
  auto hits = nearest_words(m, spec);
  REQUIRE(hits.size() == 2);
  CHECK(hits[0].word == "w1");
  CHECK(hits[1].word == "w4");
  for (const auto& h : hits) CHECK(h.word != "w0");

  spec.pool = 3;  // w0..w2 only
  hits = nearest_words(m, spec);
  REQUIRE(hits.size() == 1);
  CHECK(hits[0].word == "w1");

  spec.pool.reset();
  spec.top_k = 1;
  CHECK(nearest_words(m, spec).size() == 1);

  spec.terms = {word("w0"), word("w0", -1)};
  CHECK_THROWS_AS(nearest_words(m, spec), DegenerateQuery);

  spec.terms = {gov("g0")};
  spec.top_k = 0;
  hits = nearest_words(m, spec);
  CHECK(hits.front().word == "w0");  // sources are terms, never results

  spec.threshold = 1.0;
  CHECK_THROWS_AS(nearest_words(m, spec), InvalidArgument);
}

TEST_CASE("nearest_words ties break by word") {
  const auto m = tiny_model({{1, 0}, {0, 1}, {0, 1}, {1, 1}}, {{1, 0}});
  QuerySpec spec;
  spec.terms = {word("w3")};
  spec.threshold = 0.0;
  const auto hits = nearest_words(m, spec);
  REQUIRE(hits.size() == 3);
  CHECK(hits[0].word == "w0");
  CHECK(hits[1].word == "w1");
  CHECK(hits[2].word == "w2");
}

TEST_CASE("nearest_words matches the exhaustive scan") {
  int compared = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto m = random_model(200, 4, 12, seed);
    Rng rng(seed ^ 0xabc);
    QuerySpec spec;
    spec.terms = random_terms(m, rng, static_cast<std::size_t>(uniform_int(rng, 1, 6)));
    spec.threshold = uniform_real(rng, 0.0, 0.4);
    spec.top_k = static_cast<std::size_t>(uniform_int(rng, 0, 30));
    if (uniform01(rng) < 0.5) spec.pool = static_cast<std::size_t>(uniform_int(rng, 1, 250));
    if (compose_query(m, spec.terms).degenerate()) continue;
    CHECK(same_hits(nearest_words(m, spec), brute_force_nearest(m, spec)));
    ++compared;
  }
  CHECK(compared > 90);
}

TEST_CASE("nearest_words is invariant to positive scaling of the query") {
  auto m = random_model(150, 2, 8, 3);
  QuerySpec spec;
  spec.terms = {word(m.vocab[3].word)};
  spec.threshold = 0.1;
  const auto base = nearest_words(m, spec);
  // Scaling the only query row scales the composed vector.
  for (auto& x : m.params.words.row(3)) x *= 4.0f;
  const auto scaled = nearest_words(m, spec);
  REQUIRE(base.size() == scaled.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    CHECK(base[i].word == scaled[i].word);
    CHECK(base[i].similarity == doctest::Approx(scaled[i].similarity).epsilon(1e-12));
  }
}

TEST_CASE("high threshold on a random model retains little") {
  const auto m = random_model(200, 2, 30, 8);
  QuerySpec spec;
  spec.terms = {word(m.vocab[0].word), gov("g1", -1)};
  spec.threshold = 0.99;
  CHECK(nearest_words(m, spec).empty());
}

TEST_CASE("ensemble aggregation") {
  EnsembleAggregator agg;
  agg.add(std::vector<WordHit>{{"x", 0.5}});
  agg.add(std::vector<WordHit>{{"x", 0.6}, {"y", 0.4}});
  const auto r = agg.ranking(0);
  REQUIRE(r.size() == 2);
  CHECK(r[0].word == "x");
  CHECK(r[0].model_count == 2);
  CHECK(r[0].mean_similarity == doctest::Approx(0.55));
  CHECK(r[1] == RankedWord{"y", 1, 0.4});

  EnsembleAggregator left, right, whole;
  left.add(std::vector<WordHit>{{"a", 0.9}});
  right.add(std::vector<WordHit>{{"a", 0.5}, {"b", 0.8}});
  whole.add(std::vector<WordHit>{{"a", 0.9}});
  whole.add(std::vector<WordHit>{{"a", 0.5}, {"b", 0.8}});
  left.merge(right);
  CHECK(left.ranking(0) == whole.ranking(0));
  CHECK(left.models() == 2);
}

TEST_CASE("ensemble_query over identical and single models") {
  const auto m = random_model(120, 3, 10, 21);
  QuerySpec spec;
  spec.terms = {word(m.vocab[1].word), gov("g2")};
  spec.threshold = 0.2;
  spec.top_k = 15;
  const auto single = nearest_words(m, spec);

  const std::vector<EmbeddingModel> one{m};
  const auto r1 = ensemble_query(one, spec);
  REQUIRE(r1.size() == single.size());
  for (std::size_t i = 0; i < r1.size(); ++i) {
    CHECK(r1[i].word == single[i].word);
    CHECK(r1[i].model_count == 1);
    CHECK(r1[i].mean_similarity == single[i].similarity);
  }

  const std::vector<EmbeddingModel> five(5, m);
  const auto r5 = ensemble_query(five, spec);
  REQUIRE(r5.size() == single.size());
  for (std::size_t i = 0; i < r5.size(); ++i) {
    CHECK(r5[i].word == single[i].word);
    CHECK(r5[i].model_count == 5);
    CHECK(r5[i].mean_similarity > spec.threshold);
  }

  // A word above C in no model is absent.
  auto spec_all = spec;
  spec_all.top_k = 0;
  const auto all = ensemble_query(five, spec_all);
  for (const auto& h : brute_force_nearest(m, [&] { auto s = spec_all; s.threshold = -1.0; return s; }())) {
    const bool present = std::any_of(all.begin(), all.end(), [&](const RankedWord& r) { return r.word == h.word; });
    CHECK(present == (h.similarity > spec.threshold));
  }
}

TEST_CASE("normalized source similarity") {
  SUBCASE("equal similarities cancel") {
    const auto m = tiny_model({{1, 0}, {1, 0}, {2, 0}}, {{1, 1}});
    QuerySpec s;
    s.terms = {word("w0")};
    CHECK(normalized_source_similarity(m, "g0", s) == doctest::Approx(0.0));
  }
  SUBCASE("sign follows closeness relative to the average word") {
    const auto m = tiny_model({{1, 0}, {0, 1}, {-1, 0}}, {{1, 0.2f}});
    QuerySpec s;
    s.terms = {word("w0")};
    CHECK(normalized_source_similarity(m, "g0", s) > 0);
    s.terms = {word("w2")};
    CHECK(normalized_source_similarity(m, "g0", s) < 0);
  }
  SUBCASE("only word terms") {
    const auto m = tiny_model({{1, 0}, {0, 1}}, {{1, 0}});
    QuerySpec s;
    s.terms = {gov("g0")};
    CHECK_THROWS_AS(normalized_source_similarity(m, "g0", s), InvalidArgument);
    s.terms = {word("w0")};
    CHECK_THROWS_AS(normalized_source_similarity(m, "nobody", s), UnknownIdentifier);
  }
}

TEST_CASE("export_embeddings") {
  const auto m = tiny_model({{1, 2, 3}, {4, 5, 6}}, {{0.1f, -0.2f, 1e-7f}});
  const auto rows = export_embeddings(m);
  REQUIRE(rows.size() == 3);
  for (const auto& r : rows) CHECK(r.values.size() == 3);
  CHECK(rows[2].label == "gov:g0");
  std::set<std::string> labels;
  for (const auto& r : rows) labels.insert(r.label);
  CHECK(labels.size() == 3);

  const auto big = random_model(60, 4, 9, 77);
  const auto exported = export_embeddings(big);
  std::stringstream ss;
  write_embeddings_tsv(ss, exported);
  CHECK(read_embeddings_tsv(ss) == exported);
}

TEST_CASE("ranking output formats") {
  const std::vector<RankedWord> r{{"greenhouse", 3, 0.5}, {"ghg", 1, 0.375}};
  std::ostringstream tsv;
  write_ranking_tsv(tsv, r);
  CHECK(tsv.str() == "word\tmodel_count\tmean_similarity\ngreenhouse\t3\t0.5\nghg\t1\t0.375\n");
  std::ostringstream js;
  write_ranking_json(js, r);
  CHECK(js.str().find("\"greenhouse\"") != std::string::npos);
}
