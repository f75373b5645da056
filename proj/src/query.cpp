#include "gov2vec/query.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "gov2vec/error.hpp"
#include "json.hpp"

namespace gov2vec {

void QuerySpec::validate() const {
  if (terms.empty()) throw InvalidArgument("query needs at least one term");
  for (const auto& t : terms) {
    if (t.sign != 1 && t.sign != -1) throw InvalidArgument("query term sign must be +1 or -1");
    if (t.id.empty()) throw InvalidArgument("query term with empty identifier");
  }
  if (!(threshold >= 0.0 && threshold < 1.0)) throw InvalidArgument("threshold must lie in [0, 1)");
  if (pool && *pool == 0) throw InvalidArgument("candidate pool must be >= 1");
}

std::vector<QueryTerm> parse_query(std::string_view expr) {
  std::vector<QueryTerm> terms;
  std::istringstream in{std::string(expr)};
  std::string tok;
  while (in >> tok) {
    QueryTerm t;
    std::string_view body = tok;
    if (body.front() == '+' || body.front() == '-') {
      t.sign = body.front() == '-' ? -1 : 1;
      body.remove_prefix(1);
    }
    const auto colon = body.find(':');
    if (colon == std::string_view::npos) throw InvalidArgument("query term '" + tok + "' lacks a kind prefix");
    const auto kind = body.substr(0, colon);
    if (kind == "word") {
      t.kind = QueryTerm::Kind::kWord;
    } else if (kind == "gov" || kind == "source") {
      t.kind = QueryTerm::Kind::kSource;
    } else {
      throw InvalidArgument("unknown query term kind '" + std::string(kind) + "'");
    }
    t.id = std::string(body.substr(colon + 1));
    if (t.id.empty()) throw InvalidArgument("query term '" + tok + "' has an empty identifier");
    terms.push_back(std::move(t));
  }
  if (terms.empty()) throw InvalidArgument("empty query expression");
  return terms;
}

std::string format_query(std::span<const QueryTerm> terms) {
  std::string out;
  for (const auto& t : terms) {
    if (!out.empty()) out += ' ';
    out += t.sign < 0 ? '-' : '+';
    out += t.kind == QueryTerm::Kind::kWord ? "word:" : "gov:";
    out += t.id;
  }
  return out;
}

namespace {
template <typename T>
double cosine_impl(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size()) throw InvalidArgument("cosine of vectors with different dimensions");
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += static_cast<double>(a[i]) * b[i];
    aa += static_cast<double>(a[i]) * a[i];
    bb += static_cast<double>(b[i]) * b[i];
  }
  if (aa == 0.0 || bb == 0.0) throw ZeroVector();
  return std::clamp(ab / (std::sqrt(aa) * std::sqrt(bb)), -1.0, 1.0);
}

std::set<std::string_view> query_words(std::span<const QueryTerm> terms) {
  std::set<std::string_view> out;
  for (const auto& t : terms) {
    if (t.kind == QueryTerm::Kind::kWord) out.insert(t.id);
  }
  return out;
}

// Cosine between a float row and a double query whose norm is precomputed.
double row_cosine(std::span<const float> row, std::span<const double> q, double q_norm) {
  double ab = 0, aa = 0;
  for (std::size_t i = 0; i < row.size(); ++i) {
    ab += row[i] * q[i];
    aa += static_cast<double>(row[i]) * row[i];
  }
  if (aa == 0.0) return 0.0;
  return std::clamp(ab / (std::sqrt(aa) * q_norm), -1.0, 1.0);
}

std::size_t pool_size(const EmbeddingModel& model, const QuerySpec& spec) {
  return std::min(spec.pool.value_or(model.vocab.analysis_size()), model.vocab.size());
}
}  // namespace

double cosine(std::span<const float> a, std::span<const float> b) { return cosine_impl(a, b); }
double cosine(std::span<const double> a, std::span<const double> b) { return cosine_impl(a, b); }

bool ComposedQuery::degenerate() const noexcept {
  return std::all_of(vector.begin(), vector.end(), [](double x) { return x == 0.0; });
}

ComposedQuery compose_query(const EmbeddingModel& model, std::span<const QueryTerm> terms) {
  if (terms.empty()) throw InvalidArgument("query needs at least one term");
  ComposedQuery q;
  q.vector.assign(model.dim(), 0.0);
  for (const auto& t : terms) {
    std::span<const float> row;
    if (t.kind == QueryTerm::Kind::kWord) {
      const auto w = model.vocab.find(t.id);
      if (!w) throw UnknownIdentifier("word:" + t.id);
      row = model.word_vector(*w);
    } else {
      const auto s = model.find_source(t.id);
      if (!s) throw UnknownIdentifier("gov:" + t.id);
      row = model.source_vector(*s);
    }
    for (std::size_t i = 0; i < row.size(); ++i) q.vector[i] += t.sign * static_cast<double>(row[i]);
  }
  const double inv = 1.0 / static_cast<double>(terms.size());
  for (auto& x : q.vector) x *= inv;
  return q;
}

std::vector<WordHit> nearest_words(const EmbeddingModel& model, const QuerySpec& spec) {
  spec.validate();
  const auto q = compose_query(model, spec.terms);
  if (q.degenerate()) throw DegenerateQuery();
  double qq = 0;
  for (double x : q.vector) qq += x * x;
  const double q_norm = std::sqrt(qq);

  const auto excluded = query_words(spec.terms);
  std::vector<WordHit> hits;
  const std::size_t n = pool_size(model, spec);
  for (std::uint32_t w = 0; w < n; ++w) {
    const auto& word = model.vocab[w].word;
    if (excluded.contains(word)) continue;
    const double sim = row_cosine(model.word_vector(w), q.vector, q_norm);
    if (sim > spec.threshold) hits.push_back({word, sim});
  }
  std::sort(hits.begin(), hits.end(), [](const WordHit& a, const WordHit& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.word < b.word;
  });
  if (spec.top_k > 0 && hits.size() > spec.top_k) hits.resize(spec.top_k);
  return hits;
}

void EnsembleAggregator::add(std::span<const WordHit> hits) {
  ++models_;
  for (const auto& h : hits) {
    auto& t = tallies_[h.word];
    ++t.count;
    t.sum += h.similarity;
  }
}

void EnsembleAggregator::merge(const EnsembleAggregator& other) {
  models_ += other.models_;
  for (const auto& [word, t] : other.tallies_) {
    auto& mine = tallies_[word];
    mine.count += t.count;
    mine.sum += t.sum;
  }
}

std::vector<RankedWord> EnsembleAggregator::ranking(std::size_t top_k) const {
  std::vector<RankedWord> out;
  out.reserve(tallies_.size());
  for (const auto& [word, t] : tallies_) {
    out.push_back({word, t.count, t.sum / static_cast<double>(t.count)});
  }
  std::sort(out.begin(), out.end(), [](const RankedWord& a, const RankedWord& b) {
    if (a.model_count != b.model_count) return a.model_count > b.model_count;
    if (a.mean_similarity != b.mean_similarity) return a.mean_similarity > b.mean_similarity;
    return a.word < b.word;
  });
  if (top_k > 0 && out.size() > top_k) out.resize(top_k);
  return out;
}

std::vector<RankedWord> ensemble_query(std::span<const EmbeddingModel> models, const QuerySpec& spec) {
  QuerySpec per_model = spec;
  per_model.top_k = 0;
  EnsembleAggregator agg;
  for (const auto& m : models) agg.add(nearest_words(m, per_model));
  return agg.ranking(spec.top_k);
}

double normalized_source_similarity(const EmbeddingModel& model, std::string_view source,
                                    const QuerySpec& word_spec) {
  for (const auto& t : word_spec.terms) {
    if (t.kind != QueryTerm::Kind::kWord) {
      throw InvalidArgument("normalized similarity takes word terms only");
    }
  }
  const auto s = model.find_source(source);
  if (!s) throw UnknownIdentifier("gov:" + std::string(source));
  const auto q = compose_query(model, word_spec.terms);
  if (q.degenerate()) throw DegenerateQuery();
  const auto u = model.source_vector(*s);
  std::vector<double> ud(u.begin(), u.end());
  const double sim = cosine(std::span<const double>(ud), std::span<const double>(q.vector));

  double un = 0;
  for (double x : ud) un += x * x;
  if (un == 0.0) throw ZeroVector();
  un = std::sqrt(un);
  const std::size_t n = pool_size(model, word_spec);
  double sum = 0.0;
  for (std::uint32_t w = 0; w < n; ++w) sum += row_cosine(model.word_vector(w), ud, un);
  return sim - sum / static_cast<double>(n);
}

std::vector<LabeledVector> export_embeddings(const EmbeddingModel& model) {
  std::vector<LabeledVector> out;
  out.reserve(model.vocab.size() + model.sources.size());
  for (std::uint32_t w = 0; w < model.vocab.size(); ++w) {
    const auto r = model.word_vector(w);
    out.push_back({"word:" + model.vocab[w].word, {r.begin(), r.end()}});
  }
  for (std::uint32_t s = 0; s < model.sources.size(); ++s) {
    const auto r = model.source_vector(s);
    out.push_back({"gov:" + model.sources[s].id, {r.begin(), r.end()}});
  }
  return out;
}

std::string format_number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string format_number(float v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

void write_embeddings_tsv(std::ostream& out, std::span<const LabeledVector> rows) {
  for (const auto& r : rows) {
    out << r.label;
    for (float x : r.values) out << '\t' << format_number(x);
    out << '\n';
  }
}

std::vector<LabeledVector> read_embeddings_tsv(std::istream& in) {
  std::vector<LabeledVector> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    LabeledVector r;
    std::size_t pos = line.find('\t');
    r.label = line.substr(0, pos);
    while (pos != std::string::npos) {
      const std::size_t next = line.find('\t', pos + 1);
      const char* first = line.data() + pos + 1;
      const char* last = line.data() + (next == std::string::npos ? line.size() : next);
      float v;
      auto [p, ec] = std::from_chars(first, last, v);
      if (ec != std::errc{} || p != last) throw FormatError("embedding row '" + r.label + "': bad value");
      r.values.push_back(v);
      pos = next;
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_ranking_tsv(std::ostream& out, std::span<const RankedWord> ranking) {
  out << "word\tmodel_count\tmean_similarity\n";
  for (const auto& r : ranking) {
    out << r.word << '\t' << r.model_count << '\t' << format_number(r.mean_similarity) << '\n';
  }
}

void write_ranking_json(std::ostream& out, std::span<const RankedWord> ranking) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : ranking) {
    j.push_back({{"word", r.word}, {"model_count", r.model_count}, {"mean_similarity", r.mean_similarity}});
  }
  out << j.dump(2) << '\n';
}

}  // namespace gov2vec
