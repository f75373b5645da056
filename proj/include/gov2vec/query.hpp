#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gov2vec/trainer.hpp"

namespace gov2vec {

struct QueryTerm {
  enum class Kind : std::uint8_t { kWord, kSource };
  Kind kind = Kind::kWord;
  std::string id;
  int sign = +1;

  friend bool operator==(const QueryTerm&, const QueryTerm&) = default;
};

inline constexpr double kDefaultThreshold = 0.35;

struct QuerySpec {
  std::vector<QueryTerm> terms;
  double threshold = kDefaultThreshold;
  // Candidate pool N; unset means the vocabulary's analysis size.
  std::optional<std::size_t> pool;
  // 0 keeps every retained word.
  std::size_t top_k = 20;

  void validate() const;  // throws InvalidArgument
};

// Whitespace-separated signed terms: `+word:climate -gov:obama`. A missing sign means '+'.
std::vector<QueryTerm> parse_query(std::string_view expr);
std::string format_query(std::span<const QueryTerm> terms);

double cosine(std::span<const float> a, std::span<const float> b);
double cosine(std::span<const double> a, std::span<const double> b);

struct ComposedQuery {
  std::vector<double> vector;
  bool degenerate() const noexcept;
};

// (1/W) * sum of signed word/source rows. Throws UnknownIdentifier.
ComposedQuery compose_query(const EmbeddingModel& model, std::span<const QueryTerm> terms);

struct WordHit {
  std::string word;
  double similarity = 0.0;
  friend bool operator==(const WordHit&, const WordHit&) = default;
};

// Cosine neighbours among the pool's most frequent words, query words excluded,
// similarity strictly above the threshold, sorted by similarity then word.
std::vector<WordHit> nearest_words(const EmbeddingModel& model, const QuerySpec& spec);

struct RankedWord {
  std::string word;
  std::size_t model_count = 0;
  double mean_similarity = 0.0;
  friend bool operator==(const RankedWord&, const RankedWord&) = default;
};

// Folds per-model retained lists into ensemble rankings.
class EnsembleAggregator {
 public:
  void add(std::span<const WordHit> hits);
  void merge(const EnsembleAggregator& other);
  std::size_t models() const noexcept { return models_; }
  // Count descending, mean similarity descending, word ascending; 0 = no truncation.
  std::vector<RankedWord> ranking(std::size_t top_k) const;

 private:
  struct Tally {
    std::size_t count = 0;
    double sum = 0.0;
  };
  std::map<std::string, Tally, std::less<>> tallies_;
  std::size_t models_ = 0;
};

std::vector<RankedWord> ensemble_query(std::span<const EmbeddingModel> models, const QuerySpec& spec);

// cos(source, composed words) minus the source's mean cosine to the pool's words.
double normalized_source_similarity(const EmbeddingModel& model, std::string_view source,
                                    const QuerySpec& word_spec);

struct LabeledVector {
  std::string label;  // "word:<w>" or "gov:<id>"
  std::vector<float> values;
  friend bool operator==(const LabeledVector&, const LabeledVector&) = default;
};

std::vector<LabeledVector> export_embeddings(const EmbeddingModel& model);
// label<TAB>v1<TAB>...; floats written in shortest round-trip form.
void write_embeddings_tsv(std::ostream& out, std::span<const LabeledVector> rows);
std::vector<LabeledVector> read_embeddings_tsv(std::istream& in);

void write_ranking_tsv(std::ostream& out, std::span<const RankedWord> ranking);
void write_ranking_json(std::ostream& out, std::span<const RankedWord> ranking);

// Shortest decimal form that reads back to the same value.
std::string format_number(double v);
std::string format_number(float v);

}  // namespace gov2vec
