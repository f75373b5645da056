#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace gov2vec {

struct RawDocument {
  std::string id;
  std::string text;
  std::vector<std::string> tags;
};

struct TokenizedDocument {
  std::string id;
  std::vector<std::string> tokens;
  std::vector<std::string> tags;

  friend bool operator==(const TokenizedDocument&, const TokenizedDocument&) = default;
};

using StopWords = std::unordered_set<std::string>;

// The SMART stop list (571 entries) compiled into the library.
const StopWords& default_stopwords();
// One word per line; blank lines and lines starting with '#' are skipped.
StopWords load_stopwords(const std::filesystem::path& path);

// Strips HTML markup and entities, drops whitespace-delimited chunks that contain
// a digit, splits the rest on non-alphabetic characters, lower-cases, and removes
// stop words. Non-ASCII code points are kept as letters except for Unicode
// whitespace and punctuation blocks.
std::vector<std::string> tokenize(std::string_view text, const StopWords& stopwords);

TokenizedDocument tokenize_document(const RawDocument& doc, const StopWords& stopwords);

struct VocabEntry {
  std::string word;
  std::uint64_t count = 0;

  friend bool operator==(const VocabEntry&, const VocabEntry&) = default;
};

inline constexpr std::size_t kDefaultAnalysisSize = 50000;

// Retained words ordered by count descending, then word ascending. Index i in
// this ordering is the word id used by the model matrices.
class Vocabulary {
 public:
  Vocabulary() = default;
  // Entries are sorted into canonical order; throws EmptyVocabulary when empty.
  explicit Vocabulary(std::vector<VocabEntry> entries,
                      std::size_t analysis_size = kDefaultAnalysisSize);

  std::size_t size() const noexcept { return entries_.size(); }
  // N: the size of the most-frequent analysis subset, never larger than size().
  std::size_t analysis_size() const noexcept { return analysis_size_; }
  void set_analysis_size(std::size_t n);

  const VocabEntry& operator[](std::size_t i) const noexcept { return entries_[i]; }
  const std::vector<VocabEntry>& entries() const noexcept { return entries_; }
  std::optional<std::uint32_t> find(std::string_view word) const;
  std::uint32_t index_of(std::string_view word) const;  // throws UnknownWord
  bool contains(std::string_view word) const { return find(word).has_value(); }

  std::uint64_t total_count() const noexcept { return total_count_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.entries_ == b.entries_ && a.analysis_size_ == b.analysis_size_;
  }

 private:
  std::vector<VocabEntry> entries_;
  std::unordered_map<std::string, std::uint32_t> index_;
  std::size_t analysis_size_ = 0;
  std::uint64_t total_count_ = 0;
};

// Counts after all tokenizer removals. Words below min_count are dropped.
Vocabulary build_vocab(std::span<const TokenizedDocument> docs, std::uint64_t min_count = 2);

struct FilterResult {
  std::vector<TokenizedDocument> docs;
  std::size_t dropped = 0;
};

FilterResult filter_corpus(std::span<const TokenizedDocument> docs, const Vocabulary& vocab);

// --- files -----------------------------------------------------------------

// JSONL records {"id","text","tags":[...]}.
std::vector<RawDocument> read_raw_jsonl(std::istream& in);
std::vector<RawDocument> read_raw_jsonl(const std::filesystem::path& path);
// A directory of text files described by a JSONL manifest whose records are
// {"path": relative file, "id"?: string, "tags": [...]}. The id defaults to the file stem.
std::vector<RawDocument> read_raw_directory(const std::filesystem::path& dir,
                                            const std::filesystem::path& manifest);
void write_raw_jsonl(std::ostream& out, std::span<const RawDocument> docs);

// JSONL records {"id","tokens":[...],"tags":[...]}.
std::vector<TokenizedDocument> read_corpus_jsonl(std::istream& in);
std::vector<TokenizedDocument> read_corpus_jsonl(const std::filesystem::path& path);
void write_corpus_jsonl(std::ostream& out, std::span<const TokenizedDocument> docs);

// Accepts either record shape; raw records are tokenized with the given stop words.
std::vector<TokenizedDocument> read_any_corpus(const std::filesystem::path& path,
                                               const StopWords& stopwords);

void write_vocab_tsv(std::ostream& out, const Vocabulary& vocab);
Vocabulary read_vocab_tsv(std::istream& in);

}  // namespace gov2vec
