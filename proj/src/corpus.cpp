#include "gov2vec/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_set>

#include "gov2vec/error.hpp"
#include "json.hpp"

namespace gov2vec {

using nlohmann::json;

namespace {

// Replaces markup tags and character entities with a space.
std::string strip_html(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c == '<' && i + 1 < text.size()) {
      const char n = text[i + 1];
      if (std::isalpha(static_cast<unsigned char>(n)) || n == '/' || n == '!' || n == '?') {
        const auto close = text.find('>', i + 1);
        if (close != std::string_view::npos) {
          out.push_back(' ');
          i = close + 1;
          continue;
        }
      }
    } else if (c == '&') {
      std::size_t j = i + 1;
      while (j < text.size() && j - i <= 12 &&
             (std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == '#')) {
        ++j;
      }
      if (j < text.size() && text[j] == ';' && j > i + 1) {
        out.push_back(' ');
        i = j + 1;
        continue;
      }
    }
    out.push_back(c);
    ++i;
  }
  return out;
}

constexpr char32_t kInvalid = 0xFFFD;

std::vector<char32_t> decode_utf8(std::string_view s) {
  std::vector<char32_t> out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    int len = 0;
    char32_t cp = 0;
    if (b0 < 0x80) {
      len = 1;
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
      len = 2;
      cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3;
      cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4;
      cp = b0 & 0x07;
    } else {
      out.push_back(kInvalid);
      ++i;
      continue;
    }
    if (i + len > s.size()) {
      out.push_back(kInvalid);
      ++i;
      continue;
    }
    bool ok = true;
    for (int k = 1; k < len; ++k) {
      const auto b = static_cast<unsigned char>(s[i + k]);
      if ((b & 0xC0) != 0x80) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (b & 0x3F);
    }
    if (!ok) {
      out.push_back(kInvalid);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

bool is_space(char32_t c) {
  return (c >= 0x09 && c <= 0x0D) || c == 0x20 || c == 0x85 || c == 0xA0 || c == 0x1680 ||
         (c >= 0x2000 && c <= 0x200A) || c == 0x2028 || c == 0x2029 || c == 0x202F ||
         c == 0x205F || c == 0x3000;
}

bool is_digit(char32_t c) {
  return (c >= '0' && c <= '9') || (c >= 0x0660 && c <= 0x0669) || (c >= 0x06F0 && c <= 0x06F9) ||
         (c >= 0x0966 && c <= 0x096F) || (c >= 0xFF10 && c <= 0xFF19) || c == 0xB2 || c == 0xB3 ||
         c == 0xB9 || c == 0xBC || c == 0xBD || c == 0xBE;
}

bool is_letter(char32_t c) {
  if (c < 0x80) return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
  if (c <= 0xBF) return c == 0xAA || c == 0xB5 || c == 0xBA;
  if (c == 0xD7 || c == 0xF7) return false;
  if (c >= 0x2000 && c <= 0x2BFF) return false;  // punctuation, symbols, arrows, math
  if (c >= 0x3000 && c <= 0x303F) return false;
  if (c >= 0xFE30 && c <= 0xFE4F) return false;
  if (c >= 0xFF00 && c <= 0xFF20) return false;
  if (c >= 0xFF3B && c <= 0xFF40) return false;
  if (c >= 0xFF5B && c <= 0xFF65) return false;
  if (c >= 0xD800 && c <= 0xDFFF) return false;
  if (c == kInvalid || c == 0xFEFF) return false;
  return !is_digit(c);
}

char32_t to_lower(char32_t c) {
  if (c >= 'A' && c <= 'Z') return c + 32;
  if (c < 0x80) return c;
  if ((c >= 0xC0 && c <= 0xDE && c != 0xD7) || (c >= 0x391 && c <= 0x3A9) ||
      (c >= 0x410 && c <= 0x42F)) {
    return c + 0x20;
  }
  if (c >= 0x400 && c <= 0x40F) return c + 0x50;
  if (c == 0x178) return 0xFF;
  if (c >= 0x100 && c <= 0x17F && c != 0x130 && c != 0x131 && c != 0x138 && c != 0x149) {
    const bool odd_lower = (c >= 0x139 && c <= 0x148) || (c >= 0x179 && c <= 0x17E);
    if (odd_lower) return (c % 2 == 1) ? c + 1 : c;
    return (c % 2 == 0) ? c + 1 : c;
  }
  return c;
}

std::string encode(std::span<const char32_t> cps) {
  std::string s;
  s.reserve(cps.size());
  for (char32_t c : cps) append_utf8(s, c);
  return s;
}

void check_document(const std::string& id, const std::vector<std::string>& tags) {
  if (id.empty()) throw FormatError("document with empty id");
  if (tags.empty()) throw FormatError("document '" + id + "' has no tags");
  for (const auto& t : tags) {
    if (t.empty()) throw FormatError("document '" + id + "' has an empty tag");
  }
}

json parse_line(const std::string& line, std::size_t lineno) {
  try {
    return json::parse(line);
  } catch (const json::exception& e) {
    throw FormatError("line " + std::to_string(lineno) + ": " + e.what());
  }
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

template <typename Doc>
void check_unique_ids(const std::vector<Doc>& docs) {
  std::unordered_set<std::string_view> seen;
  for (const auto& d : docs) {
    if (!seen.insert(d.id).second) throw FormatError("duplicate document id: " + d.id);
  }
}

std::vector<std::string> string_list(const json& j, const char* key, std::size_t lineno) {
  if (!j.contains(key) || !j[key].is_array()) {
    throw FormatError("line " + std::to_string(lineno) + ": missing array '" + key + "'");
  }
  return j[key].get<std::vector<std::string>>();
}

}  // namespace

StopWords load_stopwords(const std::filesystem::path& path) {
  auto in = open_in(path);
  StopWords out;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    out.insert(line);
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view text, const StopWords& stopwords) {
  const auto cps = decode_utf8(strip_html(text));
  std::vector<std::string> tokens;
  std::vector<char32_t> chunk;

  auto flush = [&] {
    if (chunk.empty()) return;
    if (std::any_of(chunk.begin(), chunk.end(), is_digit)) {
      chunk.clear();
      return;
    }
    for (auto& c : chunk) c = to_lower(c);
    // A whole chunk such as "ain't" may itself be listed as a stop word.
    auto first = std::find_if(chunk.begin(), chunk.end(), is_letter);
    auto last = std::find_if(chunk.rbegin(), chunk.rend(), is_letter).base();
    if (first < last && stopwords.contains(encode({&*first, static_cast<std::size_t>(last - first)}))) {
      chunk.clear();
      return;
    }
    auto it = chunk.begin();
    while (it != chunk.end()) {
      auto start = std::find_if(it, chunk.end(), is_letter);
      auto stop = std::find_if_not(start, chunk.end(), is_letter);
      if (start != stop) {
        auto word = encode({&*start, static_cast<std::size_t>(stop - start)});
        if (!stopwords.contains(word)) tokens.push_back(std::move(word));
      }
      it = stop;
    }
    chunk.clear();
  };

  for (char32_t c : cps) {
    if (is_space(c)) {
      flush();
    } else {
      chunk.push_back(c);
    }
  }
  flush();
  return tokens;
}

TokenizedDocument tokenize_document(const RawDocument& doc, const StopWords& stopwords) {
  return {doc.id, tokenize(doc.text, stopwords), doc.tags};
}

Vocabulary::Vocabulary(std::vector<VocabEntry> entries, std::size_t analysis_size)
    : entries_(std::move(entries)) {
  if (entries_.empty()) throw EmptyVocabulary();
  std::sort(entries_.begin(), entries_.end(), [](const VocabEntry& a, const VocabEntry& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.word < b.word;
  });
  index_.reserve(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (!index_.emplace(entries_[i].word, static_cast<std::uint32_t>(i)).second) {
      throw FormatError("duplicate vocabulary word: " + entries_[i].word);
    }
    total_count_ += entries_[i].count;
  }
  set_analysis_size(analysis_size);
}

void Vocabulary::set_analysis_size(std::size_t n) {
  if (n == 0) throw InvalidArgument("analysis subset size must be at least 1");
  analysis_size_ = std::min(n, entries_.size());
}

std::optional<std::uint32_t> Vocabulary::find(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::uint32_t Vocabulary::index_of(std::string_view word) const {
  if (auto i = find(word)) return *i;
  throw UnknownWord(std::string(word));
}

Vocabulary build_vocab(std::span<const TokenizedDocument> docs, std::uint64_t min_count) {
  if (min_count < 1) throw InvalidArgument("min_count must be positive");
  std::unordered_map<std::string, std::uint64_t> counts;
  for (const auto& d : docs) {
    for (const auto& t : d.tokens) ++counts[t];
  }
  std::vector<VocabEntry> kept;
  for (auto& [word, n] : counts) {
    if (n >= min_count) kept.push_back({word, n});
  }
  return Vocabulary(std::move(kept));
}

FilterResult filter_corpus(std::span<const TokenizedDocument> docs, const Vocabulary& vocab) {
  FilterResult out;
  out.docs.reserve(docs.size());
  for (const auto& d : docs) {
    TokenizedDocument kept{d.id, {}, d.tags};
    kept.tokens.reserve(d.tokens.size());
    for (const auto& t : d.tokens) {
      if (vocab.contains(t)) kept.tokens.push_back(t);
    }
    if (kept.tokens.empty()) {
      ++out.dropped;
    } else {
      out.docs.push_back(std::move(kept));
    }
  }
  return out;
}

std::vector<RawDocument> read_raw_jsonl(std::istream& in) {
  std::vector<RawDocument> docs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto j = parse_line(line, lineno);
    if (!j.contains("text") || !j["text"].is_string()) {
      throw FormatError("line " + std::to_string(lineno) + ": missing string 'text'");
    }
    RawDocument d{j.value("id", std::string{}), j["text"].get<std::string>(),
                  string_list(j, "tags", lineno)};
    check_document(d.id, d.tags);
    docs.push_back(std::move(d));
  }
  check_unique_ids(docs);
  return docs;
}

std::vector<RawDocument> read_raw_jsonl(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_raw_jsonl(in);
}

std::vector<RawDocument> read_raw_directory(const std::filesystem::path& dir,
                                            const std::filesystem::path& manifest) {
  auto in = open_in(manifest);
  std::vector<RawDocument> docs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto j = parse_line(line, lineno);
    if (!j.contains("path") || !j["path"].is_string()) {
      throw FormatError("manifest line " + std::to_string(lineno) + ": missing string 'path'");
    }
    const std::filesystem::path file = dir / j["path"].get<std::string>();
    auto text_in = open_in(file);
    std::string text((std::istreambuf_iterator<char>(text_in)), std::istreambuf_iterator<char>());
    RawDocument d{j.value("id", file.stem().string()), std::move(text),
                  string_list(j, "tags", lineno)};
    check_document(d.id, d.tags);
    docs.push_back(std::move(d));
  }
  check_unique_ids(docs);
  return docs;
}

void write_raw_jsonl(std::ostream& out, std::span<const RawDocument> docs) {
  for (const auto& d : docs) {
    json j;
    j["id"] = d.id;
    j["text"] = d.text;
    j["tags"] = d.tags;
    out << j.dump() << '\n';
  }
}

std::vector<TokenizedDocument> read_corpus_jsonl(std::istream& in) {
  std::vector<TokenizedDocument> docs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto j = parse_line(line, lineno);
    TokenizedDocument d{j.value("id", std::string{}), string_list(j, "tokens", lineno),
                        string_list(j, "tags", lineno)};
    check_document(d.id, d.tags);
    docs.push_back(std::move(d));
  }
  check_unique_ids(docs);
  return docs;
}

std::vector<TokenizedDocument> read_corpus_jsonl(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_corpus_jsonl(in);
}

void write_corpus_jsonl(std::ostream& out, std::span<const TokenizedDocument> docs) {
  for (const auto& d : docs) {
    json j;
    j["id"] = d.id;
    j["tokens"] = d.tokens;
    j["tags"] = d.tags;
    out << j.dump() << '\n';
  }
}

std::vector<TokenizedDocument> read_any_corpus(const std::filesystem::path& path,
                                               const StopWords& stopwords) {
  auto in = open_in(path);
  std::vector<TokenizedDocument> docs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto j = parse_line(line, lineno);
    TokenizedDocument d;
    d.id = j.value("id", std::string{});
    d.tags = string_list(j, "tags", lineno);
    if (j.contains("tokens")) {
      d.tokens = string_list(j, "tokens", lineno);
    } else if (j.contains("text") && j["text"].is_string()) {
      d.tokens = tokenize(j["text"].get<std::string>(), stopwords);
    } else {
      throw FormatError("line " + std::to_string(lineno) + ": record has neither tokens nor text");
    }
    check_document(d.id, d.tags);
    docs.push_back(std::move(d));
  }
  check_unique_ids(docs);
  return docs;
}

void write_vocab_tsv(std::ostream& out, const Vocabulary& vocab) {
  for (const auto& e : vocab.entries()) out << e.word << '\t' << e.count << '\n';
}

Vocabulary read_vocab_tsv(std::istream& in) {
  std::vector<VocabEntry> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw FormatError("vocab line " + std::to_string(lineno) + ": expected word<TAB>count");
    }
    try {
      entries.push_back({line.substr(0, tab), std::stoull(line.substr(tab + 1))});
    } catch (const std::logic_error&) {
      throw FormatError("vocab line " + std::to_string(lineno) + ": bad count");
    }
  }
  return Vocabulary(std::move(entries));
}

}  // namespace gov2vec
