#include "gov2vec/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <thread>

#include "gov2vec/error.hpp"
#include "json.hpp"

namespace gov2vec {

using nlohmann::json;

// --- source graph ----------------------------------------------------------

SourceGraph::SourceGraph(std::vector<Source> sources) {
  for (auto& s : sources) {
    if (s.id.empty()) throw FormatError("source with empty id");
    if (index_.contains(s.id)) throw FormatError("duplicate source id: " + s.id);
    index_.emplace(s.id, static_cast<std::uint32_t>(sources_.size()));
    sources_.push_back(std::move(s));
  }
  edges_.resize(sources_.size());
}

SourceGraph SourceGraph::from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("source graph: ") + e.what());
  }
  if (!j.is_object() || !j.contains("sources") || !j["sources"].is_array()) {
    throw FormatError("source graph: missing 'sources' array");
  }
  std::vector<Source> sources;
  for (const auto& s : j["sources"]) {
    if (!s.contains("id") || !s["id"].is_string()) throw FormatError("source graph: source without id");
    Source src{s["id"].get<std::string>(), std::nullopt};
    if (s.contains("position") && !s["position"].is_null()) {
      if (!s["position"].is_number_integer()) {
        throw FormatError("source graph: position of '" + src.id + "' is not an integer");
      }
      src.position = s["position"].get<std::int64_t>();
    }
    sources.push_back(std::move(src));
  }
  SourceGraph g(std::move(sources));
  if (j.contains("edges") && !j["edges"].is_null()) {
    if (!j["edges"].is_array()) throw FormatError("source graph: 'edges' must be an array");
    for (const auto& e : j["edges"]) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_string() || !e[1].is_string()) {
        throw FormatError("source graph: each edge must be [id, id]");
      }
      g.add_edge(e[0].get<std::string>(), e[1].get<std::string>());
    }
  }
  return g;
}

SourceGraph SourceGraph::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json(text);
}

std::string SourceGraph::to_json() const {
  json j;
  j["sources"] = json::array();
  for (const auto& s : sources_) {
    json o{{"id", s.id}};
    if (s.position) o["position"] = *s.position;
    j["sources"].push_back(std::move(o));
  }
  if (explicit_edges_) {
    j["edges"] = json::array();
    for (std::uint32_t a = 0; a < edges_.size(); ++a) {
      for (auto b : edges_[a]) {
        if (a < b) j["edges"].push_back({sources_[a].id, sources_[b].id});
      }
    }
  }
  return j.dump(2);
}

std::optional<std::uint32_t> SourceGraph::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::uint32_t SourceGraph::index_of(std::string_view id) const {
  if (auto i = find(id)) return *i;
  throw UnknownIdentifier(std::string(id));
}

void SourceGraph::add_missing(std::span<const std::string> ids) {
  for (const auto& id : ids) {
    if (id.empty()) throw FormatError("source with empty id");
    if (index_.contains(id)) continue;
    index_.emplace(id, static_cast<std::uint32_t>(sources_.size()));
    sources_.push_back({id, std::nullopt});
    edges_.emplace_back();
  }
}

void SourceGraph::add_edge(std::string_view a, std::string_view b) {
  const auto ia = index_of(a), ib = index_of(b);
  if (ia == ib) throw FormatError("source graph: self edge on '" + std::string(a) + "'");
  explicit_edges_ = true;
  auto link = [this](std::uint32_t x, std::uint32_t y) {
    auto& v = edges_[x];
    auto it = std::lower_bound(v.begin(), v.end(), y);
    if (it == v.end() || *it != y) v.insert(it, y);
  };
  link(ia, ib);
  link(ib, ia);
}

std::vector<std::vector<std::uint32_t>> SourceGraph::neighbors(int gov_window) const {
  if (explicit_edges_) return edges_;
  std::vector<std::vector<std::uint32_t>> out(sources_.size());
  for (std::uint32_t i = 0; i < sources_.size(); ++i) {
    if (!sources_[i].position) continue;
    for (std::uint32_t j = 0; j < sources_.size(); ++j) {
      if (i == j || !sources_[j].position) continue;
      const auto gap = *sources_[i].position - *sources_[j].position;
      if (gap <= gov_window && -gap <= gov_window) out[i].push_back(j);
    }
  }
  return out;
}

// --- config and model ------------------------------------------------------

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw InvalidArgument("train config: " + m); };
  if (dim < 2) fail("dimension must be >= 2");
  if (window < 1) fail("window must be >= 1");
  if (epochs < 1) fail("epochs must be >= 1");
  if (!(lr_end > 0.0) || !(lr_start > lr_end)) fail("need lr_start > lr_end > 0");
  if (structured && gov_window < 1) fail("gov_window must be >= 1 for structured training");
  if (structural_period < 1) fail("structural_period must be >= 1");
  if (holdout_period < 2) fail("holdout_period must be >= 2");
  if (threads < 1) fail("threads must be >= 1");
}

std::optional<std::uint32_t> EmbeddingModel::find_source(std::string_view id) const {
  for (std::uint32_t i = 0; i < sources.size(); ++i) {
    if (sources[i].id == id) return i;
  }
  return std::nullopt;
}

std::uint32_t EmbeddingModel::source_index(std::string_view id) const {
  if (auto i = find_source(id)) return *i;
  throw UnknownIdentifier(std::string(id));
}

EmbeddingModel init_model(Vocabulary vocab, std::vector<Source> sources, const TrainConfig& config) {
  config.validate();
  if (vocab.size() == 0) throw EmptyVocabulary();
  if (sources.empty()) throw InvalidArgument("model needs at least one source");
  const auto d = static_cast<std::size_t>(config.dim);
  EmbeddingModel m;
  m.tree = HuffmanTree(vocab);
  m.params.words = Matrix<float>(vocab.size(), d);
  m.params.sources = Matrix<float>(sources.size(), d);
  m.params.nodes = Matrix<float>(m.tree.internal_count(), d);
  m.vocab = std::move(vocab);
  m.sources = std::move(sources);
  m.config = config;

  Rng rng(splitmix64(config.seed));
  const double bound = 0.5 / config.dim;
  for (auto* mat : {&m.params.words, &m.params.sources}) {
    for (auto& x : mat->data()) x = static_cast<float>(uniform_real(rng, -bound, bound));
  }
  return m;
}

double lr_at(std::uint64_t step, std::uint64_t total_steps, const TrainConfig& config) {
  if (total_steps == 0) throw InvalidArgument("total_steps must be >= 1");
  step = std::min(step, total_steps);
  if (step == total_steps) return config.lr_end;
  return config.lr_start +
         (config.lr_end - config.lr_start) * static_cast<double>(step) / static_cast<double>(total_steps);
}

std::vector<EncodedDocument> encode_corpus(std::span<const TokenizedDocument> docs,
                                           const Vocabulary& vocab,
                                           const std::vector<Source>& sources) {
  std::unordered_map<std::string_view, std::uint32_t> source_index;
  for (std::uint32_t i = 0; i < sources.size(); ++i) source_index.emplace(sources[i].id, i);
  std::vector<EncodedDocument> out;
  out.reserve(docs.size());
  for (const auto& d : docs) {
    EncodedDocument e;
    for (const auto& t : d.tokens) {
      if (auto w = vocab.find(t)) e.tokens.push_back(*w);
    }
    for (const auto& tag : d.tags) {
      auto it = source_index.find(tag);
      if (it == source_index.end()) throw UnknownIdentifier(tag);
      if (std::find(e.tags.begin(), e.tags.end(), it->second) == e.tags.end()) {
        e.tags.push_back(it->second);
      }
    }
    if (!e.tokens.empty()) out.push_back(std::move(e));
  }
  return out;
}

void gather_contributors(const EncodedDocument& doc, std::size_t t, int reach,
                         std::vector<Contributor>& out) {
  out.clear();
  const std::size_t lo = t >= static_cast<std::size_t>(reach) ? t - reach : 0;
  const std::size_t hi = std::min(doc.tokens.size() - 1, t + static_cast<std::size_t>(reach));
  for (std::size_t i = lo; i <= hi; ++i) {
    if (i != t) out.push_back({Contributor::Kind::kWord, doc.tokens[i]});
  }
  for (auto s : doc.tags) out.push_back({Contributor::Kind::kSource, s});
}

Holdout Holdout::make(std::span<const EncodedDocument> docs, int period, std::uint64_t seed) {
  Holdout h;
  h.period = static_cast<std::uint64_t>(period);
  for (const auto& d : docs) h.total_positions += d.tokens.size();
  h.offset = splitmix64(seed ^ 0x686f6c646f7574ULL) % h.period;
  // Guarantee at least one held-out context on tiny corpora.
  if (h.total_positions > 0 && h.offset >= h.total_positions) h.offset %= h.total_positions;
  return h;
}

double heldout_loss(const EmbeddingModel& model, std::span<const EncodedDocument> docs,
                    const Holdout& holdout) {
  std::vector<Contributor> contributors;
  double sum = 0.0;
  std::uint64_t n = 0, g = 0;
  for (const auto& doc : docs) {
    for (std::size_t t = 0; t < doc.tokens.size(); ++t, ++g) {
      if (!holdout.held_out(g)) continue;
      gather_contributors(doc, t, model.config.window, contributors);
      sum += context_loss(model.params, model.tree, std::span<const Contributor>(contributors),
                          doc.tokens[t]);
      ++n;
    }
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

namespace {

struct Schedule {
  std::vector<std::uint64_t> doc_offset;  // global position of each document's first token
  std::uint64_t total_steps = 1;
};

void run_documents(EmbeddingModel& m, std::span<const EncodedDocument> docs, std::size_t first,
                   std::size_t last, const Schedule& sched, const Holdout& holdout,
                   const std::vector<std::vector<std::uint32_t>>& neighbors,
                   std::atomic<std::uint64_t>& step, Rng& rng, double& loss_sum,
                   std::uint64_t& loss_n) {
  const auto& cfg = m.config;
  StepScratch<float> scratch;
  for (std::size_t di = first; di < last; ++di) {
    const auto& doc = docs[di];
    for (std::size_t t = 0; t < doc.tokens.size(); ++t) {
      if (holdout.held_out(sched.doc_offset[di] + t)) continue;
      const auto s = step.fetch_add(1, std::memory_order_relaxed);
      const double lr = lr_at(s, sched.total_steps, cfg);
      const auto loss = word_step(m.params, m.tree, doc, t, cfg.window, lr, rng, scratch);
      if (!loss) continue;
      loss_sum += *loss;
      ++loss_n;
    }
    if (cfg.structured && (di + 1) % static_cast<std::size_t>(cfg.structural_period) == 0) {
      const double lr = lr_at(step.load(std::memory_order_relaxed), sched.total_steps, cfg);
      for (auto s : doc.tags) {
        if (!neighbors[s].empty()) structural_step(m.params.sources, s, std::span(neighbors[s]), lr);
      }
    }
  }
}

}  // namespace

EmbeddingModel train(std::span<const TokenizedDocument> corpus, const Vocabulary& vocab,
                     SourceGraph graph, const TrainConfig& config, const TrainOptions& options) {
  config.validate();
  std::set<std::string> tags;
  for (const auto& d : corpus) tags.insert(d.tags.begin(), d.tags.end());
  graph.add_missing(std::vector<std::string>(tags.begin(), tags.end()));

  EmbeddingModel m = init_model(vocab, graph.sources(), config);
  const auto docs = encode_corpus(corpus, m.vocab, m.sources);
  if (docs.empty()) throw EmptyCorpus();

  const auto holdout = Holdout::make(docs, config.holdout_period, config.seed);
  Schedule sched;
  sched.doc_offset.reserve(docs.size());
  std::uint64_t g = 0, held = 0;
  for (const auto& d : docs) {
    sched.doc_offset.push_back(g);
    for (std::size_t t = 0; t < d.tokens.size(); ++t, ++g) held += holdout.held_out(g);
  }
  sched.total_steps = std::max<std::uint64_t>(1, (g - held) * static_cast<std::uint64_t>(config.epochs));

  const auto neighbors = config.structured
                             ? graph.neighbors(config.gov_window)
                             : std::vector<std::vector<std::uint32_t>>(m.sources.size());

  std::atomic<std::uint64_t> step{0};
  Rng rng(splitmix64(config.seed + 1));
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::uint64_t loss_n = 0;
    if (config.threads <= 1) {
      run_documents(m, docs, 0, docs.size(), sched, holdout, neighbors, step, rng, loss_sum, loss_n);
    } else {
      // Lock-free shared updates; results are not bit-reproducible in this mode.
      const auto nt = static_cast<std::size_t>(config.threads);
      std::vector<double> sums(nt, 0.0);
      std::vector<std::uint64_t> counts(nt, 0);
      std::vector<std::thread> workers;
      for (std::size_t k = 0; k < nt; ++k) {
        workers.emplace_back([&, k] {
          Rng local(splitmix64(config.seed + 1 + (static_cast<std::uint64_t>(epoch) * nt + k + 1) * 0x9e37ULL));
          const std::size_t first = docs.size() * k / nt, last = docs.size() * (k + 1) / nt;
          run_documents(m, docs, first, last, sched, holdout, neighbors, step, local, sums[k], counts[k]);
        });
      }
      for (auto& w : workers) w.join();
      for (std::size_t k = 0; k < nt; ++k) {
        loss_sum += sums[k];
        loss_n += counts[k];
      }
    }
    if (options.on_epoch) {
      options.on_epoch({epoch + 1, lr_at(step.load(), sched.total_steps, config),
                        loss_n ? loss_sum / static_cast<double>(loss_n) : 0.0});
    }
  }
  m.objective = heldout_loss(m, docs, holdout);
  return m;
}

// --- model file ------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'G', '2', 'V', '1'};
constexpr std::int64_t kNoPosition = std::numeric_limits<std::int64_t>::max();
constexpr std::uint32_t kFlagStructured = 1u;

template <typename U>
void put(std::ostream& out, U value) {
  static_assert(std::is_trivially_copyable_v<U>);
  unsigned char buf[sizeof(U)];
  std::memcpy(buf, &value, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(U));
  out.write(reinterpret_cast<const char*>(buf), sizeof(U));
}

template <typename U>
U get(std::istream& in) {
  unsigned char buf[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(U))) throw FormatError("model file truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(U));
  U value;
  std::memcpy(&value, buf, sizeof(U));
  return value;
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
  const auto n = get<std::uint32_t>(in);
  if (n > (1u << 20)) throw FormatError("model file: implausible string length");
  std::string s(n, '\0');
  if (!in.read(s.data(), n)) throw FormatError("model file truncated");
  return s;
}

void put_matrix(std::ostream& out, const Matrix<float>& m) {
  for (float x : m.data()) put(out, x);
}

Matrix<float> get_matrix(std::istream& in, std::size_t rows, std::size_t cols) {
  Matrix<float> m(rows, cols);
  for (auto& x : m.data()) x = get<float>(in);
  return m;
}

}  // namespace

void save_model(std::ostream& out, const EmbeddingModel& model) {
  out.write(kMagic, 4);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.dim()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.vocab.size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.sources.size()));
  put<std::uint32_t>(out, model.config.structured ? kFlagStructured : 0u);
  for (const auto& e : model.vocab.entries()) {
    put_string(out, e.word);
    put<std::uint64_t>(out, e.count);
  }
  for (const auto& s : model.sources) {
    put_string(out, s.id);
    put<std::int64_t>(out, s.position.value_or(kNoPosition));
  }
  put_matrix(out, model.params.words);
  put_matrix(out, model.params.sources);
  put_matrix(out, model.params.nodes);
  put<double>(out, model.objective);
  if (!out) throw Error("failed writing model");
}

void save_model(const std::filesystem::path& path, const EmbeddingModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot create " + path.string());
  save_model(out, model);
}

EmbeddingModel load_model(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError("not a G2V1 model file");
  }
  const auto d = get<std::uint32_t>(in);
  const auto m = get<std::uint32_t>(in);
  const auto s = get<std::uint32_t>(in);
  const auto flags = get<std::uint32_t>(in);
  if (d < 1 || m < 1 || s < 1) throw FormatError("model file: empty dimension, vocabulary or sources");

  std::vector<VocabEntry> entries;
  entries.reserve(m);
  for (std::uint32_t i = 0; i < m; ++i) {
    auto word = get_string(in);
    entries.push_back({std::move(word), get<std::uint64_t>(in)});
  }
  EmbeddingModel model;
  model.vocab = Vocabulary(entries);
  if (model.vocab.entries() != entries) throw FormatError("model file: vocabulary not in canonical order");
  for (std::uint32_t i = 0; i < s; ++i) {
    Source src{get_string(in), std::nullopt};
    const auto pos = get<std::int64_t>(in);
    if (pos != kNoPosition) src.position = pos;
    model.sources.push_back(std::move(src));
  }
  model.tree = HuffmanTree(model.vocab);
  model.params.words = get_matrix(in, m, d);
  model.params.sources = get_matrix(in, s, d);
  model.params.nodes = get_matrix(in, m - 1, d);
  model.objective = get<double>(in);
  model.config.dim = static_cast<int>(d);
  model.config.structured = (flags & kFlagStructured) != 0;
  return model;
}

EmbeddingModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return load_model(in);
}

}  // namespace gov2vec
