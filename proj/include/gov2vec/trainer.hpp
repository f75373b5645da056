#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "gov2vec/corpus.hpp"
#include "gov2vec/hsm.hpp"
#include "gov2vec/matrix.hpp"
#include "gov2vec/random.hpp"

namespace gov2vec {

struct Source {
  std::string id;
  std::optional<std::int64_t> position;

  friend bool operator==(const Source&, const Source&) = default;
};

// Word sources and the relation used by structured training. Edges are undirected.
class SourceGraph {
 public:
  SourceGraph() = default;
  explicit SourceGraph(std::vector<Source> sources);

  // {"sources":[{"id","position"?}],"edges":[[id,id],...]?}
  static SourceGraph from_json(std::string_view text);
  static SourceGraph load(const std::filesystem::path& path);
  std::string to_json() const;

  std::size_t size() const noexcept { return sources_.size(); }
  const std::vector<Source>& sources() const noexcept { return sources_; }
  std::optional<std::uint32_t> find(std::string_view id) const;
  std::uint32_t index_of(std::string_view id) const;  // throws UnknownIdentifier

  // Appends any id not yet present (no position).
  void add_missing(std::span<const std::string> ids);

  void add_edge(std::string_view a, std::string_view b);
  bool has_explicit_edges() const noexcept { return explicit_edges_; }
  // Neighbors are the explicit edges when any were given, otherwise every
  // source whose position differs by at most gov_window.
  std::vector<std::vector<std::uint32_t>> neighbors(int gov_window) const;

 private:
  std::vector<Source> sources_;
  std::unordered_map<std::string, std::uint32_t> index_;
  std::vector<std::vector<std::uint32_t>> edges_;
  bool explicit_edges_ = false;
};

struct TrainConfig {
  int dim = 150;
  int window = 17;
  int epochs = 25;
  double lr_start = 0.025;
  double lr_end = 0.001;
  std::uint64_t seed = 1;
  bool structured = false;
  int gov_window = 1;
  int structural_period = 1;
  int holdout_period = 50;
  // 1 selects the deterministic single-threaded path.
  int threads = 1;

  void validate() const;  // throws InvalidArgument
};

template <typename T>
struct Params {
  Matrix<T> words;    // M x d input vectors
  Matrix<T> sources;  // S x d source vectors
  Matrix<T> nodes;    // (M-1) x d hierarchical-softmax node vectors

  template <typename U>
  Params<U> cast() const {
    return {words.template cast<U>(), sources.template cast<U>(), nodes.template cast<U>()};
  }
  bool all_finite() const {
    for (const auto* m : {&words, &sources, &nodes}) {
      for (T x : m->data()) {
        if (!std::isfinite(x)) return false;
      }
    }
    return true;
  }
  friend bool operator==(const Params&, const Params&) = default;
};

struct EmbeddingModel {
  Vocabulary vocab;
  HuffmanTree tree;
  std::vector<Source> sources;
  Params<float> params;
  TrainConfig config;
  double objective = 0.0;

  std::size_t dim() const noexcept { return params.words.cols(); }
  std::optional<std::uint32_t> find_source(std::string_view id) const;
  std::uint32_t source_index(std::string_view id) const;  // throws UnknownIdentifier
  std::span<const float> word_vector(std::uint32_t w) const { return params.words.row(w); }
  std::span<const float> source_vector(std::uint32_t s) const { return params.sources.row(s); }
};

EmbeddingModel init_model(Vocabulary vocab, std::vector<Source> sources, const TrainConfig& config);

double lr_at(std::uint64_t step, std::uint64_t total_steps, const TrainConfig& config);

// A vector averaged into the prediction context.
struct Contributor {
  enum class Kind : std::uint8_t { kWord, kSource };
  Kind kind;
  std::uint32_t index;
  friend bool operator==(const Contributor&, const Contributor&) = default;
};

// Training document with tokens and tags resolved to row indices.
struct EncodedDocument {
  std::vector<std::uint32_t> tokens;
  std::vector<std::uint32_t> tags;
};

std::vector<EncodedDocument> encode_corpus(std::span<const TokenizedDocument> docs,
                                           const Vocabulary& vocab,
                                           const std::vector<Source>& sources);

// Context words at distance 1..reach around position t (t itself excluded)
// followed by the document's source rows.
void gather_contributors(const EncodedDocument& doc, std::size_t t, int reach,
                         std::vector<Contributor>& out);

template <typename T>
std::span<const T> contributor_row(const Params<T>& p, Contributor c) {
  return c.kind == Contributor::Kind::kWord ? p.words.row(c.index) : p.sources.row(c.index);
}

template <typename T>
std::span<T> contributor_row(Params<T>& p, Contributor c) {
  return c.kind == Contributor::Kind::kWord ? p.words.row(c.index) : p.sources.row(c.index);
}

// Loss of predicting target from the mean of the contributor vectors.
template <typename T>
double context_loss(const Params<T>& p, const HuffmanTree& tree,
                    std::span<const Contributor> contributors, std::uint32_t target) {
  std::vector<T> h(p.words.cols(), T{});
  for (auto c : contributors) {
    const auto r = contributor_row(p, c);
    for (std::size_t i = 0; i < h.size(); ++i) h[i] += r[i];
  }
  for (auto& x : h) x /= static_cast<T>(contributors.size());
  return hs_loss(p.nodes, tree, std::span<const T>(h), target);
}

template <typename T>
struct StepScratch {
  std::vector<T> h;
  std::vector<T> grad_h;
  std::vector<Contributor> contributors;
};

// One gradient step on the loss of predicting target from the mean of the
// contributors. Each contributor receives -lr * grad_h / |contributors|.
template <typename T>
double word_update(Params<T>& p, const HuffmanTree& tree,
                   std::span<const Contributor> contributors, std::uint32_t target, double lr,
                   StepScratch<T>& scratch) {
  const std::size_t d = p.words.cols();
  scratch.h.assign(d, T{});
  scratch.grad_h.assign(d, T{});
  for (auto c : contributors) {
    const auto r = contributor_row(std::as_const(p), c);
    for (std::size_t i = 0; i < d; ++i) scratch.h[i] += r[i];
  }
  const T inv = T{1} / static_cast<T>(contributors.size());
  for (auto& x : scratch.h) x *= inv;
  const double loss = hs_descend(p.nodes, tree, std::span<const T>(scratch.h), target, lr,
                                 std::span<T>(scratch.grad_h));
  const T scale = static_cast<T>(-lr) * inv;
  for (auto c : contributors) {
    auto r = contributor_row(p, c);
    for (std::size_t i = 0; i < d; ++i) r[i] += scale * scratch.grad_h[i];
  }
  return loss;
}

// Samples a reduced window r in [1, window] and applies word_update at position t.
// Returns nullopt, without touching the model, when no context word exists.
template <typename T>
std::optional<double> word_step(Params<T>& p, const HuffmanTree& tree, const EncodedDocument& doc,
                                std::size_t t, int window, double lr, Rng& rng,
                                StepScratch<T>& scratch) {
  const int reach = static_cast<int>(uniform_int(rng, 1, window));
  gather_contributors(doc, t, reach, scratch.contributors);
  if (scratch.contributors.size() == doc.tags.size()) return std::nullopt;
  return word_update(p, tree, std::span<const Contributor>(scratch.contributors), doc.tokens[t], lr,
                     scratch);
}

// Exact softmax over all sources: -log p(neighbor | source).
template <typename T>
double structural_loss(const Matrix<T>& sources, std::uint32_t source, std::uint32_t neighbor) {
  const auto us = sources.row(source);
  std::vector<double> z(sources.rows());
  double zmax = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < z.size(); ++j) {
    z[j] = dot(sources.row(j), us);
    zmax = std::max(zmax, z[j]);
  }
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - zmax);
  return -(z[neighbor] - zmax - std::log(sum));
}

// Gradient of structural_loss with respect to every source row.
template <typename T>
Matrix<T> structural_gradient(const Matrix<T>& sources, std::uint32_t source,
                              std::uint32_t neighbor) {
  const std::size_t n = sources.rows(), d = sources.cols();
  const auto us = sources.row(source);
  std::vector<double> prob(n);
  double zmax = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) {
    prob[j] = dot(sources.row(j), us);
    zmax = std::max(zmax, prob[j]);
  }
  double sum = 0.0;
  for (auto& v : prob) sum += (v = std::exp(v - zmax));
  Matrix<T> grad(n, d);
  for (std::size_t j = 0; j < n; ++j) {
    const double g = prob[j] / sum - (j == neighbor ? 1.0 : 0.0);
    const auto uj = sources.row(j);
    auto gs = grad.row(source);
    auto gj = grad.row(j);
    // z_j = U_j . U_s contributes to both factors; for j == s both land on row s.
    for (std::size_t i = 0; i < d; ++i) {
      gs[i] += static_cast<T>(g * uj[i]);
      gj[i] += static_cast<T>(g * us[i]);
    }
  }
  return grad;
}

// For each neighbor in turn: U <- U - lr * grad. Returns the summed loss.
template <typename T>
double structural_step(Matrix<T>& sources, std::uint32_t source,
                       std::span<const std::uint32_t> neighbors, double lr) {
  double loss = 0.0;
  for (auto nb : neighbors) {
    loss += structural_loss(sources, source, nb);
    const auto grad = structural_gradient(sources, source, nb);
    for (std::size_t i = 0; i < grad.data().size(); ++i) {
      sources.data()[i] -= static_cast<T>(lr) * grad.data()[i];
    }
  }
  return loss;
}

// Contexts excluded from training and used for the objective: every period-th
// (document, position) in corpus order, starting at a seed-derived offset.
struct Holdout {
  std::uint64_t period = 50;
  std::uint64_t offset = 0;
  std::uint64_t total_positions = 0;

  static Holdout make(std::span<const EncodedDocument> docs, int period, std::uint64_t seed);
  bool held_out(std::uint64_t global_position) const noexcept {
    return global_position % period == offset;
  }
};

// Mean hierarchical-softmax loss over held-out contexts with the full window.
// A held-out position with no context words is predicted from its sources alone.
double heldout_loss(const EmbeddingModel& model, std::span<const EncodedDocument> docs,
                    const Holdout& holdout);

struct TrainProgress {
  int epoch;
  double lr;
  double mean_loss;
};

struct TrainOptions {
  std::function<void(const TrainProgress&)> on_epoch;
};

// Builds the vocabulary-bound model from a filtered corpus and trains it.
// Sources are the graph's sources plus any unseen document tags, appended in sorted order.
EmbeddingModel train(std::span<const TokenizedDocument> corpus, const Vocabulary& vocab,
                     SourceGraph graph, const TrainConfig& config,
                     const TrainOptions& options = {});

// --- model file ------------------------------------------------------------

void save_model(std::ostream& out, const EmbeddingModel& model);
void save_model(const std::filesystem::path& path, const EmbeddingModel& model);
EmbeddingModel load_model(std::istream& in);
EmbeddingModel load_model(const std::filesystem::path& path);

}  // namespace gov2vec
