// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "gov2vec/analysis.hpp"
#include "gov2vec/error.hpp"
#include "gov2vec/hsm.hpp"
#include "gov2vec/hyperopt.hpp"
#include "gov2vec/query.hpp"
#include "gov2vec/synth.hpp"
#include "gov2vec/trainer.hpp"
#include "support.hpp"

using namespace gov2vec;
using namespace gov2vec::testing;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s << std::setprecision(digits) << v;
  return s.str();
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("gov2vec_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string bytes_of(const EmbeddingModel& m) {
  std::ostringstream out;
  save_model(out, m);
  return out.str();
}

struct Prepared {
  std::vector<TokenizedDocument> docs;
  Vocabulary vocab;
  SourceGraph graph;
};

Prepared prepare(const SynthCorpus& sc) {
  std::vector<TokenizedDocument> docs;
  for (const auto& r : sc.docs) docs.push_back(tokenize_document(r, default_stopwords()));
  auto vocab = build_vocab(docs, 2);
  return {filter_corpus(docs, vocab).docs, vocab, sc.graph};
}

// C1
Outcome hs_normalization() {
  const auto t0 = Clock::now();
  Rng rng(101);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto m = static_cast<std::size_t>(uniform_int(rng, 1, 1000));
    const auto d = static_cast<std::size_t>(uniform_int(rng, 1, 50));
    const auto model = random_model(m, 1, d, rng());
    const auto h = model.source_vector(0);
    double sum = 0.0;
    for (std::size_t w = 0; w < m; ++w) sum += hs_probability(model.params.nodes, model.tree, h, w);
    worst = std::max(worst, std::abs(sum - 1.0));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-9 && secs < 10.0, "max |sum-1| = " + fmt(worst) + ", " + fmt(secs) + " s"};
}

// C2
Outcome gradient_checks() {
  constexpr double kTol = 1e-4, kEps = 1e-5;
  double worst_hs = 0.0, worst_word = 0.0, worst_struct = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const auto m = static_cast<std::size_t>(uniform_int(rng, 2, 40));
    const auto d = static_cast<std::size_t>(uniform_int(rng, 2, 10));
    const HuffmanTree tree(random_vocab(m, rng));
    auto nodes = random_matrix<double>(m - 1, d, 1.0, rng);
    std::vector<double> h(d);
    for (auto& x : h) x = uniform_real(rng, -1, 1);
    const auto target = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(m) - 1));
    const auto g = hs_loss_and_grads(nodes, tree, std::span<const double>(h), target);
    auto loss = [&] { return hs_loss(nodes, tree, std::span<const double>(h), target); };
    for (std::size_t i = 0; i < d; ++i) {
      worst_hs = std::max(worst_hs, relative_error(g.grad_h[i], central_difference(h[i], kEps, loss)));
    }
    const auto path = tree.path(target);
    for (std::size_t k = 0; k < path.size(); ++k) {
      for (std::size_t i = 0; i < d; ++i) {
        worst_hs = std::max(worst_hs, relative_error(g.grad_nodes(k, i), central_difference(nodes(path[k], i), kEps, loss)));
      }
    }
  }
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto model = random_model(15, 3, 6, seed + 500);
    auto params = model.params.cast<double>();
    Rng rng(seed + 7000);
    EncodedDocument doc;
    for (int i = 0; i < 9; ++i) doc.tokens.push_back(static_cast<std::uint32_t>(uniform_int(rng, 0, 14)));
    doc.tags = {static_cast<std::uint32_t>(uniform_int(rng, 0, 2))};
    const auto t = static_cast<std::size_t>(uniform_int(rng, 0, 8));
    std::vector<Contributor> contributors;
    gather_contributors(doc, t, static_cast<int>(uniform_int(rng, 1, 4)), contributors);
    const auto target = doc.tokens[t];
    auto loss = [&] { return context_loss(params, model.tree, std::span<const Contributor>(contributors), target); };
    auto after = params;
    StepScratch<double> scratch;
    word_update(after, model.tree, std::span<const Contributor>(contributors), target, 1.0, scratch);
    std::set<std::pair<int, std::uint32_t>> seen;
    for (auto c : contributors) {
      if (!seen.insert({static_cast<int>(c.kind), c.index}).second) continue;
      auto row = contributor_row(params, c);
      const auto row_after = contributor_row(std::as_const(after), c);
      for (std::size_t i = 0; i < row.size(); ++i) {
        worst_word = std::max(worst_word, relative_error(row[i] - row_after[i], central_difference(row[i], kEps, loss)));
      }
    }
    for (auto n : model.tree.path(target)) {
      for (std::size_t i = 0; i < 6; ++i) {
        worst_word = std::max(worst_word, relative_error(params.nodes(n, i) - after.nodes(n, i),
                                                         central_difference(params.nodes(n, i), kEps, loss)));
      }
    }
  }
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed + 90000);
    const auto s_count = static_cast<std::size_t>(uniform_int(rng, 2, 8));
    auto u = random_matrix<double>(s_count, static_cast<std::size_t>(uniform_int(rng, 2, 10)), 1.0, rng);
    const auto s = static_cast<std::uint32_t>(uniform_int(rng, 0, static_cast<std::int64_t>(s_count) - 1));
    auto n = static_cast<std::uint32_t>(uniform_int(rng, 0, static_cast<std::int64_t>(s_count) - 2));
    if (n >= s) ++n;
    const auto grad = structural_gradient(u, s, n);
    auto loss = [&] { return structural_loss(u, s, n); };
    for (std::size_t i = 0; i < u.data().size(); ++i) {
      worst_struct = std::max(worst_struct, relative_error(grad.data()[i], central_difference(u.data()[i], kEps, loss)));
    }
  }
  const bool ok = worst_hs < kTol && worst_word < kTol && worst_struct < kTol;
  return {ok, "max relative error hs " + fmt(worst_hs) + ", word update " + fmt(worst_word) + ", structural " +
                  fmt(worst_struct)};
}

// C3
Outcome huffman_optimality() {
  std::size_t checked = 0, mismatched = 0;
  std::vector<std::uint64_t> f;
  std::function<void(std::uint64_t)> extend = [&](std::uint64_t min_value) {
    if (!f.empty()) {
      const HuffmanTree t(f);
      std::uint64_t cost = 0;
      for (std::size_t w = 0; w < f.size(); ++w) cost += f[w] * t.code(w).size();
      ++checked;
      if (cost != brute_force_min_code_cost(f)) ++mismatched;
    }
    if (f.size() == 8) return;
    for (std::uint64_t v = min_value; v <= 10; ++v) {
      f.push_back(v);
      extend(v);
      f.pop_back();
    }
  };
  extend(1);
  return {mismatched == 0 && checked > 0,
          std::to_string(checked) + " multisets, " + std::to_string(mismatched) + " mismatches"};
}

bool params_finite(const EmbeddingModel& m) { return m.params.all_finite(); }

// C4
Outcome two_topic_recovery() {
  const auto t0 = Clock::now();
  const auto sc = generate(SynthSpec{});
  const auto data = prepare(sc);
  const auto dir = scratch("two_topic");
  const SearchSpace space;
  const auto result = run_search(space, 20, 1, training_runner(data.docs, data.vocab, data.graph, TrainConfig{}, dir));
  const auto& topic_a = sc.truth.topics[0];
  const auto& topic_b = sc.truth.topics[1];
  const std::set<std::string> set_a(topic_a.begin(), topic_a.end()), set_b(topic_b.begin(), topic_b.end());

  auto mean_cos = [](const EmbeddingModel& m, std::string_view src, const std::vector<std::string>& words) {
    double sum = 0.0;
    for (const auto& w : words) sum += cosine(m.source_vector(m.source_index(src)), m.word_vector(m.vocab.index_of(w)));
    return sum / static_cast<double>(words.size());
  };
  auto own_in_top10 = [](const EmbeddingModel& m, const std::string& src, const std::set<std::string>& own) {
    QuerySpec spec;
    spec.terms = {{QueryTerm::Kind::kSource, src, 1}};
    spec.top_k = 10;
    int hits = 0;
    for (const auto& h : nearest_words(m, spec)) hits += own.count(h.word) ? 1 : 0;
    return hits;
  };

  int separated = 0, top_ok = 0, finite = 0;
  for (const auto& t : result.trials) {
    const auto m = load_model(dir / t.model_path);
    if (mean_cos(m, "A", topic_a) > mean_cos(m, "A", topic_b) && mean_cos(m, "B", topic_b) > mean_cos(m, "B", topic_a)) {
      ++separated;
    }
    if (own_in_top10(m, "A", set_a) >= 8 && own_in_top10(m, "B", set_b) >= 8) ++top_ok;
    if (params_finite(m)) ++finite;
  }
  const double secs = seconds_since(t0);
  const bool ok = separated == 20 && top_ok >= 18 && finite == 20 && secs < 15 * 60;
  return {ok, "separated " + std::to_string(separated) + "/20, top-10 >= 8 own " + std::to_string(top_ok) +
                  "/20, finite " + std::to_string(finite) + "/20, " + fmt(secs) + " s"};
}

// C5
Outcome temporal_chain_order() {
  const auto t0 = Clock::now();
  SynthSpec spec;
  spec.preset = SynthPreset::kTemporalChain;
  spec.n_sources = 8;
  spec.drift = 1.0;
  const auto sc = generate(spec);
  const auto data = prepare(sc);
  const auto dir = scratch("chain");
  TrainConfig cfg;
  cfg.structured = true;
  const auto result = run_search(SearchSpace{}, 20, 1, training_runner(data.docs, data.vocab, data.graph, cfg, dir));
  std::vector<double> order;
  for (const auto& s : sc.truth.sources) order.push_back(static_cast<double>(s.position));
  int good = 0;
  double min_abs = 1.0;
  for (const auto& t : result.trials) {
    const auto m = load_model(dir / t.model_path);
    std::vector<LabeledVector> rows;
    for (const auto& s : sc.truth.sources) {
      const auto v = m.source_vector(m.source_index(s.id));
      rows.push_back({s.id, std::vector<float>(v.begin(), v.end())});
    }
    const auto pca = pca_2d(rows);
    std::vector<double> pc1;
    for (const auto& p : pca.points) pc1.push_back(p.x);
    const double rho = std::abs(spearman(pc1, order));
    min_abs = std::min(min_abs, rho);
    if (rho >= 0.9) ++good;
  }
  return {good >= 15, "|rho| >= 0.9 in " + std::to_string(good) + "/20 models (min " + fmt(min_abs) + "), " +
                          fmt(seconds_since(t0)) + " s"};
}

// C6
Outcome query_oracle() {
  int compared = 0, mismatched = 0;
  for (std::uint64_t seed = 0; compared < 100; ++seed) {
    const auto m = random_model(300, 6, 16, seed + 31337);
    Rng rng(seed * 7 + 1);
    QuerySpec spec;
    // Alternate single terms with multi-term signed queries mixing words and sources.
    spec.terms = random_terms(m, rng, seed % 2 == 0 ? 1 : static_cast<std::size_t>(uniform_int(rng, 2, 5)));
    spec.threshold = uniform_real(rng, 0.0, 0.3);
    spec.top_k = static_cast<std::size_t>(uniform_int(rng, 0, 40));
    if (uniform01(rng) < 0.5) spec.pool = static_cast<std::size_t>(uniform_int(rng, 1, 300));
    if (compose_query(m, spec.terms).degenerate()) continue;
    ++compared;
    if (!same_hits(nearest_words(m, spec), brute_force_nearest(m, spec))) ++mismatched;
  }
  return {mismatched == 0, std::to_string(compared) + " queries, " + std::to_string(mismatched) + " mismatches"};
}

// C7
Outcome spearman_values() {
  const std::vector<double> a{1, 2, 3};
  const double up = spearman(a, std::vector<double>{10, 20, 30});
  const double down = spearman(a, std::vector<double>{30, 20, 10});
  const double mixed = spearman(a, std::vector<double>{3, 1, 2});
  const bool ok = up == 1.0 && down == -1.0 && mixed == -0.5;
  return {ok, "rho = " + fmt(up) + ", " + fmt(down) + ", " + fmt(mixed)};
}

// C8
Outcome tpe_vs_random() {
  auto runner = [](const TrialParams& p, std::uint64_t, std::size_t) {
    const double a = p.dim - 150, b = p.window - 17;
    Trial t;
    t.objective = a * a + b * b;
    return t;
  };
  TpeOptions random_only;
  random_only.n_startup = 20;
  auto best = [](const SearchResult& r) {
    double b = std::numeric_limits<double>::infinity();
    for (const auto& t : r.trials) b = std::min(b, t.objective);
    return b;
  };
  std::vector<double> tpe, rnd;
  for (std::uint64_t rep = 0; rep < 50; ++rep) {
    tpe.push_back(best(run_search(SearchSpace{}, 20, rep + 1, runner)));
    rnd.push_back(best(run_search(SearchSpace{}, 20, rep + 1, runner, random_only)));
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return (v[v.size() / 2 - 1] + v[v.size() / 2]) / 2;
  };
  const double mt = median(tpe), mr = median(rnd);
  return {mt <= mr, "median best: tpe " + fmt(mt) + ", random " + fmt(mr)};
}

// C9
Outcome lr_schedule() {
  const TrainConfig cfg;
  const std::uint64_t total = 1000000;
  const double start = lr_at(0, total, cfg), end = lr_at(total, total, cfg), mid = lr_at(total / 2, total, cfg);
  const bool ok = start == 0.025 && end == 0.001 && std::abs(mid - 0.013) <= 1e-12;
  return {ok, "lr(0) = " + fmt(start, 17) + ", lr(T) = " + fmt(end, 17) + ", lr(T/2) = " + fmt(mid, 17)};
}

// C10
Outcome persistence_round_trip() {
  int failures = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto m = random_model(50 + seed * 13, 1 + seed % 4, 3 + seed, seed);
    const auto first = bytes_of(m);
    std::istringstream in(first);
    if (bytes_of(load_model(in)) != first) ++failures;
  }
  SynthSpec spec;
  spec.docs_per_source = 20;
  spec.tokens_per_doc = 40;
  const auto data = prepare(generate(spec));
  TrainConfig cfg;
  cfg.dim = 16;
  cfg.window = 4;
  cfg.epochs = 2;
  const auto dir = scratch("persist");
  const auto trained = train(data.docs, data.vocab, data.graph, cfg);
  save_model(dir / "m.g2v", trained);
  save_model(dir / "m2.g2v", load_model(dir / "m.g2v"));
  if (slurp(dir / "m.g2v") != slurp(dir / "m2.g2v")) ++failures;

  SearchResult r;
  r.trials = {{{120, 11}, 0x8000000000000001ULL, 6.02214076e23, "model_000.g2v"},
              {{200, 25}, 3, 0.1 + 0.2, "model_001.g2v"}};
  write_manifest(dir / "manifest.json", r);
  const auto back = read_manifest(dir / "manifest.json");
  if (!(back.trials == r.trials) || !back.valid) ++failures;
  write_manifest(dir / "manifest2.json", back);
  if (slurp(dir / "manifest.json") != slurp(dir / "manifest2.json")) ++failures;
  return {failures == 0, std::to_string(failures) + " round-trip differences"};
}

int run_cli(const std::string& args, const fs::path& out) {
  const std::string cmd = std::string("'") + GOV2VEC_CLI + "' " + args + " >'" + out.string() + "' 2>&1";
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

// C11
Outcome cli_determinism() {
  const auto dir = scratch("determinism");
  const auto q = [](const fs::path& p) { return "'" + p.string() + "'"; };
  if (run_cli("synth --preset two-topic --docs-per-source 30 --tokens-per-doc 50 --topic-words 20 "
              "--background-words 40 --out-dir " + q(dir / "data"),
              dir / "synth.log") != 0) {
    return {false, "synth failed: " + slurp(dir / "synth.log")};
  }
  for (const char* run : {"run1", "run2"}) {
    const auto ens = dir / run;
    const std::string search = "--deterministic --seed 11 search --corpus " + q(dir / "data" / "corpus.jsonl") +
                               " --graph " + q(dir / "data" / "graph.json") +
                               " --trials 3 --dim-min 10 --dim-max 20 --window-min 2 --window-max 5 --epochs 3 "
                               "--out-dir " + q(ens);
    if (run_cli(search, dir / (std::string(run) + ".search.log")) != 0) {
      return {false, std::string(run) + " search failed: " + slurp(dir / (std::string(run) + ".search.log"))};
    }
    if (run_cli("query --ensemble " + q(ens) + " --expr '+gov:A -gov:B' --threshold 0 --top 0",
                dir / (std::string(run) + ".query.tsv")) != 0) {
      return {false, std::string(run) + " query failed"};
    }
  }
  int differing = 0, files = 0;
  for (const auto& entry : fs::directory_iterator(dir / "run1")) {
    ++files;
    if (slurp(entry.path()) != slurp(dir / "run2" / entry.path().filename())) ++differing;
  }
  if (slurp(dir / "run1.query.tsv") != slurp(dir / "run2.query.tsv")) ++differing;
  const bool ok = differing == 0 && files == 4;
  return {ok, std::to_string(files) + " ensemble files + query output compared, " + std::to_string(differing) +
                  " differ"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"C1 hierarchical softmax normalization", hs_normalization},
      {"C2 gradients match finite differences", gradient_checks},
      {"C3 huffman codes are optimal", huffman_optimality},
      {"C4 two-topic recovery", two_topic_recovery},
      {"C5 temporal chain order", temporal_chain_order},
      {"C6 nearest words match exhaustive scan", query_oracle},
      {"C7 spearman known values", spearman_values},
      {"C8 tpe beats random search", tpe_vs_random},
      {"C9 learning-rate endpoints", lr_schedule},
      {"C10 persistence round trip", persistence_round_trip},
      {"C11 deterministic cli runs", cli_determinism},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << " (" << o.detail << ")" << std::endl;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
