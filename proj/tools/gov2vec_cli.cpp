// gov2vec: train joint word/source embeddings and query them.
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "gov2vec/analysis.hpp"
#include "gov2vec/corpus.hpp"
#include "gov2vec/error.hpp"
#include "gov2vec/hyperopt.hpp"
#include "gov2vec/query.hpp"
#include "gov2vec/synth.hpp"
#include "gov2vec/trainer.hpp"

namespace fs = std::filesystem;
using namespace gov2vec;

namespace {

constexpr int kDataError = 1;
constexpr int kUsageError = 2;

// Thrown for flag combinations that fail validation before any work starts.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void log(const std::string& msg) { std::cerr << "[gov2vec] " << msg << '\n'; }

struct Globals {
  std::uint64_t seed = 1;
  int threads = 1;
  bool deterministic = false;
};

struct CorpusFlags {
  std::string corpus;
  std::string graph;
  std::string stopwords;
  std::uint64_t min_count = 2;
};

struct TrainFlags {
  int epochs = 25;
  double lr_start = 0.025;
  double lr_end = 0.001;
  bool structured = false;
  int gov_window = 1;
  int structural_period = 1;
  int holdout_period = 50;
};

struct EnsembleFlags {
  std::string ensemble;
  std::vector<std::string> models;
};

StopWords stopwords_from(const std::string& path) {
  return path.empty() ? default_stopwords() : load_stopwords(path);
}

void add_corpus_flags(CLI::App* cmd, CorpusFlags& f) {
  cmd->add_option("--corpus", f.corpus, "Corpus JSONL (tokenized or raw records)")->required();
  cmd->add_option("--graph", f.graph, "Source graph JSON");
  cmd->add_option("--stopwords", f.stopwords, "Stop word file for raw records (default: SMART list)");
  cmd->add_option("--min-count", f.min_count, "Minimum word frequency")->capture_default_str();
}

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
  cmd->add_option("--epochs", f.epochs, "Training epochs")->capture_default_str();
  cmd->add_option("--lr-start", f.lr_start, "Initial learning rate")->capture_default_str();
  cmd->add_option("--lr-end", f.lr_end, "Final learning rate")->capture_default_str();
  cmd->add_flag("--structured", f.structured, "Alternate with source-neighbour prediction");
  cmd->add_option("--gov-window", f.gov_window, "Position distance for source neighbours")->capture_default_str();
  cmd->add_option("--structural-period", f.structural_period, "Documents between structural steps")
      ->capture_default_str();
  cmd->add_option("--holdout-period", f.holdout_period, "Every k-th context is held out")->capture_default_str();
}

void add_ensemble_flags(CLI::App* cmd, EnsembleFlags& f) {
  cmd->add_option("--ensemble", f.ensemble, "Ensemble manifest or directory containing manifest.json");
  cmd->add_option("--model", f.models, "Model file (repeatable)");
}

TrainConfig make_config(const Globals& g, const TrainFlags& f) {
  TrainConfig c;
  c.epochs = f.epochs;
  c.lr_start = f.lr_start;
  c.lr_end = f.lr_end;
  c.seed = g.seed;
  c.structured = f.structured;
  c.gov_window = f.gov_window;
  c.structural_period = f.structural_period;
  c.holdout_period = f.holdout_period;
  c.threads = g.deterministic ? 1 : g.threads;
  if (g.deterministic && g.threads > 1) log("--deterministic set: training single-threaded");
  return c;
}

template <typename F>
void validated(F&& check) {
  try {
    check();
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
}

std::vector<fs::path> model_paths(const EnsembleFlags& f) {
  std::vector<fs::path> out;
  if (!f.ensemble.empty()) {
    fs::path manifest = f.ensemble;
    if (fs::is_directory(manifest)) manifest /= "manifest.json";
    out = ensemble_model_paths(manifest);
  }
  for (const auto& m : f.models) out.emplace_back(m);
  if (out.empty()) throw UsageError("give --ensemble or at least one --model");
  return out;
}

// Writes to the named file, or standard output when empty.
void with_output(const std::string& path, const std::function<void(std::ostream&)>& body) {
  if (path.empty()) {
    body(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot create " + path);
  body(out);
  if (!out) throw Error("failed writing " + path);
}

struct LoadedCorpus {
  std::vector<TokenizedDocument> docs;
  Vocabulary vocab;
  SourceGraph graph;
};

LoadedCorpus load_training_corpus(const CorpusFlags& f) {
  const auto stop = stopwords_from(f.stopwords);
  auto docs = read_any_corpus(f.corpus, stop);
  if (docs.empty()) throw EmptyCorpus();
  LoadedCorpus lc{{}, build_vocab(docs, f.min_count), {}};
  auto filtered = filter_corpus(docs, lc.vocab);
  if (filtered.dropped) log("dropped " + std::to_string(filtered.dropped) + " empty documents");
  lc.docs = std::move(filtered.docs);
  if (!f.graph.empty()) lc.graph = SourceGraph::load(f.graph);
  log("corpus: " + std::to_string(lc.docs.size()) + " documents, M=" + std::to_string(lc.vocab.size()) +
      ", tokens=" + std::to_string(lc.vocab.total_count()));
  return lc;
}

std::string fixed(double v, int digits = 6) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << v;
  return s.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint word and source embeddings with ensemble similarity queries"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--threads", g.threads, "Training threads")->capture_default_str();
  app.add_flag("--deterministic", g.deterministic, "Single-threaded, bit-reproducible training");

  std::function<void()> action;

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Tokenize raw documents into a corpus and vocabulary");
  struct {
    std::string input, manifest, stopwords, corpus_out, vocab_out;
    std::uint64_t min_count = 2;
  } ig;
  ingest->add_option("--input", ig.input, "Raw JSONL file or directory of text files")->required();
  ingest->add_option("--manifest", ig.manifest, "JSONL manifest for directory input (default <dir>/manifest.jsonl)");
  ingest->add_option("--stopwords", ig.stopwords, "Stop word file (default: SMART list)");
  ingest->add_option("--min-count", ig.min_count, "Minimum word frequency")->capture_default_str();
  ingest->add_option("--corpus-out", ig.corpus_out, "Tokenized corpus JSONL")->required();
  ingest->add_option("--vocab-out", ig.vocab_out, "Vocabulary TSV")->required();
  ingest->callback([&] {
    action = [&] {
      validated([&] {
        if (ig.min_count < 2) throw InvalidArgument("--min-count must be >= 2");
      });
      const auto stop = stopwords_from(ig.stopwords);
      std::vector<RawDocument> raw;
      if (fs::is_directory(ig.input)) {
        raw = read_raw_directory(ig.input, ig.manifest.empty() ? fs::path(ig.input) / "manifest.jsonl"
                                                               : fs::path(ig.manifest));
      } else {
        raw = read_raw_jsonl(fs::path(ig.input));
      }
      std::vector<TokenizedDocument> docs;
      docs.reserve(raw.size());
      for (const auto& r : raw) docs.push_back(tokenize_document(r, stop));
      const auto vocab = build_vocab(docs, ig.min_count);
      const auto filtered = filter_corpus(docs, vocab);
      with_output(ig.corpus_out, [&](std::ostream& o) { write_corpus_jsonl(o, filtered.docs); });
      with_output(ig.vocab_out, [&](std::ostream& o) { write_vocab_tsv(o, vocab); });
      log("ingested " + std::to_string(raw.size()) + " documents, kept " + std::to_string(filtered.docs.size()) +
          ", dropped " + std::to_string(filtered.dropped) + ", M=" + std::to_string(vocab.size()));
    };
  });

  // train
  auto* train_cmd = app.add_subcommand("train", "Train one model");
  CorpusFlags tc;
  TrainFlags tf;
  int dim = 150, window = 17;
  std::string model_out;
  add_corpus_flags(train_cmd, tc);
  add_train_flags(train_cmd, tf);
  train_cmd->add_option("--dim", dim, "Embedding dimension")->capture_default_str();
  train_cmd->add_option("--window", window, "Maximum context distance")->capture_default_str();
  train_cmd->add_option("--out", model_out, "Model file")->required();
  train_cmd->callback([&] {
    action = [&] {
      auto cfg = make_config(g, tf);
      cfg.dim = dim;
      cfg.window = window;
      validated([&] {
        cfg.validate();
        if (tc.min_count < 2) throw InvalidArgument("--min-count must be >= 2");
      });
      const auto lc = load_training_corpus(tc);
      TrainOptions opts;
      opts.on_epoch = [](const TrainProgress& p) {
        log("epoch " + std::to_string(p.epoch) + " lr=" + fixed(p.lr) + " loss=" + fixed(p.mean_loss, 4));
      };
      const auto model = train(lc.docs, lc.vocab, lc.graph, cfg, opts);
      save_model(fs::path(model_out), model);
      log("held-out objective " + fixed(model.objective, 6));
    };
  });

  // search
  auto* search_cmd = app.add_subcommand("search", "Tree-of-Parzen-estimators search; keeps every model");
  CorpusFlags sc;
  TrainFlags sf;
  SearchSpace space;
  TpeOptions tpe;
  std::size_t trials = 20;
  std::string out_dir;
  add_corpus_flags(search_cmd, sc);
  add_train_flags(search_cmd, sf);
  search_cmd->add_option("--trials", trials, "Ensemble size J")->capture_default_str();
  search_cmd->add_option("--dim-min", space.dim.lo, "Smallest dimension")->capture_default_str();
  search_cmd->add_option("--dim-max", space.dim.hi, "Largest dimension")->capture_default_str();
  search_cmd->add_option("--window-min", space.window.lo, "Smallest window")->capture_default_str();
  search_cmd->add_option("--window-max", space.window.hi, "Largest window")->capture_default_str();
  search_cmd->add_option("--startup", tpe.n_startup, "Random trials before TPE")->capture_default_str();
  search_cmd->add_option("--gamma", tpe.gamma, "Good-set quantile")->capture_default_str();
  search_cmd->add_option("--candidates", tpe.n_candidates, "Candidates drawn per suggestion")->capture_default_str();
  search_cmd->add_option("--out-dir", out_dir, "Ensemble directory (models + manifest.json)")->required();
  search_cmd->callback([&] {
    action = [&] {
      const auto cfg = make_config(g, sf);
      validated([&] {
        cfg.validate();
        space.validate();
        if (trials < 1) throw InvalidArgument("--trials must be >= 1");
        if (!(tpe.gamma > 0.0 && tpe.gamma < 1.0)) throw InvalidArgument("--gamma must lie in (0, 1)");
        if (tpe.n_candidates < 1) throw InvalidArgument("--candidates must be >= 1");
        if (sc.min_count < 2) throw InvalidArgument("--min-count must be >= 2");
      });
      const auto lc = load_training_corpus(sc);
      fs::create_directories(out_dir);
      const auto manifest = fs::path(out_dir) / "manifest.json";
      auto runner = training_runner(lc.docs, lc.vocab, lc.graph, cfg, out_dir);
      run_search(space, trials, g.seed, runner, tpe, [&](const SearchResult& r) {
        write_manifest(manifest, r);
        if (!r.trials.empty() && r.valid) {
          const auto& t = r.trials.back();
          log("trial " + std::to_string(r.trials.size()) + "/" + std::to_string(trials) + " d=" +
              std::to_string(t.params.dim) + " window=" + std::to_string(t.params.window) +
              " objective=" + fixed(t.objective));
        }
      });
      log("wrote " + manifest.string());
    };
  });

  // query
  auto* query_cmd = app.add_subcommand("query", "Ranked words for a signed query across the ensemble");
  EnsembleFlags qe;
  std::string expr, query_out, format = "tsv";
  double threshold = kDefaultThreshold;
  std::size_t pool = 0, top = 20;
  add_ensemble_flags(query_cmd, qe);
  query_cmd->add_option("--expr", expr, "Query, e.g. '+word:climate +gov:house113 -gov:obama'")->required();
  query_cmd->add_option("--threshold", threshold, "Retention threshold C")->capture_default_str();
  query_cmd->add_option("--pool", pool, "Candidate pool N (0: min(M, 50000))")->capture_default_str();
  query_cmd->add_option("--top", top, "Rows to report (0: all)")->capture_default_str();
  query_cmd->add_option("--format", format, "tsv or json")->capture_default_str()->check(CLI::IsMember({"tsv", "json"}));
  query_cmd->add_option("--out", query_out, "Output file (default: stdout)");
  query_cmd->callback([&] {
    action = [&] {
      QuerySpec spec;
      validated([&] {
        spec.terms = parse_query(expr);
        spec.threshold = threshold;
        if (pool > 0) spec.pool = pool;
        spec.top_k = 0;
        spec.validate();
      });
      EnsembleAggregator agg;
      for (const auto& p : model_paths(qe)) agg.add(nearest_words(load_model(p), spec));
      const auto ranking = agg.ranking(top);
      with_output(query_out, [&](std::ostream& o) {
        if (format == "json") {
          write_ranking_json(o, ranking);
        } else {
          write_ranking_tsv(o, ranking);
        }
      });
    };
  });

  // sim
  auto* sim_cmd = app.add_subcommand("sim", "Normalized source similarity to word queries");
  EnsembleFlags se;
  std::vector<std::string> sim_exprs, sim_sources;
  std::size_t sim_pool = 0;
  std::string sim_out;
  add_ensemble_flags(sim_cmd, se);
  sim_cmd->add_option("--expr", sim_exprs, "Word-only query (repeatable)")->required();
  sim_cmd->add_option("--source", sim_sources, "Source id (repeatable; default: all)");
  sim_cmd->add_option("--pool", sim_pool, "Candidate pool N (0: min(M, 50000))")->capture_default_str();
  sim_cmd->add_option("--out", sim_out, "Output file (default: stdout)");
  sim_cmd->callback([&] {
    action = [&] {
      std::vector<QuerySpec> specs;
      validated([&] {
        for (const auto& e : sim_exprs) {
          QuerySpec s;
          s.terms = parse_query(e);
          if (sim_pool > 0) s.pool = sim_pool;
          for (const auto& t : s.terms) {
            if (t.kind != QueryTerm::Kind::kWord) throw InvalidArgument("sim queries take word terms only");
          }
          specs.push_back(std::move(s));
        }
      });
      const auto paths = model_paths(se);
      std::vector<std::string> sources = sim_sources;
      std::vector<double> sums;
      for (std::size_t mi = 0; mi < paths.size(); ++mi) {
        const auto model = load_model(paths[mi]);
        if (mi == 0 && sources.empty()) {
          for (const auto& s : model.sources) sources.push_back(s.id);
        }
        sums.resize(sources.size() * specs.size(), 0.0);
        for (std::size_t s = 0; s < sources.size(); ++s) {
          for (std::size_t q = 0; q < specs.size(); ++q) {
            sums[s * specs.size() + q] += normalized_source_similarity(model, sources[s], specs[q]);
          }
        }
      }
      with_output(sim_out, [&](std::ostream& o) {
        o << "source\tquery\tmean_normalized_similarity\tmodels\n";
        for (std::size_t s = 0; s < sources.size(); ++s) {
          for (std::size_t q = 0; q < specs.size(); ++q) {
            o << sources[s] << '\t' << format_query(specs[q].terms) << '\t'
              << format_number(sums[s * specs.size() + q] / static_cast<double>(paths.size())) << '\t'
              << paths.size() << '\n';
          }
        }
      });
    };
  });

  // pairsim
  auto* pair_cmd = app.add_subcommand("pairsim", "Ensemble-mean cosine for source pairs");
  EnsembleFlags pe;
  std::string pairs_file, pair_out;
  add_ensemble_flags(pair_cmd, pe);
  pair_cmd->add_option("--pairs", pairs_file, "TSV of labelA<TAB>labelB")->required();
  pair_cmd->add_option("--out", pair_out, "Output file (default: stdout)");
  pair_cmd->callback([&] {
    action = [&] {
      std::ifstream in(pairs_file);
      if (!in) throw Error("cannot open " + pairs_file);
      SimilarityAccumulator acc(read_pairs_tsv(in));
      for (const auto& p : model_paths(pe)) acc.add(load_model(p));
      const auto means = acc.means();
      with_output(pair_out, [&](std::ostream& o) {
        o << "a\tb\tmean_cosine\n";
        for (std::size_t i = 0; i < means.size(); ++i) {
          o << acc.pairs()[i].first << '\t' << acc.pairs()[i].second << '\t' << format_number(means[i]) << '\n';
        }
      });
    };
  });

  // pca
  auto* pca_cmd = app.add_subcommand("pca", "Project source vectors of one model onto two principal components");
  std::string pca_model, pca_out;
  std::vector<std::string> pca_sources;
  pca_cmd->add_option("--model", pca_model, "Model file")->required();
  pca_cmd->add_option("--source", pca_sources, "Source id to include (repeatable; default: all)");
  pca_cmd->add_option("--out", pca_out, "Output file (default: stdout)");
  pca_cmd->callback([&] {
    action = [&] {
      const auto model = load_model(fs::path(pca_model));
      std::vector<LabeledVector> rows;
      auto add = [&](std::uint32_t s) {
        const auto v = model.source_vector(s);
        rows.push_back({model.sources[s].id, {v.begin(), v.end()}});
      };
      if (pca_sources.empty()) {
        for (std::uint32_t s = 0; s < model.sources.size(); ++s) add(s);
      } else {
        for (const auto& id : pca_sources) add(model.source_index(id));
      }
      const auto res = pca_2d(rows);
      with_output(pca_out, [&](std::ostream& o) { write_points_tsv(o, res.points); });
    };
  });

  // corr
  auto* corr_cmd = app.add_subcommand("corr", "Spearman correlation of two labelled series");
  std::string series_a, series_b;
  corr_cmd->add_option("--a", series_a, "TSV label<TAB>value")->required();
  corr_cmd->add_option("--b", series_b, "TSV label<TAB>value")->required();
  corr_cmd->callback([&] {
    action = [&] {
      auto read = [](const std::string& p) {
        std::ifstream in(p);
        if (!in) throw Error("cannot open " + p);
        return read_series_tsv(in);
      };
      const auto a = read(series_a), b = read(series_b);
      std::map<std::string, double> bmap(b.begin(), b.end());
      if (bmap.size() != b.size()) throw FormatError("duplicate label in " + series_b);
      std::vector<double> xs, ys;
      for (const auto& [label, v] : a) {
        auto it = bmap.find(label);
        if (it == bmap.end()) throw UnknownIdentifier(label);
        xs.push_back(v);
        ys.push_back(it->second);
      }
      if (xs.size() != b.size()) throw FormatError("series labels do not match");
      std::cout << fixed(spearman(xs, ys)) << '\n';
    };
  });

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic tagged corpus with ground truth");
  SynthSpec ss;
  std::string preset = "two-topic", synth_dir;
  synth_cmd->add_option("--preset", preset, "two-topic or temporal-chain")
      ->capture_default_str()
      ->check(CLI::IsMember({"two-topic", "temporal-chain"}));
  synth_cmd->add_option("--sources", ss.n_sources, "Chain length")->capture_default_str();
  synth_cmd->add_option("--docs-per-source", ss.docs_per_source, "Documents per source")->capture_default_str();
  synth_cmd->add_option("--tokens-per-doc", ss.tokens_per_doc, "Tokens per document")->capture_default_str();
  synth_cmd->add_option("--topic-words", ss.topic_words, "Words per topic")->capture_default_str();
  synth_cmd->add_option("--background-words", ss.background_words, "Shared background words")->capture_default_str();
  synth_cmd->add_option("--topic-share", ss.topic_share, "Probability a token is a topic word")->capture_default_str();
  synth_cmd->add_option("--drift", ss.drift, "Chain mixing rate in [0, 1]")->capture_default_str();
  synth_cmd->add_option("--out-dir", synth_dir, "Writes corpus.jsonl, graph.json, truth.json")->required();
  synth_cmd->callback([&] {
    action = [&] {
      ss.preset = parse_preset(preset);
      ss.seed = g.seed;
      validated([&] { ss.validate(); });
      const auto sc = generate(ss);
      fs::create_directories(synth_dir);
      const fs::path dir = synth_dir;
      with_output((dir / "corpus.jsonl").string(), [&](std::ostream& o) { write_raw_jsonl(o, sc.docs); });
      with_output((dir / "graph.json").string(), [&](std::ostream& o) { o << sc.graph.to_json() << '\n'; });
      with_output((dir / "truth.json").string(), [&](std::ostream& o) { o << sc.truth.to_json() << '\n'; });
      log("wrote " + std::to_string(sc.docs.size()) + " documents to " + synth_dir);
    };
  });

  // export
  auto* export_cmd = app.add_subcommand("export", "Write the M+S word and source vectors as TSV");
  std::string export_model, export_out;
  export_cmd->add_option("--model", export_model, "Model file")->required();
  export_cmd->add_option("--out", export_out, "Output file (default: stdout)");
  export_cmd->callback([&] {
    action = [&] {
      const auto rows = export_embeddings(load_model(fs::path(export_model)));
      with_output(export_out, [&](std::ostream& o) { write_embeddings_tsv(o, rows); });
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (g.threads < 1) throw UsageError("--threads must be >= 1");
    action();
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDataError;
  }
  return 0;
}
