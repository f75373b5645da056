#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gov2vec/corpus.hpp"
#include "gov2vec/random.hpp"
#include "gov2vec/trainer.hpp"

namespace gov2vec {

struct IntRange {
  int lo = 0;
  int hi = 0;
};

struct SearchSpace {
  IntRange dim{100, 200};
  IntRange window{10, 25};

  void validate() const;
  bool contains(int d, int w) const noexcept {
    return d >= dim.lo && d <= dim.hi && w >= window.lo && w <= window.hi;
  }
};

struct TrialParams {
  int dim = 0;
  int window = 0;
  friend bool operator==(const TrialParams&, const TrialParams&) = default;
};

struct Trial {
  TrialParams params;
  std::uint64_t seed = 0;
  double objective = 0.0;
  std::string model_path;
  friend bool operator==(const Trial&, const Trial&) = default;
};

struct TpeOptions {
  double gamma = 0.25;
  int n_startup = 5;
  int n_candidates = 24;
  double min_bandwidth = 1.0;
};

// One-dimensional Parzen estimator on [lo, hi]: a truncated Gaussian kernel
// at each observation plus a uniform prior, each weighted 1/(k+1).
class ParzenEstimator {
 public:
  ParzenEstimator(std::span<const double> observations, double lo, double hi, double min_bandwidth);

  double density(double x) const;
  double sample(Rng& rng) const;

  std::span<const double> centers() const noexcept { return centers_; }
  std::span<const double> bandwidths() const noexcept { return bandwidths_; }
  double prior_weight() const noexcept { return 1.0 / static_cast<double>(centers_.size() + 1); }

 private:
  double lo_, hi_;
  std::vector<double> centers_;
  std::vector<double> bandwidths_;
  std::vector<double> mass_;  // kernel mass inside [lo, hi]
};

TrialParams tpe_suggest(std::span<const Trial> history, const SearchSpace& space, Rng& rng,
                        const TpeOptions& options = {});

// Evaluates one configuration: fills objective and model_path.
using TrialRunner = std::function<Trial(const TrialParams&, std::uint64_t seed, std::size_t index)>;

struct SearchResult {
  std::vector<Trial> trials;
  bool valid = true;
  std::string error;
};

// J sequential trials; every trial is kept. Seeds derive from base_seed.
// A failing trial stops the search; the partial result is flagged invalid and the error rethrown
// after on_trial has seen every completed trial.
SearchResult run_search(const SearchSpace& space, std::size_t trials, std::uint64_t base_seed,
                        const TrialRunner& runner, const TpeOptions& options = {},
                        const std::function<void(const SearchResult&)>& on_update = {});

std::uint64_t trial_seed(std::uint64_t base_seed, std::size_t index);

// Runner that trains on the corpus and writes model files into dir. Trial model
// paths are bare file names, so the manifest belongs in the same directory.
TrialRunner training_runner(std::span<const TokenizedDocument> corpus, const Vocabulary& vocab,
                            const SourceGraph& graph, const TrainConfig& base,
                            std::filesystem::path dir);

// {"trials":[{"model","d","window","seed","objective"}...],"valid":bool}. Relative
// model paths are resolved against the manifest's directory.
void write_manifest(const std::filesystem::path& path, const SearchResult& result);
SearchResult read_manifest(const std::filesystem::path& path);

// Model paths in the manifest resolved against its directory.
std::vector<std::filesystem::path> ensemble_model_paths(const std::filesystem::path& manifest);

}  // namespace gov2vec
