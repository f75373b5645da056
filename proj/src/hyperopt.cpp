#include "gov2vec/hyperopt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "gov2vec/error.hpp"
#include "json.hpp"

namespace gov2vec {

using nlohmann::json;

void SearchSpace::validate() const {
  if (dim.lo >= dim.hi) throw InvalidArgument("search space: dimension range is empty");
  if (window.lo >= window.hi) throw InvalidArgument("search space: window range is empty");
  if (dim.lo < 2) throw InvalidArgument("search space: dimension must be >= 2");
  if (window.lo < 1) throw InvalidArgument("search space: window must be >= 1");
}

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

constexpr double kInvSqrt2Pi = 0.3989422804014327;

}  // namespace

ParzenEstimator::ParzenEstimator(std::span<const double> observations, double lo, double hi,
                                 double min_bandwidth)
    : lo_(lo), hi_(hi), centers_(observations.begin(), observations.end()) {
  std::sort(centers_.begin(), centers_.end());
  const std::size_t k = centers_.size();
  const double width = hi - lo;
  bandwidths_.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    double left = i > 0 ? centers_[i] - centers_[i - 1] : 0.0;
    double right = i + 1 < k ? centers_[i + 1] - centers_[i] : 0.0;
    // A lone observation has no neighbours; it gets the full range.
    double bw = k == 1 ? width : std::max(left, right);
    bandwidths_[i] = std::clamp(bw, min_bandwidth, width);
  }
  mass_.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    mass_[i] = normal_cdf((hi_ - centers_[i]) / bandwidths_[i]) -
               normal_cdf((lo_ - centers_[i]) / bandwidths_[i]);
  }
}

double ParzenEstimator::density(double x) const {
  if (x < lo_ || x > hi_) return 0.0;
  const double w = prior_weight();
  double p = w / (hi_ - lo_);
  for (std::size_t i = 0; i < centers_.size(); ++i) {
    const double z = (x - centers_[i]) / bandwidths_[i];
    p += w * kInvSqrt2Pi * std::exp(-0.5 * z * z) / (bandwidths_[i] * mass_[i]);
  }
  return p;
}

double ParzenEstimator::sample(Rng& rng) const {
  const auto pick = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(centers_.size())));
  if (pick == centers_.size()) return uniform_real(rng, lo_, hi_);
  for (int attempt = 0; attempt < 64; ++attempt) {
    const double x = centers_[pick] + bandwidths_[pick] * standard_normal(rng);
    if (x >= lo_ && x <= hi_) return x;
  }
  return std::clamp(centers_[pick], lo_, hi_);
}

namespace {

int round_clamp(double x, IntRange r) {
  return static_cast<int>(std::clamp(std::lround(x), static_cast<long>(r.lo), static_cast<long>(r.hi)));
}

}  // namespace

TrialParams tpe_suggest(std::span<const Trial> history, const SearchSpace& space, Rng& rng,
                        const TpeOptions& options) {
  space.validate();
  if (history.size() < static_cast<std::size_t>(std::max(options.n_startup, 1))) {
    return {static_cast<int>(uniform_int(rng, space.dim.lo, space.dim.hi)),
            static_cast<int>(uniform_int(rng, space.window.lo, space.window.hi))};
  }
  std::vector<std::size_t> order(history.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return history[a].objective < history[b].objective;
  });
  const auto n_good = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(options.gamma * static_cast<double>(history.size()))), 1,
      history.size() - 1);

  std::vector<double> good_d, good_w, bad_d, bad_w;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& p = history[order[i]].params;
    (i < n_good ? good_d : bad_d).push_back(p.dim);
    (i < n_good ? good_w : bad_w).push_back(p.window);
  }
  // Densities live on the closed integer range; candidates are rounded afterwards.
  const double dlo = space.dim.lo, dhi = space.dim.hi;
  const double wlo = space.window.lo, whi = space.window.hi;
  const ParzenEstimator ld(good_d, dlo, dhi, options.min_bandwidth);
  const ParzenEstimator gd(bad_d, dlo, dhi, options.min_bandwidth);
  const ParzenEstimator lw(good_w, wlo, whi, options.min_bandwidth);
  const ParzenEstimator gw(bad_w, wlo, whi, options.min_bandwidth);

  double best_score = -std::numeric_limits<double>::infinity();
  double best_d = ld.sample(rng), best_w = lw.sample(rng);
  for (int c = 0; c < options.n_candidates; ++c) {
    const double d = c == 0 ? best_d : ld.sample(rng);
    const double w = c == 0 ? best_w : lw.sample(rng);
    const double score = std::log(ld.density(d)) - std::log(gd.density(d)) +
                         std::log(lw.density(w)) - std::log(gw.density(w));
    if (score > best_score) {
      best_score = score;
      best_d = d;
      best_w = w;
    }
  }
  return {round_clamp(best_d, space.dim), round_clamp(best_w, space.window)};
}

std::uint64_t trial_seed(std::uint64_t base_seed, std::size_t index) {
  return splitmix64(base_seed ^ (0x7472696131ULL + static_cast<std::uint64_t>(index) * 0x9e3779b97f4a7c15ULL));
}

SearchResult run_search(const SearchSpace& space, std::size_t trials, std::uint64_t base_seed,
                        const TrialRunner& runner, const TpeOptions& options,
                        const std::function<void(const SearchResult&)>& on_update) {
  space.validate();
  if (trials < 1) throw InvalidArgument("search needs at least one trial");
  Rng rng(splitmix64(base_seed ^ 0x747065ULL));
  SearchResult result;
  for (std::size_t i = 0; i < trials; ++i) {
    const auto params = tpe_suggest(result.trials, space, rng, options);
    const auto seed = trial_seed(base_seed, i);
    try {
      Trial t = runner(params, seed, i);
      t.params = params;
      t.seed = seed;
      if (!std::isfinite(t.objective)) throw Error("trial objective is not finite");
      result.trials.push_back(std::move(t));
    } catch (const std::exception& e) {
      result.valid = false;
      result.error = "trial " + std::to_string(i) + ": " + e.what();
      if (on_update) on_update(result);
      throw;
    }
    if (on_update) on_update(result);
  }
  return result;
}

TrialRunner training_runner(std::span<const TokenizedDocument> corpus, const Vocabulary& vocab,
                            const SourceGraph& graph, const TrainConfig& base,
                            std::filesystem::path dir) {
  return [corpus, &vocab, &graph, base, dir](const TrialParams& p, std::uint64_t seed, std::size_t index) {
    TrainConfig cfg = base;
    cfg.dim = p.dim;
    cfg.window = p.window;
    cfg.seed = seed;
    const auto model = train(corpus, vocab, graph, cfg);
    std::ostringstream name;
    name << "model_" << std::setw(3) << std::setfill('0') << index << ".g2v";
    save_model(dir / name.str(), model);
    Trial t;
    t.params = p;
    t.seed = seed;
    t.objective = model.objective;
    t.model_path = name.str();
    return t;
  };
}

void write_manifest(const std::filesystem::path& path, const SearchResult& result) {
  json j;
  j["trials"] = json::array();
  for (const auto& t : result.trials) {
    j["trials"].push_back({{"model", t.model_path},
                           {"d", t.params.dim},
                           {"window", t.params.window},
                           {"seed", t.seed},
                           {"objective", t.objective}});
  }
  j["valid"] = result.valid;
  if (!result.valid) j["error"] = result.error;
  std::ofstream out(path);
  if (!out) throw Error("cannot create " + path.string());
  out << j.dump(2) << '\n';
}

SearchResult read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError("manifest: " + std::string(e.what()));
  }
  if (!j.contains("trials") || !j["trials"].is_array()) throw FormatError("manifest: missing 'trials'");
  SearchResult r;
  try {
    for (const auto& t : j["trials"]) {
      Trial trial;
      trial.model_path = t.at("model").get<std::string>();
      trial.params = {t.at("d").get<int>(), t.at("window").get<int>()};
      trial.seed = t.at("seed").get<std::uint64_t>();
      trial.objective = t.at("objective").get<double>();
      r.trials.push_back(std::move(trial));
    }
  } catch (const json::exception& e) {
    throw FormatError("manifest: " + std::string(e.what()));
  }
  r.valid = j.value("valid", true);
  r.error = j.value("error", std::string{});
  return r;
}

std::vector<std::filesystem::path> ensemble_model_paths(const std::filesystem::path& manifest) {
  const auto r = read_manifest(manifest);
  if (!r.valid) throw FormatError("manifest is flagged invalid: " + r.error);
  std::vector<std::filesystem::path> out;
  for (const auto& t : r.trials) {
    std::filesystem::path p = t.model_path;
    out.push_back(p.is_absolute() ? p : manifest.parent_path() / p);
  }
  return out;
}

}  // namespace gov2vec
