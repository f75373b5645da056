#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gov2vec/query.hpp"
#include "gov2vec/trainer.hpp"

namespace gov2vec {

struct ProjectedPoint {
  std::string label;
  double x = 0.0;
  double y = 0.0;
};

struct PcaResult {
  std::vector<ProjectedPoint> points;
  // Row k is the k-th unit principal direction.
  Matrix<double> directions;
  double variance[2] = {0.0, 0.0};
};

struct PcaOptions {
  double tolerance = 1e-10;
  int max_iterations = 10000;
};

// Top-two principal components by power iteration with deflation on the
// covariance. Each direction's largest-magnitude loading is made positive.
PcaResult pca_2d(std::span<const LabeledVector> vectors, const PcaOptions& options = {});

// Fractional ranks (1-based, ties averaged).
std::vector<double> average_ranks(std::span<const double> values);

// Pearson correlation of average ranks. Throws ConstantSeries.
double spearman(std::span<const double> a, std::span<const double> b);

// Per pair, the ensemble-mean cosine between the two source vectors.
std::vector<double> similarity_series(std::span<const EmbeddingModel> models,
                                      std::span<const std::pair<std::string, std::string>> pairs);

// Running form of similarity_series for ensembles loaded one model at a time.
class SimilarityAccumulator {
 public:
  explicit SimilarityAccumulator(std::vector<std::pair<std::string, std::string>> pairs);
  void add(const EmbeddingModel& model);
  std::vector<double> means() const;
  const std::vector<std::pair<std::string, std::string>>& pairs() const noexcept { return pairs_; }

 private:
  std::vector<std::pair<std::string, std::string>> pairs_;
  std::vector<double> sums_;
  std::size_t models_ = 0;
};

// label<TAB>label
std::vector<std::pair<std::string, std::string>> read_pairs_tsv(std::istream& in);
// label<TAB>value
std::vector<std::pair<std::string, double>> read_series_tsv(std::istream& in);
void write_points_tsv(std::ostream& out, std::span<const ProjectedPoint> points);

}  // namespace gov2vec
