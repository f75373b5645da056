#include "gov2vec/analysis.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>

#include "gov2vec/error.hpp"

namespace gov2vec {

namespace {

std::vector<double> multiply(const Matrix<double>& a, std::span<const double> v) {
  std::vector<double> out(a.rows(), 0.0);
  for (std::size_t r = 0; r < a.rows(); ++r) out[r] = dot(a.row(r), v);
  return out;
}

double norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

// Removes the components along the given unit vectors; returns the remaining norm.
double orthogonalize(std::vector<double>& v, std::span<const std::vector<double>> basis) {
  for (const auto& b : basis) {
    const double c = dot(std::span<const double>(v), std::span<const double>(b));
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= c * b[i];
  }
  return norm(v);
}

// Dominant eigenvector of a symmetric PSD matrix restricted to the complement of basis.
std::vector<double> dominant_direction(const Matrix<double>& cov,
                                       std::span<const std::vector<double>> basis,
                                       double scale, const PcaOptions& options) {
  const std::size_t d = cov.cols();
  // Below this the remaining covariance is rounding noise.
  const double floor = 1e-12 * scale;
  // Start from the largest column of the matrix: nonzero whenever the matrix is.
  std::vector<double> v(d, 0.0);
  double best = -1.0;
  for (std::size_t c = 0; c < d; ++c) {
    std::vector<double> col(d);
    for (std::size_t r = 0; r < d; ++r) col[r] = cov(r, c);
    const double n = orthogonalize(col, basis);
    if (n > best) {
      best = n;
      v = std::move(col);
    }
  }
  if (best <= floor) {
    // Null space: any unit vector orthogonal to the basis will do.
    for (std::size_t c = 0; c < d; ++c) {
      std::vector<double> e(d, 0.0);
      e[c] = 1.0;
      const double n = orthogonalize(e, basis);
      if (n > 1e-6) {
        for (auto& x : e) x /= n;
        return e;
      }
    }
  }
  for (auto& x : v) x /= best;

  for (int it = 0; it < options.max_iterations; ++it) {
    auto next = multiply(cov, v);
    const double n = orthogonalize(next, basis);
    if (n <= floor) break;
    for (auto& x : next) x /= n;
    double diff = 0.0;
    for (std::size_t i = 0; i < d; ++i) diff = std::max(diff, std::abs(next[i] - v[i]));
    v = std::move(next);
    if (diff < options.tolerance) break;
  }
  const double n = orthogonalize(v, basis);
  for (auto& x : v) x /= n;
  return v;
}

void fix_sign(std::vector<double>& v) {
  std::size_t arg = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
  }
  if (v[arg] < 0) {
    for (auto& x : v) x = -x;
  }
}

double parse_double(const std::string& s, std::size_t lineno) {
  double v;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [p, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || p != last || !std::isfinite(v)) {
    throw FormatError("line " + std::to_string(lineno) + ": bad number '" + s + "'");
  }
  return v;
}

std::vector<std::pair<std::string, std::string>> read_two_columns(std::istream& in) {
  std::vector<std::pair<std::string, std::string>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
      throw FormatError("line " + std::to_string(lineno) + ": expected two tab-separated columns");
    }
    rows.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return rows;
}

}  // namespace

PcaResult pca_2d(std::span<const LabeledVector> vectors, const PcaOptions& options) {
  if (vectors.size() < 3) throw InvalidArgument("PCA needs at least 3 vectors");
  const std::size_t d = vectors.front().values.size();
  if (d < 2) throw InvalidArgument("PCA needs dimension >= 2");
  for (const auto& v : vectors) {
    if (v.values.size() != d) throw InvalidArgument("PCA vectors differ in dimension");
  }
  const std::size_t n = vectors.size();
  std::vector<double> mean(d, 0.0);
  for (const auto& v : vectors) {
    for (std::size_t i = 0; i < d; ++i) mean[i] += v.values[i];
  }
  for (auto& x : mean) x /= static_cast<double>(n);
  Matrix<double> centered(n, d);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < d; ++i) centered(r, i) = vectors[r].values[i] - mean[i];
  }
  Matrix<double> cov(d, d);
  for (std::size_t r = 0; r < n; ++r) {
    const auto x = centered.row(r);
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = i; j < d; ++j) cov(i, j) += x[i] * x[j];
    }
  }
  double trace = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      cov(i, j) /= static_cast<double>(n - 1);
      cov(j, i) = cov(i, j);
    }
    trace += cov(i, i);
  }
  if (!(trace > 0.0)) throw DegenerateData();

  std::vector<std::vector<double>> basis;
  PcaResult result;
  result.directions = Matrix<double>(2, d);
  for (int k = 0; k < 2; ++k) {
    auto dir = dominant_direction(cov, basis, trace, options);
    fix_sign(dir);
    const auto cv = multiply(cov, dir);
    result.variance[k] = std::max(0.0, dot(std::span<const double>(dir), std::span<const double>(cv)));
    std::copy(dir.begin(), dir.end(), result.directions.row(k).begin());
    basis.push_back(std::move(dir));
  }
  result.points.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto x = centered.row(r);
    result.points.push_back({vectors[r].label, dot(x, result.directions.row(0)),
                             dot(x, result.directions.row(1))});
  }
  return result;
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double r = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidArgument("spearman: series differ in length");
  if (a.size() < 3) throw InvalidArgument("spearman: need at least 3 pairs");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!std::isfinite(a[i]) || !std::isfinite(b[i])) throw InvalidArgument("spearman: non-finite value");
  }
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  // Both rank vectors have mean (n+1)/2.
  const double m = (static_cast<double>(a.size()) + 1.0) / 2.0;
  double num = 0, da = 0, db = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    num += (ra[i] - m) * (rb[i] - m);
    da += (ra[i] - m) * (ra[i] - m);
    db += (rb[i] - m) * (rb[i] - m);
  }
  if (da == 0.0 || db == 0.0) throw ConstantSeries();
  return std::clamp(num / std::sqrt(da * db), -1.0, 1.0);
}

SimilarityAccumulator::SimilarityAccumulator(std::vector<std::pair<std::string, std::string>> pairs)
    : pairs_(std::move(pairs)), sums_(pairs_.size(), 0.0) {}

void SimilarityAccumulator::add(const EmbeddingModel& model) {
  for (std::size_t i = 0; i < pairs_.size(); ++i) {
    const auto a = model.find_source(pairs_[i].first);
    if (!a) throw UnknownIdentifier("gov:" + pairs_[i].first);
    const auto b = model.find_source(pairs_[i].second);
    if (!b) throw UnknownIdentifier("gov:" + pairs_[i].second);
    sums_[i] += cosine(model.source_vector(*a), model.source_vector(*b));
  }
  ++models_;
}

std::vector<double> SimilarityAccumulator::means() const {
  if (models_ == 0) throw InvalidArgument("similarity series over an empty ensemble");
  std::vector<double> out(sums_);
  for (auto& x : out) x /= static_cast<double>(models_);
  return out;
}

std::vector<double> similarity_series(std::span<const EmbeddingModel> models,
                                      std::span<const std::pair<std::string, std::string>> pairs) {
  SimilarityAccumulator acc({pairs.begin(), pairs.end()});
  for (const auto& m : models) acc.add(m);
  return acc.means();
}

std::vector<std::pair<std::string, std::string>> read_pairs_tsv(std::istream& in) {
  return read_two_columns(in);
}

std::vector<std::pair<std::string, double>> read_series_tsv(std::istream& in) {
  std::vector<std::pair<std::string, double>> out;
  std::size_t lineno = 0;
  for (auto& [label, value] : read_two_columns(in)) {
    ++lineno;
    out.emplace_back(std::move(label), parse_double(value, lineno));
  }
  return out;
}

void write_points_tsv(std::ostream& out, std::span<const ProjectedPoint> points) {
  out << "label\tx\ty\n";
  for (const auto& p : points) out << p.label << '\t' << format_number(p.x) << '\t' << format_number(p.y) << '\n';
}

}  // namespace gov2vec
