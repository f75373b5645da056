#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gov2vec/corpus.hpp"
#include "gov2vec/error.hpp"
#include "gov2vec/matrix.hpp"

namespace gov2vec {

// Binary Huffman code over the vocabulary. Internal nodes are numbered 0..M-2
// in creation order, so the root is M-2. For each word, path[k] is the k-th
// internal node from the root and code[k] the branch taken there.
class HuffmanTree {
 public:
  HuffmanTree() = default;
  explicit HuffmanTree(std::span<const std::uint64_t> counts);
  explicit HuffmanTree(const Vocabulary& vocab);

  std::size_t leaf_count() const noexcept { return codes_.size(); }
  std::size_t internal_count() const noexcept { return leaf_count() == 0 ? 0 : leaf_count() - 1; }

  std::span<const std::uint8_t> code(std::size_t word) const noexcept { return codes_[word]; }
  std::span<const std::uint32_t> path(std::size_t word) const noexcept { return paths_[word]; }

  // Children of internal node i; values >= internal_count() denote leaves (word = value - internal_count()).
  std::uint32_t child(std::size_t node, int bit) const noexcept { return children_[node][bit]; }

  friend bool operator==(const HuffmanTree&, const HuffmanTree&) = default;

 private:
  std::vector<std::vector<std::uint8_t>> codes_;
  std::vector<std::vector<std::uint32_t>> paths_;
  std::vector<std::array<std::uint32_t, 2>> children_;
};

inline constexpr double kSigmoidClamp = 30.0;

inline double sigmoid(double x) noexcept {
  x = std::clamp(x, -kSigmoidClamp, kSigmoidClamp);
  return 1.0 / (1.0 + std::exp(-x));
}

// -log(sigmoid(x)) with the same clamp.
inline double neg_log_sigmoid(double x) noexcept {
  x = std::clamp(x, -kSigmoidClamp, kSigmoidClamp);
  return std::log1p(std::exp(-x));
}

// Bit 1 selects sigmoid(v.h), bit 0 selects sigmoid(-v.h).
template <typename T>
double hs_probability(const Matrix<T>& nodes, const HuffmanTree& tree, std::span<const T> h,
                      std::size_t word) {
  if (word >= tree.leaf_count()) throw UnknownWord("#" + std::to_string(word));
  const auto code = tree.code(word);
  const auto path = tree.path(word);
  double p = 1.0;
  for (std::size_t k = 0; k < path.size(); ++k) {
    const double x = dot(nodes.row(path[k]), h);
    p *= sigmoid(code[k] ? x : -x);
  }
  return p;
}

template <typename T>
double hs_loss(const Matrix<T>& nodes, const HuffmanTree& tree, std::span<const T> h,
               std::size_t word) {
  if (word >= tree.leaf_count()) throw UnknownWord("#" + std::to_string(word));
  const auto code = tree.code(word);
  const auto path = tree.path(word);
  double loss = 0.0;
  for (std::size_t k = 0; k < path.size(); ++k) {
    const double x = dot(nodes.row(path[k]), h);
    loss += neg_log_sigmoid(code[k] ? x : -x);
  }
  return loss;
}

template <typename T>
struct HsGradients {
  double loss = 0.0;
  std::vector<T> grad_h;
  // One row per path node, aligned with tree.path(word).
  Matrix<T> grad_nodes;
};

template <typename T>
HsGradients<T> hs_loss_and_grads(const Matrix<T>& nodes, const HuffmanTree& tree,
                                 std::span<const T> h, std::size_t word) {
  if (word >= tree.leaf_count()) throw UnknownWord("#" + std::to_string(word));
  const auto code = tree.code(word);
  const auto path = tree.path(word);
  HsGradients<T> g;
  g.grad_h.assign(h.size(), T{});
  g.grad_nodes = Matrix<T>(path.size(), h.size());
  for (std::size_t k = 0; k < path.size(); ++k) {
    const auto v = nodes.row(path[k]);
    const double x = dot(v, h);
    g.loss += neg_log_sigmoid(code[k] ? x : -x);
    const double dx = sigmoid(x) - code[k];
    auto gn = g.grad_nodes.row(k);
    for (std::size_t i = 0; i < h.size(); ++i) {
      gn[i] = static_cast<T>(dx * h[i]);
      g.grad_h[i] += static_cast<T>(dx * v[i]);
    }
  }
  return g;
}

// Training kernel: accumulates dloss/dh into grad_h (which the caller zeroes),
// applies -lr * gradient to every path node in place, and returns the loss.
// Node gradients use the node values before their own update.
template <typename T>
double hs_descend(Matrix<T>& nodes, const HuffmanTree& tree, std::span<const T> h,
                  std::size_t word, double lr, std::span<T> grad_h) {
  const auto code = tree.code(word);
  const auto path = tree.path(word);
  double loss = 0.0;
  const std::size_t d = h.size();
  for (std::size_t k = 0; k < path.size(); ++k) {
    auto v = nodes.row(path[k]);
    T x = 0;
    for (std::size_t i = 0; i < d; ++i) x += v[i] * h[i];
    loss += neg_log_sigmoid(code[k] ? x : -x);
    const T dx = static_cast<T>(sigmoid(x) - code[k]);
    const T step = static_cast<T>(-lr) * dx;
    for (std::size_t i = 0; i < d; ++i) {
      grad_h[i] += dx * v[i];
      v[i] += step * h[i];
    }
  }
  return loss;
}

}  // namespace gov2vec
