#include "gov2vec/hsm.hpp"

#include <queue>
#include <tuple>

namespace gov2vec {

HuffmanTree::HuffmanTree(std::span<const std::uint64_t> counts) {
  const std::size_t m = counts.size();
  codes_.resize(m);
  paths_.resize(m);
  if (m <= 1) return;

  // Node ids: leaves 0..m-1, internal nodes m..2m-2 in creation order.
  // Equal weights pop the earliest-created node first.
  using Item = std::pair<std::uint64_t, std::uint32_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  for (std::uint32_t i = 0; i < m; ++i) queue.emplace(counts[i], i);

  std::vector<std::uint32_t> parent(2 * m - 1, 0);
  std::vector<std::uint8_t> branch(2 * m - 1, 0);
  children_.resize(m - 1);
  for (std::uint32_t next = static_cast<std::uint32_t>(m); next < 2 * m - 1; ++next) {
    const auto [w0, a] = queue.top();
    queue.pop();
    const auto [w1, b] = queue.top();
    queue.pop();
    parent[a] = parent[b] = next;
    branch[a] = 0;
    branch[b] = 1;
    const auto internal = next - static_cast<std::uint32_t>(m);
    // Child ids as seen from outside: internal nodes 0..m-2, leaves offset by m-1.
    auto external = [m](std::uint32_t id) {
      return id >= m ? id - static_cast<std::uint32_t>(m) : id + static_cast<std::uint32_t>(m - 1);
    };
    children_[internal] = {external(a), external(b)};
    queue.emplace(w0 + w1, next);
  }

  const std::uint32_t root = static_cast<std::uint32_t>(2 * m - 2);
  for (std::uint32_t w = 0; w < m; ++w) {
    auto& code = codes_[w];
    auto& path = paths_[w];
    for (std::uint32_t n = w; n != root; n = parent[n]) {
      code.push_back(branch[n]);
      path.push_back(parent[n] - static_cast<std::uint32_t>(m));
    }
    std::reverse(code.begin(), code.end());
    std::reverse(path.begin(), path.end());
  }
}

namespace {
std::vector<std::uint64_t> counts_of(const Vocabulary& vocab) {
  std::vector<std::uint64_t> c;
  c.reserve(vocab.size());
  for (const auto& e : vocab.entries()) c.push_back(e.count);
  return c;
}
}  // namespace

HuffmanTree::HuffmanTree(const Vocabulary& vocab) : HuffmanTree(counts_of(vocab)) {}

}  // namespace gov2vec
