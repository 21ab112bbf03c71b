#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace cpps {

// Index of unordered pair (i,j), i<j, in a flat upper-triangular layout.
inline std::size_t pair_index(std::size_t i, std::size_t j, std::size_t n) {
  if (i == j || i >= n || j >= n) throw std::invalid_argument("pair_index: bad pair");
  if (i > j) std::swap(i, j);
  return i * n - i * (i + 1) / 2 + (j - i - 1);
}

inline std::size_t pair_count(std::size_t n) { return n * (n - 1) / 2; }

// All unordered pairs in pair_index order.
inline std::vector<std::pair<std::size_t, std::size_t>> all_pairs(std::size_t n) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  out.reserve(pair_count(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) out.emplace_back(i, j);
  return out;
}

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n), rank_(n, 0) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
  }
  bool same(std::size_t a, std::size_t b) { return find(a) == find(b); }
  std::size_t components() {
    std::size_t c = 0;
    for (std::size_t i = 0; i < parent_.size(); ++i)
      if (find(i) == i) ++c;
    return c;
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> rank_;
};

}  // namespace cpps
