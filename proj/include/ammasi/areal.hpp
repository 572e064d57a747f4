#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ammasi/geometry.hpp"

namespace ammasi::areal {

/// Symmetric road-count adjacency between grid cells. Zero diagonal; a weight
/// is the number of roads traversing both cells.
struct AdjacencyMatrix {
  int m = 0;
  std::map<std::pair<int, int>, int> entries;

  int weight(int i, int j) const {
    auto it = entries.find({i, j});
    return it == entries.end() ? 0 : it->second;
  }
};

/// Per-cell D-dimensional vectors, row-major m x dim.
struct AreaEmbeddingTable {
  int m = 0;
  int dim = 0;
  std::string source;  // "sinusoidal" | "node2vec"
  std::vector<double> vectors;

  std::span<const double> row(int cell) const {
    return {vectors.data() + static_cast<std::size_t>(cell) * dim,
            static_cast<std::size_t>(dim)};
  }
};

struct Node2VecConfig {
  int walks_per_node = 10;
  int walk_len = 40;
  int window = 7;
  int negatives = 5;
  int epochs = 5;
  double lr = 0.025;
};

/// Deterministic sinusoidal 2D positional encoding: the first dim/2 channels
/// encode the cell's column index, the rest its row index, each as
/// interleaved sin/cos over geometric frequencies. dim must be divisible by 4.
AreaEmbeddingTable sinusoidal_pe(const geom::ArealGrid& grid, int dim);

/// Counts, per unordered cell pair, the number of roads whose supercover
/// traversal contains both cells.
AdjacencyMatrix build_adjacency(std::span<const geom::Geometry> roads,
                                const geom::ArealGrid& grid);

/// First-order weighted random walks (walk probability proportional to edge
/// weight), num_walks per node. Walks from isolated nodes stop at length 1.
std::vector<std::vector<int>> random_walks(const AdjacencyMatrix& adj, int num_walks,
                                           int walk_len, std::uint64_t seed);

/// Skip-gram with negative sampling over (center, context) pairs within
/// `window`. Negatives are drawn from the walk-visit unigram distribution
/// raised to 0.75. Cells never visited keep the zero vector; only the input
/// embedding matrix is returned. Pass epoch_loss to record the mean SGNS
/// objective per epoch.
AreaEmbeddingTable train_node2vec(const std::vector<std::vector<int>>& walks, int m,
                                  int dim, const Node2VecConfig& cfg,
                                  std::uint64_t seed,
                                  std::vector<double>* epoch_loss = nullptr);

}  // namespace ammasi::areal
