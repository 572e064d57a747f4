#include "ammasi/areal.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "ammasi/rng.hpp"

namespace ammasi::areal {

AreaEmbeddingTable sinusoidal_pe(const geom::ArealGrid& grid, int dim) {
  if (dim <= 0 || dim % 4 != 0)
    throw std::invalid_argument("sinusoidal_pe: dim must be positive and divisible by 4, got " +
                                std::to_string(dim));
  AreaEmbeddingTable table;
  table.m = grid.cell_count();
  table.dim = dim;
  table.source = "sinusoidal";
  table.vectors.assign(static_cast<std::size_t>(table.m) * dim, 0.0);

  const int half = dim / 2;      // channels per axis
  const int pairs = half / 2;    // sin/cos pairs per axis
  for (int iy = 0; iy < grid.my; ++iy) {
    for (int ix = 0; ix < grid.mx; ++ix) {
      double* row = table.vectors.data() +
                    static_cast<std::size_t>(iy * grid.mx + ix) * dim;
      for (int p = 0; p < pairs; ++p) {
        const double freq = std::pow(10000.0, -2.0 * p / static_cast<double>(half));
        row[2 * p] = std::sin(ix * freq);
        row[2 * p + 1] = std::cos(ix * freq);
        row[half + 2 * p] = std::sin(iy * freq);
        row[half + 2 * p + 1] = std::cos(iy * freq);
      }
    }
  }
  return table;
}

AdjacencyMatrix build_adjacency(std::span<const geom::Geometry> roads,
                                const geom::ArealGrid& grid) {
  AdjacencyMatrix adj;
  adj.m = grid.cell_count();
  for (const auto& road : roads) {
    const std::vector<int> cells = geom::line_cells(road, grid);
    for (std::size_t a = 0; a < cells.size(); ++a)
      for (std::size_t b = a + 1; b < cells.size(); ++b) {
        adj.entries[{cells[a], cells[b]}] += 1;
        adj.entries[{cells[b], cells[a]}] += 1;
      }
  }
  return adj;
}

namespace {

struct WalkGraph {
  // Per node: sorted neighbor ids, their weights, and the weight total.
  std::vector<std::vector<int>> nbr;
  std::vector<std::vector<double>> wgt;
  std::vector<double> total;

  explicit WalkGraph(const AdjacencyMatrix& adj) {
    nbr.resize(adj.m);
    wgt.resize(adj.m);
    total.assign(adj.m, 0.0);
    for (const auto& [key, w] : adj.entries) {
      const auto [i, j] = key;
      nbr[i].push_back(j);
      wgt[i].push_back(static_cast<double>(w));
      total[i] += static_cast<double>(w);
    }
  }
};

}  // namespace

std::vector<std::vector<int>> random_walks(const AdjacencyMatrix& adj, int num_walks,
                                           int walk_len, std::uint64_t seed) {
  if (num_walks < 1) throw std::invalid_argument("random_walks: num_walks must be >= 1");
  if (walk_len < 2) throw std::invalid_argument("random_walks: walk_len must be >= 2");
  const WalkGraph graph(adj);

  std::vector<std::vector<int>> walks;
  walks.reserve(static_cast<std::size_t>(adj.m) * num_walks);
  for (int node = 0; node < adj.m; ++node) {
    for (int w = 0; w < num_walks; ++w) {
      Rng rng = Rng::stream(seed, "walks", static_cast<std::uint64_t>(node),
                            static_cast<std::uint64_t>(w));
      std::vector<int> walk{node};
      int cur = node;
      while (static_cast<int>(walk.size()) < walk_len) {
        if (graph.nbr[cur].empty()) break;
        const std::size_t pick = rng.weighted_index(graph.wgt[cur], graph.total[cur]);
        cur = graph.nbr[cur][pick];
        walk.push_back(cur);
      }
      walks.push_back(std::move(walk));
    }
  }
  return walks;
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

AreaEmbeddingTable train_node2vec(const std::vector<std::vector<int>>& walks, int m,
                                  int dim, const Node2VecConfig& cfg,
                                  std::uint64_t seed,
                                  std::vector<double>* epoch_loss) {
  if (walks.empty()) throw std::invalid_argument("train_node2vec: no walks");
  if (dim < 2) throw std::invalid_argument("train_node2vec: dim must be >= 2");
  if (cfg.window < 1) throw std::invalid_argument("train_node2vec: window must be >= 1");

  // Visit counts drive both the init mask (unvisited cells stay zero) and the
  // ^0.75 negative-sampling distribution. Length-1 walks (isolated cells)
  // produce no training pairs and leave their cell at the zero vector.
  std::vector<double> visits(m, 0.0);
  for (const auto& walk : walks) {
    for (int node : walk)
      if (node < 0 || node >= m)
        throw std::invalid_argument("train_node2vec: walk node out of range");
    if (walk.size() < 2) continue;
    for (int node : walk) visits[node] += 1.0;
  }
  std::vector<int> visited_nodes;
  std::vector<double> neg_weight;
  double neg_total = 0.0;
  for (int node = 0; node < m; ++node) {
    if (visits[node] > 0.0) {
      visited_nodes.push_back(node);
      neg_weight.push_back(std::pow(visits[node], 0.75));
      neg_total += neg_weight.back();
    }
  }

  AreaEmbeddingTable table;
  table.m = m;
  table.dim = dim;
  table.source = "node2vec";
  table.vectors.assign(static_cast<std::size_t>(m) * dim, 0.0);
  std::vector<double> out_emb(static_cast<std::size_t>(m) * dim, 0.0);

  Rng init = Rng::stream(seed, "node2vec-init");
  for (int node : visited_nodes) {
    double* row = table.vectors.data() + static_cast<std::size_t>(node) * dim;
    for (int c = 0; c < dim; ++c)
      row[c] = init.uniform(-0.5 / dim, 0.5 / dim);
  }

  std::vector<std::pair<int, int>> pairs;  // (center, context)
  for (const auto& walk : walks) {
    const int len = static_cast<int>(walk.size());
    for (int i = 0; i < len; ++i)
      for (int off = 1; off <= cfg.window; ++off) {
        if (i + off < len) pairs.emplace_back(walk[i], walk[i + off]);
        if (i - off >= 0) pairs.emplace_back(walk[i], walk[i - off]);
      }
  }
  if (pairs.empty()) {
    if (epoch_loss) epoch_loss->assign(std::max(cfg.epochs, 0), 0.0);
    return table;  // only length-1 walks; nothing to train on
  }

  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<double> grad_center(dim);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng = Rng::stream(seed, "node2vec-epoch", static_cast<std::uint64_t>(epoch));
    rng.shuffle(order);
    double loss_sum = 0.0;

    for (std::size_t oi : order) {
      const auto [center, context] = pairs[oi];
      double* u = table.vectors.data() + static_cast<std::size_t>(center) * dim;
      std::fill(grad_center.begin(), grad_center.end(), 0.0);

      auto update = [&](int target, double label) {
        double* v = out_emb.data() + static_cast<std::size_t>(target) * dim;
        double dot = 0.0;
        for (int c = 0; c < dim; ++c) dot += u[c] * v[c];
        const double s = sigmoid(dot);
        loss_sum += label > 0.5 ? -std::log(std::max(s, 1e-12))
                                : -std::log(std::max(1.0 - s, 1e-12));
        const double g = (label - s) * cfg.lr;
        for (int c = 0; c < dim; ++c) {
          grad_center[c] += g * v[c];
          v[c] += g * u[c];
        }
      };

      update(context, 1.0);
      for (int k = 0; k < cfg.negatives; ++k) {
        const int neg = visited_nodes[rng.weighted_index(neg_weight, neg_total)];
        if (neg == context) continue;
        update(neg, 0.0);
      }
      for (int c = 0; c < dim; ++c) u[c] += grad_center[c];
    }
    if (epoch_loss) epoch_loss->push_back(loss_sum / static_cast<double>(pairs.size()));
  }
  return table;
}

}  // namespace ammasi::areal
