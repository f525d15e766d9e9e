#pragma once

// Directed weighted communication graphs, Laplacians, the basic
// bi-component decomposition and the standard topology generators.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "cohsync/linalg.hpp"

namespace cohsync::graph {

/// A weighted edge from `from` to `to`; node `to` observes node `from`.
/// Indices are zero-based.
struct Edge {
  int from = 0;
  int to = 0;
  double weight = 1.0;
};

/// Immutable weighted digraph stored as its adjacency matrix a_ij, where
/// a_ij > 0 means agent i receives information from agent j.
class DirectedWeightedGraph {
 public:
  DirectedWeightedGraph() = default;
  explicit DirectedWeightedGraph(Matrix adjacency);
  static DirectedWeightedGraph from_edges(int node_count, const std::vector<Edge>& edges);

  int node_count() const { return static_cast<int>(adjacency_.rows()); }
  const Matrix& adjacency() const { return adjacency_; }
  double weight(int i, int j) const { return adjacency_(i, j); }
  std::vector<Edge> edges() const;
  bool is_symmetric() const;

  /// Induced subgraph on `nodes`, relabelled 0..k-1 in the given order.
  DirectedWeightedGraph subgraph(const std::vector<int>& nodes) const;

  friend bool operator==(const DirectedWeightedGraph& x, const DirectedWeightedGraph& y) {
    return x.adjacency_ == y.adjacency_;
  }

 private:
  Matrix adjacency_;
};

struct LaplacianDecomposition {
  Matrix laplacian;
  /// permutation[k] is the original node placed at position k: the
  /// non-basic (grounded) nodes first, then each basic component in turn.
  std::vector<int> permutation;
  std::vector<std::vector<int>> basic_components;
  int nonbasic_block_size = 0;

  /// P L P^T with P the permutation above; block upper triangular.
  Matrix permuted_laplacian() const;
};

struct HWeights {
  Vector h;
  double gamma = 0.0;
};

Matrix laplacian(const DirectedWeightedGraph& g);

/// Strongly connected components (Tarjan), each sorted ascending, listed in
/// order of their smallest node.
std::vector<std::vector<int>> strongly_connected_components(const DirectedWeightedGraph& g);

LaplacianDecomposition basic_bicomponents(const DirectedWeightedGraph& g);

bool is_strongly_connected(const DirectedWeightedGraph& g);

/// Recursive cross-shaped fractal with 5, 25 or 121 nodes for generations
/// 1, 2, 3. Node 0 is the global centre. The directed variant orients every
/// edge away from the centre.
DirectedWeightedGraph generate_vicsek_fractal(int generation, bool directed);

/// Node i observes node (i + o) mod N for each offset o.
DirectedWeightedGraph generate_circulant(int node_count, const std::vector<int>& offsets,
                                         bool directed);

/// Disjoint union of seeded random strongly connected digraphs, each built on
/// a random Hamiltonian cycle plus extra random edges.
DirectedWeightedGraph generate_disconnected_composite(const std::vector<int>& component_sizes,
                                                      std::uint64_t seed);

/// One seeded random strongly connected digraph; `extra_edge_permille` is the
/// probability (per mille) of each additional non-cycle edge.
DirectedWeightedGraph generate_strongly_connected(int node_count, std::uint64_t seed,
                                                  int extra_edge_permille = 200);

/// Positive left null vector h of L (min h_i = 1) and the largest gamma with
/// H L + L^T H >= 2 gamma L^T L. Requires a strongly connected graph.
HWeights compute_h_weights(const Matrix& laplacian);

/// Smallest eigenvalue of H L + L^T H - 2 gamma L^T L.
double h_weights_margin(const Matrix& laplacian, const HWeights& weights);

/// Edge-list text format:
///   nodes <N>
///   <i> <j> <weight>      (one line per nonzero a_ij, 1-based)
/// Lines starting with '#' are comments.
void write_edge_list(std::ostream& out, const DirectedWeightedGraph& g);
DirectedWeightedGraph read_edge_list(std::istream& in);

}  // namespace cohsync::graph
