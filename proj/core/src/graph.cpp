#include "cohsync/graph.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <queue>
#include <random>
#include <sstream>
#include <utility>

#include <Eigen/Eigenvalues>

namespace cohsync::graph {

DirectedWeightedGraph::DirectedWeightedGraph(Matrix adjacency) : adjacency_(std::move(adjacency)) {
  if (adjacency_.rows() != adjacency_.cols()) {
    throw std::invalid_argument("graph: adjacency matrix must be square");
  }
  if (!adjacency_.allFinite()) {
    throw std::invalid_argument("graph: non-finite edge weight");
  }
  if ((adjacency_.array() < 0.0).any()) {
    throw std::invalid_argument("graph: edge weights must be nonnegative");
  }
  if ((adjacency_.diagonal().array() != 0.0).any()) {
    throw std::invalid_argument("graph: self-loops are not allowed");
  }
}

DirectedWeightedGraph DirectedWeightedGraph::from_edges(int node_count,
                                                        const std::vector<Edge>& edges) {
  if (node_count < 1) throw std::invalid_argument("graph: node count must be positive");
  Matrix a = Matrix::Zero(node_count, node_count);
  for (const Edge& e : edges) {
    if (e.from < 0 || e.from >= node_count || e.to < 0 || e.to >= node_count) {
      throw std::invalid_argument("graph: edge endpoint out of range");
    }
    a(e.to, e.from) = e.weight;
  }
  return DirectedWeightedGraph(std::move(a));
}

std::vector<Edge> DirectedWeightedGraph::edges() const {
  std::vector<Edge> out;
  for (int i = 0; i < node_count(); ++i) {
    for (int j = 0; j < node_count(); ++j) {
      if (adjacency_(i, j) != 0.0) out.push_back({j, i, adjacency_(i, j)});
    }
  }
  return out;
}

bool DirectedWeightedGraph::is_symmetric() const {
  return adjacency_ == adjacency_.transpose();
}

DirectedWeightedGraph DirectedWeightedGraph::subgraph(const std::vector<int>& nodes) const {
  const int k = static_cast<int>(nodes.size());
  Matrix a(k, k);
  for (int r = 0; r < k; ++r) {
    for (int c = 0; c < k; ++c) a(r, c) = adjacency_(nodes[r], nodes[c]);
  }
  return DirectedWeightedGraph(std::move(a));
}

Matrix LaplacianDecomposition::permuted_laplacian() const {
  const int n = static_cast<int>(permutation.size());
  Matrix out(n, n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) out(r, c) = laplacian(permutation[r], permutation[c]);
  }
  return out;
}

Matrix laplacian(const DirectedWeightedGraph& g) {
  Matrix l = -g.adjacency();
  l.diagonal() = g.adjacency().rowwise().sum();
  return l;
}

std::vector<std::vector<int>> strongly_connected_components(const DirectedWeightedGraph& g) {
  // Iterative Tarjan over the "j -> i" edges (information flow).
  const int n = g.node_count();
  std::vector<std::vector<int>> out_edges(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (g.weight(i, j) > 0.0) out_edges[j].push_back(i);
    }
  }
  std::vector<int> index(n, -1), low(n, 0);
  std::vector<bool> on_stack(n, false);
  std::vector<int> stack;
  std::vector<std::vector<int>> components;
  int counter = 0;

  struct Frame {
    int node;
    std::size_t next_edge;
  };
  for (int root = 0; root < n; ++root) {
    if (index[root] >= 0) continue;
    std::vector<Frame> call{{root, 0}};
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = true;
    while (!call.empty()) {
      Frame& f = call.back();
      if (f.next_edge < out_edges[f.node].size()) {
        const int w = out_edges[f.node][f.next_edge++];
        if (index[w] < 0) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = true;
          call.push_back({w, 0});
        } else if (on_stack[w]) {
          low[f.node] = std::min(low[f.node], index[w]);
        }
        continue;
      }
      const int v = f.node;
      call.pop_back();
      if (!call.empty()) low[call.back().node] = std::min(low[call.back().node], low[v]);
      if (low[v] == index[v]) {
        std::vector<int> comp;
        int w = -1;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          comp.push_back(w);
        } while (w != v);
        std::sort(comp.begin(), comp.end());
        components.push_back(std::move(comp));
      }
    }
  }
  std::sort(components.begin(), components.end(),
            [](const auto& x, const auto& y) { return x.front() < y.front(); });
  return components;
}

bool is_strongly_connected(const DirectedWeightedGraph& g) {
  return strongly_connected_components(g).size() == 1;
}

LaplacianDecomposition basic_bicomponents(const DirectedWeightedGraph& g) {
  const int n = g.node_count();
  LaplacianDecomposition out;
  out.laplacian = laplacian(g);
  const auto components = strongly_connected_components(g);
  std::vector<int> owner(n, -1);
  for (std::size_t c = 0; c < components.size(); ++c) {
    for (int v : components[c]) owner[v] = static_cast<int>(c);
  }
  std::vector<bool> basic(components.size(), true);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (g.weight(i, j) > 0.0 && owner[i] != owner[j]) basic[owner[i]] = false;
    }
  }
  std::vector<int> nonbasic;
  for (std::size_t c = 0; c < components.size(); ++c) {
    if (basic[c]) {
      out.basic_components.push_back(components[c]);
    } else {
      nonbasic.insert(nonbasic.end(), components[c].begin(), components[c].end());
    }
  }
  std::sort(nonbasic.begin(), nonbasic.end());
  out.nonbasic_block_size = static_cast<int>(nonbasic.size());
  out.permutation = nonbasic;
  for (const auto& comp : out.basic_components) {
    out.permutation.insert(out.permutation.end(), comp.begin(), comp.end());
  }
  return out;
}

namespace {

using Point = std::pair<int, int>;

struct FractalBlock {
  std::vector<Point> nodes;
  std::vector<std::pair<Point, Point>> edges;
  int extent = 0;  // arm tips sit at distance `extent` from the block centre
};

FractalBlock translate(const FractalBlock& b, int dx, int dy) {
  FractalBlock out;
  out.extent = b.extent;
  for (const auto& [x, y] : b.nodes) out.nodes.push_back({x + dx, y + dy});
  for (const auto& [p, q] : b.edges) {
    out.edges.push_back({{p.first + dx, p.second + dy}, {q.first + dx, q.second + dy}});
  }
  return out;
}

FractalBlock vicsek_block(int generation) {
  constexpr std::array<Point, 4> kDirections{{{1, 0}, {0, 1}, {-1, 0}, {0, -1}}};
  FractalBlock base;
  base.nodes.push_back({0, 0});
  for (const auto& [dx, dy] : kDirections) {
    base.nodes.push_back({dx, dy});
    base.edges.push_back({{0, 0}, {dx, dy}});
  }
  base.extent = 1;
  FractalBlock current = base;
  for (int g = 2; g <= generation; ++g) {
    // Generation 2 joins the copies' facing tips with an edge; later
    // generations let the facing tips coincide.
    const bool link = (g == 2);
    const int shift = link ? 2 * current.extent + 1 : 2 * current.extent;
    FractalBlock next;
    next.extent = shift + current.extent;
    auto append = [&](const FractalBlock& b) {
      next.nodes.insert(next.nodes.end(), b.nodes.begin(), b.nodes.end());
      next.edges.insert(next.edges.end(), b.edges.begin(), b.edges.end());
    };
    append(current);
    for (const auto& [dx, dy] : kDirections) {
      append(translate(current, dx * shift, dy * shift));
      if (link) {
        const Point inner{dx * current.extent, dy * current.extent};
        const Point outer{dx * (shift - current.extent), dy * (shift - current.extent)};
        next.edges.push_back({inner, outer});
      }
    }
    std::sort(next.nodes.begin(), next.nodes.end());
    next.nodes.erase(std::unique(next.nodes.begin(), next.nodes.end()), next.nodes.end());
    current = std::move(next);
  }
  return current;
}

// Portable integer draws from the standardized mt19937_64 sequence.
std::uint64_t draw_below(std::mt19937_64& engine, std::uint64_t bound) {
  return engine() % bound;
}

void add_random_strongly_connected(Matrix& a, int offset, int size, std::mt19937_64& engine,
                                   int extra_edge_permille) {
  std::vector<int> order(size);
  for (int k = 0; k < size; ++k) order[k] = k;
  for (int k = size - 1; k > 0; --k) {
    const int r = static_cast<int>(draw_below(engine, static_cast<std::uint64_t>(k) + 1));
    std::swap(order[k], order[r]);
  }
  for (int k = 0; k < size; ++k) {
    const int from = order[k];
    const int to = order[(k + 1) % size];
    a(offset + to, offset + from) = 1.0;
  }
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j < size; ++j) {
      if (i == j || a(offset + i, offset + j) != 0.0) continue;
      if (draw_below(engine, 1000) < static_cast<std::uint64_t>(extra_edge_permille)) {
        a(offset + i, offset + j) = 1.0;
      }
    }
  }
}

}  // namespace

DirectedWeightedGraph generate_vicsek_fractal(int generation, bool directed) {
  if (generation < 1 || generation > 3) {
    throw std::invalid_argument("generate_vicsek_fractal: generation must be 1, 2 or 3");
  }
  FractalBlock block = vicsek_block(generation);
  // Label by Manhattan distance from the centre, then lexicographically.
  std::sort(block.nodes.begin(), block.nodes.end(), [](const Point& p, const Point& q) {
    const int dp = std::abs(p.first) + std::abs(p.second);
    const int dq = std::abs(q.first) + std::abs(q.second);
    if (dp != dq) return dp < dq;
    return p < q;
  });
  std::map<Point, int> label;
  for (std::size_t k = 0; k < block.nodes.size(); ++k) label[block.nodes[k]] = static_cast<int>(k);
  const int n = static_cast<int>(block.nodes.size());

  std::vector<std::vector<int>> neighbours(n);
  for (const auto& [p, q] : block.edges) {
    neighbours[label.at(p)].push_back(label.at(q));
    neighbours[label.at(q)].push_back(label.at(p));
  }
  std::vector<int> depth(n, -1);
  std::queue<int> frontier;
  depth[0] = 0;
  frontier.push(0);
  while (!frontier.empty()) {
    const int v = frontier.front();
    frontier.pop();
    for (int w : neighbours[v]) {
      if (depth[w] < 0) {
        depth[w] = depth[v] + 1;
        frontier.push(w);
      }
    }
  }
  Matrix a = Matrix::Zero(n, n);
  for (const auto& [p, q] : block.edges) {
    const int u = label.at(p);
    const int v = label.at(q);
    if (directed) {
      const int parent = depth[u] < depth[v] ? u : v;
      const int child = parent == u ? v : u;
      a(child, parent) = 1.0;
    } else {
      a(u, v) = 1.0;
      a(v, u) = 1.0;
    }
  }
  return DirectedWeightedGraph(std::move(a));
}

DirectedWeightedGraph generate_circulant(int node_count, const std::vector<int>& offsets,
                                         bool directed) {
  if (node_count < 3) throw std::invalid_argument("generate_circulant: need at least 3 nodes");
  if (offsets.empty()) throw std::invalid_argument("generate_circulant: offsets must be nonempty");
  Matrix a = Matrix::Zero(node_count, node_count);
  for (int o : offsets) {
    if (o < 1 || o >= node_count) {
      throw std::invalid_argument("generate_circulant: offsets must lie in 1..N-1");
    }
    for (int i = 0; i < node_count; ++i) {
      const int j = (i + o) % node_count;
      a(i, j) = 1.0;
      if (!directed) a(j, i) = 1.0;
    }
  }
  return DirectedWeightedGraph(std::move(a));
}

DirectedWeightedGraph generate_strongly_connected(int node_count, std::uint64_t seed,
                                                  int extra_edge_permille) {
  if (node_count < 2) {
    throw std::invalid_argument("generate_strongly_connected: need at least 2 nodes");
  }
  std::mt19937_64 engine(seed);
  Matrix a = Matrix::Zero(node_count, node_count);
  add_random_strongly_connected(a, 0, node_count, engine, extra_edge_permille);
  return DirectedWeightedGraph(std::move(a));
}

DirectedWeightedGraph generate_disconnected_composite(const std::vector<int>& component_sizes,
                                                      std::uint64_t seed) {
  if (component_sizes.empty()) {
    throw std::invalid_argument("generate_disconnected_composite: no components");
  }
  int total = 0;
  for (int s : component_sizes) {
    if (s < 2) {
      throw std::invalid_argument("generate_disconnected_composite: component size must be >= 2");
    }
    total += s;
  }
  std::mt19937_64 engine(seed);
  Matrix a = Matrix::Zero(total, total);
  int offset = 0;
  for (int s : component_sizes) {
    add_random_strongly_connected(a, offset, s, engine, 200);
    offset += s;
  }
  return DirectedWeightedGraph(std::move(a));
}

HWeights compute_h_weights(const Matrix& l) {
  if (l.rows() != l.cols() || l.rows() < 2) {
    throw std::invalid_argument("compute_h_weights: need a square Laplacian with N >= 2");
  }
  const int n = static_cast<int>(l.rows());
  Matrix a = -l;
  a.diagonal().setZero();
  a = a.cwiseMax(0.0);
  if (!is_strongly_connected(DirectedWeightedGraph(a))) {
    throw std::invalid_argument("compute_h_weights: graph is not strongly connected");
  }
  const Matrix kernel = linalg::null_space(l.transpose());
  if (kernel.cols() != 1) {
    throw NumericalError("compute_h_weights: left null space is not one-dimensional");
  }
  Vector h = kernel.col(0);
  if (h.sum() < 0.0) h = -h;
  if (h.minCoeff() <= 1e-12 * h.cwiseAbs().maxCoeff()) {
    throw NumericalError("compute_h_weights: left eigenvector has a non-positive entry");
  }
  h /= h.minCoeff();

  const Matrix hm = h.asDiagonal();
  const Matrix sym = hm * l + l.transpose() * hm;
  const Matrix gram = l.transpose() * l;
  const Matrix basis = linalg::ones_complement_basis(n);
  const Matrix m1 = linalg::symmetrize(basis.transpose() * sym * basis);
  const Matrix m2 = linalg::symmetrize(basis.transpose() * gram * basis);
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> solver(m1, m2, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("compute_h_weights: generalized eigenproblem failed");
  }
  const double lambda = solver.eigenvalues()(0);
  if (!(lambda > 0.0)) {
    throw NumericalError("compute_h_weights: gamma is not positive");
  }
  return {h, 0.5 * lambda};
}

double h_weights_margin(const Matrix& l, const HWeights& weights) {
  const Matrix hm = weights.h.asDiagonal();
  const Matrix form = hm * l + l.transpose() * hm - 2.0 * weights.gamma * l.transpose() * l;
  return linalg::min_eigenvalue_sym(linalg::symmetrize(form));
}

void write_edge_list(std::ostream& out, const DirectedWeightedGraph& g) {
  std::ostringstream buf;
  buf.precision(17);
  buf << "# a_ij = weight: agent i observes agent j (1-based)\n";
  buf << "nodes " << g.node_count() << '\n';
  for (const Edge& e : g.edges()) {
    buf << (e.to + 1) << ' ' << (e.from + 1) << ' ' << e.weight << '\n';
  }
  out << buf.str();
}

DirectedWeightedGraph read_edge_list(std::istream& in) {
  std::string line;
  int n = -1;
  std::vector<Edge> edges;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    if (n < 0) {
      std::string key;
      if (!(fields >> key >> n) || key != "nodes" || n < 1) {
        throw std::invalid_argument("edge list: expected 'nodes <N>' header at line " +
                                    std::to_string(line_no));
      }
      continue;
    }
    int i = 0;
    int j = 0;
    double w = 0.0;
    if (!(fields >> i >> j >> w)) {
      throw std::invalid_argument("edge list: malformed record at line " +
                                  std::to_string(line_no));
    }
    edges.push_back({j - 1, i - 1, w});
  }
  if (n < 0) throw std::invalid_argument("edge list: missing 'nodes' header");
  return DirectedWeightedGraph::from_edges(n, edges);
}

}  // namespace cohsync::graph
