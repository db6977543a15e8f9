#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace marco {

enum class GraphKind { Sparse, CompleteMetric };

std::string to_string(GraphKind kind);
GraphKind graph_kind_from_string(const std::string& name);

struct Point {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point&) const = default;
};

struct Edge {
  int u = 0;  // u < v
  int v = 0;
  double weight = 1.0;
  bool operator==(const Edge&) const = default;
};

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Static problem input G = (V, E). Immutable after construction; edges are
/// kept sorted by (u, v) with u < v.
class GraphInstance {
 public:
  /// Unweighted simple graph (weights 1.0). Throws ValidationError on
  /// self-loops, duplicates or out-of-range endpoints.
  static GraphInstance sparse(int n, const std::vector<std::pair<int, int>>& edges);

  /// Complete graph over `coords` with Euclidean edge weights.
  static GraphInstance complete_metric(std::vector<Point> coords);

  int n() const { return n_; }
  GraphKind kind() const { return kind_; }
  const std::vector<Edge>& edges() const { return edges_; }
  std::size_t edge_count() const { return edges_.size(); }
  bool has_coords() const { return !coords_.empty(); }
  const std::vector<Point>& coords() const { return coords_; }

  const std::vector<int>& neighbors(int node) const { return adjacency_[static_cast<std::size_t>(node)]; }
  int degree(int node) const { return static_cast<int>(neighbors(node).size()); }
  bool adjacent(int a, int b) const;

  /// Dense 0/1 adjacency (n x n, zero diagonal).
  Eigen::MatrixXd adjacency_matrix() const;

  /// Euclidean distance matrix; only valid for complete-metric instances.
  const Eigen::MatrixXd& distances() const;
  double distance(int a, int b) const { return distances()(a, b); }

  bool operator==(const GraphInstance& other) const;

 private:
  GraphInstance() = default;
  void build_adjacency();

  int n_ = 0;
  GraphKind kind_ = GraphKind::Sparse;
  std::vector<Edge> edges_;
  std::vector<Point> coords_;
  std::vector<std::vector<int>> adjacency_;
  Eigen::MatrixXd distances_;
};

/// G(n, p): every unordered pair included independently with probability p.
GraphInstance gen_erdos_renyi(int n, double p, std::uint64_t seed);

/// n cities i.i.d. uniform in the unit square.
GraphInstance gen_tsp_uniform(int n, std::uint64_t seed);

/// Text format:
///   n m kind            (kind: sparse | complete-metric)
///   i j w               (m lines, i < j, 0-based)
///   c x y               (optional, n lines, in node order)
/// Lines starting with '#' are comments.
void write_instance(std::ostream& out, const GraphInstance& graph);
GraphInstance read_instance(std::istream& in);

void save_instance(const GraphInstance& graph, const std::filesystem::path& path);

/// Loads the native format or a DIMACS edge file ("p edge n m" / "e u v",
/// 1-based), the layout used by published RB benchmark graphs.
GraphInstance load_instance(const std::filesystem::path& path);

GraphInstance read_dimacs(std::istream& in);

}  // namespace marco
