#include "marco/instances.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "marco/rng.hpp"

namespace marco {

std::string to_string(GraphKind kind) {
  return kind == GraphKind::Sparse ? "sparse" : "complete-metric";
}

GraphKind graph_kind_from_string(const std::string& name) {
  if (name == "sparse") return GraphKind::Sparse;
  if (name == "complete-metric") return GraphKind::CompleteMetric;
  throw std::invalid_argument("unknown graph kind '" + name + "'");
}

ParseError::ParseError(std::size_t line, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

GraphInstance GraphInstance::sparse(int n, const std::vector<std::pair<int, int>>& edges) {
  if (n < 1) throw ValidationError("graph needs at least one node");
  GraphInstance g;
  g.n_ = n;
  g.kind_ = GraphKind::Sparse;
  g.edges_.reserve(edges.size());
  for (auto [a, b] : edges) {
    if (a < 0 || b < 0 || a >= n || b >= n) {
      throw ValidationError("edge (" + std::to_string(a) + ", " + std::to_string(b) + ") out of range");
    }
    if (a == b) throw ValidationError("self-loop on node " + std::to_string(a));
    g.edges_.push_back({std::min(a, b), std::max(a, b), 1.0});
  }
  std::sort(g.edges_.begin(), g.edges_.end(),
            [](const Edge& x, const Edge& y) { return std::tie(x.u, x.v) < std::tie(y.u, y.v); });
  for (std::size_t i = 1; i < g.edges_.size(); ++i) {
    if (g.edges_[i].u == g.edges_[i - 1].u && g.edges_[i].v == g.edges_[i - 1].v) {
      throw ValidationError("duplicate edge (" + std::to_string(g.edges_[i].u) + ", " +
                            std::to_string(g.edges_[i].v) + ")");
    }
  }
  g.build_adjacency();
  return g;
}

GraphInstance GraphInstance::complete_metric(std::vector<Point> coords) {
  if (coords.empty()) throw ValidationError("graph needs at least one node");
  GraphInstance g;
  g.n_ = static_cast<int>(coords.size());
  g.kind_ = GraphKind::CompleteMetric;
  g.coords_ = std::move(coords);
  const int n = g.n_;
  g.distances_ = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double d = std::hypot(g.coords_[i].x - g.coords_[j].x, g.coords_[i].y - g.coords_[j].y);
      g.distances_(i, j) = d;
      g.distances_(j, i) = d;
      g.edges_.push_back({i, j, d});
    }
  }
  g.build_adjacency();
  return g;
}

void GraphInstance::build_adjacency() {
  adjacency_.assign(static_cast<std::size_t>(n_), {});
  for (const Edge& e : edges_) {
    adjacency_[e.u].push_back(e.v);
    adjacency_[e.v].push_back(e.u);
  }
  for (auto& list : adjacency_) std::sort(list.begin(), list.end());
}

bool GraphInstance::adjacent(int a, int b) const {
  const auto& list = neighbors(a);
  return std::binary_search(list.begin(), list.end(), b);
}

Eigen::MatrixXd GraphInstance::adjacency_matrix() const {
  Eigen::MatrixXd adj = Eigen::MatrixXd::Zero(n_, n_);
  for (const Edge& e : edges_) {
    adj(e.u, e.v) = 1.0;
    adj(e.v, e.u) = 1.0;
  }
  return adj;
}

const Eigen::MatrixXd& GraphInstance::distances() const {
  if (kind_ != GraphKind::CompleteMetric) {
    throw std::logic_error("distance matrix requested for a non-metric instance");
  }
  return distances_;
}

bool GraphInstance::operator==(const GraphInstance& other) const {
  return n_ == other.n_ && kind_ == other.kind_ && edges_ == other.edges_ && coords_ == other.coords_;
}

GraphInstance gen_erdos_renyi(int n, double p, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("gen_erdos_renyi: n must be >= 1");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("gen_erdos_renyi: p must be in [0, 1]");
  Rng rng(seed);
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (rng.uniform() < p) edges.emplace_back(i, j);
    }
  }
  return GraphInstance::sparse(n, edges);
}

GraphInstance gen_tsp_uniform(int n, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("gen_tsp_uniform: n must be >= 2");
  Rng rng(seed);
  std::vector<Point> coords(static_cast<std::size_t>(n));
  for (auto& c : coords) {
    c.x = rng.uniform();
    c.y = rng.uniform();
  }
  return GraphInstance::complete_metric(std::move(coords));
}

void write_instance(std::ostream& out, const GraphInstance& graph) {
  out << graph.n() << ' ' << graph.edge_count() << ' ' << to_string(graph.kind()) << '\n';
  out << std::setprecision(17);
  for (const Edge& e : graph.edges()) out << e.u << ' ' << e.v << ' ' << e.weight << '\n';
  for (const Point& c : graph.coords()) out << "c " << c.x << ' ' << c.y << '\n';
}

namespace {

bool next_content_line(std::istream& in, std::string& line, std::size_t& line_no) {
  while (std::getline(in, line)) {
    ++line_no;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    return true;
  }
  return false;
}

}  // namespace

GraphInstance read_instance(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!next_content_line(in, line, line_no)) throw ParseError(line_no, "missing header");

  std::istringstream header(line);
  long long n = 0;
  long long m = 0;
  std::string kind_name;
  if (!(header >> n >> m >> kind_name)) throw ParseError(line_no, "expected header 'n m kind'");
  if (n < 1 || m < 0) throw ParseError(line_no, "invalid node or edge count");
  GraphKind kind;
  try {
    kind = graph_kind_from_string(kind_name);
  } catch (const std::invalid_argument& e) {
    throw ParseError(line_no, e.what());
  }

  std::vector<std::pair<int, int>> pairs;
  std::vector<double> weights;
  pairs.reserve(static_cast<std::size_t>(m));
  for (long long k = 0; k < m; ++k) {
    if (!next_content_line(in, line, line_no)) throw ParseError(line_no, "unexpected end of file in edge list");
    std::istringstream row(line);
    long long a = 0;
    long long b = 0;
    double w = 1.0;
    if (!(row >> a >> b >> w)) throw ParseError(line_no, "expected edge line 'i j w'");
    if (a < 0 || b < 0 || a >= n || b >= n) throw ParseError(line_no, "edge endpoint out of range");
    pairs.emplace_back(static_cast<int>(a), static_cast<int>(b));
    weights.push_back(w);
  }

  std::vector<Point> coords;
  while (next_content_line(in, line, line_no)) {
    std::istringstream row(line);
    std::string tag;
    Point p;
    if (!(row >> tag >> p.x >> p.y) || tag != "c") throw ParseError(line_no, "expected coordinate line 'c x y'");
    coords.push_back(p);
  }

  if (kind == GraphKind::Sparse) {
    auto g = GraphInstance::sparse(static_cast<int>(n), pairs);
    for (double w : weights) {
      if (w != 1.0) throw ValidationError("sparse instances must have unit edge weights");
    }
    if (!coords.empty()) throw ValidationError("sparse instances carry no coordinates");
    return g;
  }

  if (static_cast<long long>(coords.size()) != n) {
    throw ValidationError("complete-metric instance needs exactly n coordinate lines");
  }
  auto g = GraphInstance::complete_metric(std::move(coords));
  if (static_cast<long long>(g.edge_count()) != m) {
    throw ValidationError("complete-metric instance must list all n(n-1)/2 edges");
  }
  // Listed edges must be a simple graph and agree with the coordinates.
  static_cast<void>(GraphInstance::sparse(static_cast<int>(n), pairs));
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const double d = g.distance(pairs[k].first, pairs[k].second);
    if (std::abs(d - weights[k]) > 1e-12) {
      throw ValidationError("edge weight disagrees with coordinate distance");
    }
  }
  return g;
}

GraphInstance read_dimacs(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  long long n = -1;
  std::vector<std::pair<int, int>> pairs;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream row(line);
    std::string tag;
    if (!(row >> tag) || tag == "c") continue;
    if (tag == "p") {
      std::string format;
      long long m = 0;
      if (!(row >> format >> n >> m) || n < 1) throw ParseError(line_no, "expected 'p edge n m'");
    } else if (tag == "e") {
      if (n < 0) throw ParseError(line_no, "edge before problem line");
      long long a = 0;
      long long b = 0;
      if (!(row >> a >> b)) throw ParseError(line_no, "expected 'e u v'");
      if (a < 1 || b < 1 || a > n || b > n) throw ParseError(line_no, "edge endpoint out of range");
      pairs.emplace_back(static_cast<int>(a - 1), static_cast<int>(b - 1));
    } else {
      throw ParseError(line_no, "unknown line tag '" + tag + "'");
    }
  }
  if (n < 0) throw ParseError(line_no, "missing problem line");
  return GraphInstance::sparse(static_cast<int>(n), pairs);
}

void save_instance(const GraphInstance& graph, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  write_instance(out, graph);
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

GraphInstance load_instance(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::string line;
  std::streampos start = in.tellg();
  bool dimacs = false;
  while (std::getline(in, line)) {
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    dimacs = line[first] == 'p' || line[first] == 'c' || line[first] == 'e';
    break;
  }
  in.clear();
  in.seekg(start);
  return dimacs ? read_dimacs(in) : read_instance(in);
}

}  // namespace marco
