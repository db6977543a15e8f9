#pragma once

// Reference implementations used as test oracles. They are written
// independently of the library code paths they check: plain loops, full
// sorts and exhaustive enumeration.

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "marco/autodiff.hpp"
#include "marco/instances.hpp"
#include "marco/policy.hpp"
#include "marco/problems.hpp"

namespace oracle {

struct KnnEntry {
  std::vector<std::uint8_t> bits;
  int action = -1;  // -1: no action recorded
};

struct KnnResult {
  std::vector<double> values;
  int matched = 0;
};

// Sorts every entry by (similarity desc, insertion order desc) and averages
// the one-hot actions of the first k with weight sim / popcount(query).
KnnResult knn_node(const std::vector<KnnEntry>& entries, const std::vector<std::uint8_t>& query, int k);

// Dense n x n 0/1 incidence of a closed tour.
Eigen::MatrixXi tour_incidence(const std::vector<int>& perm, int n);
// Incidence dot product over the upper triangle.
int incidence_dot(const Eigen::MatrixXi& a, const Eigen::MatrixXi& b);

// Mean of the top-k normalized similarities (|a ∩ b| / n) by full sort.
double avg_sim_topk(const std::vector<std::vector<int>>& stored, const std::vector<int>& tour, int k);

// Weighted mean edge incidence of the top-k stored tours for a partial path.
Eigen::MatrixXd knn_edges(const std::vector<std::vector<int>>& stored, const std::vector<int>& partial_seq, int k, int n);

// G_t = Σ_{s >= t} γ^{s-t} r_s with a double loop.
std::vector<double> naive_returns(const std::vector<double>& rewards, double gamma);

// Enumerate every 0/1 vector.
int exhaustive_mc(const marco::GraphInstance& g);
int exhaustive_mis(const marco::GraphInstance& g);
// Enumerate every permutation.
double exhaustive_tsp(const marco::GraphInstance& g);

// Revisits counted per thread from the sequence of visited states.
std::int64_t count_revisits(const std::vector<std::vector<std::vector<std::uint8_t>>>& visits);

// Central finite differences of `loss` w.r.t. every trainable entry of
// `params`, compared to the accumulated Parameter::grad. Returns the largest
// per-tensor relative error ||g - fd|| / max(||g||, ||fd||, floor).
struct GradCheck {
  double max_rel_error = 0.0;
  std::string worst;
};
GradCheck check_gradients(marco::ParameterSet& params, const std::function<double()>& loss,
                          const std::function<void()>& backward, double h = 1e-6);

}  // namespace oracle
