#ifndef DAME_SEGA_HPP
#define DAME_SEGA_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "dame/common.hpp"
#include "dame/data_model.hpp"
#include "dame/encoder.hpp"
#include "dame/param_vector.hpp"

namespace dame {

// Fully connected weighted client graph. W holds raw cosine similarities
// (diagonal 1); W_pos clamps off-diagonal entries to at least kEps so the
// entropy arithmetic always sees positive weights.
struct ClientGraph {
    static constexpr double kEps = 1e-6;

    int K = 0;
    Eigen::MatrixXd W;
    Eigen::MatrixXd W_pos;

    // Weighted degree from W_pos, diagonal excluded.
    double degree(int i) const;
};

// Disjoint nonempty client-index sets covering all K clients.
using PartitionSet = std::vector<std::vector<int>>;

// Shared random probe fed to every uploaded client model so their pooled
// outputs are comparable. Two stochastic blocks of 16 nodes, intra 0.5 /
// inter 0.05 edge probability, standard-normal features.
struct ProbeGraph {
    int n = 0;
    std::vector<std::pair<int, int>> edges;
    Eigen::MatrixXd features; // n x d_in
    Subgraph subgraph;        // full-graph computation view
};

ProbeGraph gen_probe(std::uint64_t seed, int d_in);

// Mean over probe nodes of the forward-pass embeddings.
Eigen::VectorXd client_representation(const Encoder& encoder, const ParamVector& params,
                                      const ProbeGraph& probe);

ClientGraph similarity_matrix(const std::vector<Eigen::VectorXd>& reps);

// Two-dimensional structural entropy (bits) of the client graph under the
// given partition. Degrees and volumes come from W_pos with the diagonal
// excluded; g_l is the total weight crossing the partition boundary.
double structural_entropy_2d(const ClientGraph& graph, const PartitionSet& parts);

// Entropy change from merging partitions i and j, computed from the affected
// partitions only; equals the full before/after difference.
double delta_se(const ClientGraph& graph, const PartitionSet& parts, int i, int j);

// Greedy 2DSE minimization from singletons: repeatedly merge the pair with
// the smallest delta while it is strictly negative. Ties break toward the
// lexicographically lowest (i, j).
PartitionSet greedy_minimize(const ClientGraph& graph);

// Per-client personalized global model: softmax over raw similarities within
// the client's partition (self included, sim(u,u) = 1).
std::vector<ParamVector> aggregate_global(const PartitionSet& parts, const ClientGraph& sims,
                                          const std::vector<ParamVector>& locals);

// Softmax weights used by aggregate_global, exposed for logging.
std::vector<std::vector<std::pair<int, double>>> aggregation_weights(
    const PartitionSet& parts, const ClientGraph& sims);

} // namespace dame

#endif
