#ifndef DAME_EVAL_METRICS_HPP
#define DAME_EVAL_METRICS_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace dame {

// Lloyd's algorithm with k-means++ seeding, 10 restarts, at most 100
// iterations each; the restart with the lowest inertia wins.
std::vector<int> kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed);

// MI / sqrt(H(U) * H(V)) with natural-log entropies. Both partitions trivial
// (single cluster each) scores 1.0; exactly one trivial scores 0.0.
double nmi(const std::vector<int>& pred, const std::vector<int>& truth);

// (MI - E[MI]) / (mean(H(U), H(V)) - E[MI]); E[MI] is the exact expectation
// under the hypergeometric permutation model.
double ami(const std::vector<int>& pred, const std::vector<int>& truth);

// Pair-counting adjusted Rand index.
double ari(const std::vector<int>& pred, const std::vector<int>& truth);

struct ClusterScores {
    double nmi = 0.0;
    double ami = 0.0;
    double ari = 0.0;
};

ClusterScores score_clustering(const std::vector<int>& pred,
                               const std::vector<int>& truth);

} // namespace dame

#endif
