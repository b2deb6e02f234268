#include "dame/eval_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "dame/common.hpp"

namespace dame {

namespace {

// Contingency table between two labelings, with marginals.
struct Contingency {
    std::vector<std::vector<long long>> n; // rows: pred classes, cols: true classes
    std::vector<long long> a;              // row sums
    std::vector<long long> b;              // col sums
    long long total = 0;
};

Contingency contingency(const std::vector<int>& pred, const std::vector<int>& truth) {
    if (pred.size() != truth.size()) {
        throw std::invalid_argument("clustering metrics: label vectors differ in length");
    }
    if (pred.empty()) {
        throw std::invalid_argument("clustering metrics: empty label vectors");
    }
    std::map<int, int> pid, tid;
    for (int v : pred) pid.emplace(v, static_cast<int>(pid.size()));
    for (int v : truth) tid.emplace(v, static_cast<int>(tid.size()));
    Contingency c;
    c.n.assign(pid.size(), std::vector<long long>(tid.size(), 0));
    c.a.assign(pid.size(), 0);
    c.b.assign(tid.size(), 0);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        int r = pid[pred[i]];
        int s = tid[truth[i]];
        c.n[r][s]++;
        c.a[r]++;
        c.b[s]++;
    }
    c.total = static_cast<long long>(pred.size());
    return c;
}

double entropy(const std::vector<long long>& counts, long long total) {
    double h = 0.0;
    for (long long c : counts) {
        if (c > 0) {
            double p = static_cast<double>(c) / static_cast<double>(total);
            h -= p * std::log(p);
        }
    }
    return h;
}

double mutual_information(const Contingency& c) {
    double mi = 0.0;
    const double n = static_cast<double>(c.total);
    for (std::size_t i = 0; i < c.n.size(); ++i) {
        for (std::size_t j = 0; j < c.n[i].size(); ++j) {
            long long nij = c.n[i][j];
            if (nij > 0) {
                mi += (nij / n) * std::log((n * nij) / (static_cast<double>(c.a[i]) * c.b[j]));
            }
        }
    }
    return std::max(mi, 0.0);
}

// Exact E[MI] under the permutation model (Vinh et al.). Cells are summed
// over the full hypergeometric support of each (a_i, b_j) marginal pair.
double expected_mutual_information(const Contingency& c) {
    const long long n = c.total;
    std::vector<double> lg(static_cast<std::size_t>(n) + 2, 0.0);
    for (long long i = 1; i <= n + 1; ++i) {
        lg[static_cast<std::size_t>(i)] = std::lgamma(static_cast<double>(i) + 1.0) -
                                          std::lgamma(static_cast<double>(i));
    }
    auto lfact = [](long long k) { return std::lgamma(static_cast<double>(k) + 1.0); };
    double emi = 0.0;
    for (long long ai : c.a) {
        for (long long bj : c.b) {
            long long lo = std::max<long long>(1, ai + bj - n);
            long long hi = std::min(ai, bj);
            for (long long nij = lo; nij <= hi; ++nij) {
                double term1 = (static_cast<double>(nij) / n) *
                               std::log((static_cast<double>(n) * nij) /
                                        (static_cast<double>(ai) * bj));
                double logp = lfact(ai) + lfact(bj) + lfact(n - ai) + lfact(n - bj) -
                              lfact(n) - lfact(nij) - lfact(ai - nij) - lfact(bj - nij) -
                              lfact(n - ai - bj + nij);
                emi += term1 * std::exp(logp);
            }
        }
    }
    return emi;
}

} // namespace

double nmi(const std::vector<int>& pred, const std::vector<int>& truth) {
    Contingency c = contingency(pred, truth);
    double hu = entropy(c.a, c.total);
    double hv = entropy(c.b, c.total);
    if (hu == 0.0 && hv == 0.0) return 1.0; // both single-cluster
    if (hu == 0.0 || hv == 0.0) return 0.0; // exactly one single-cluster
    double mi = mutual_information(c);
    return std::clamp(mi / std::sqrt(hu * hv), 0.0, 1.0);
}

double ami(const std::vector<int>& pred, const std::vector<int>& truth) {
    Contingency c = contingency(pred, truth);
    double hu = entropy(c.a, c.total);
    double hv = entropy(c.b, c.total);
    if (hu == 0.0 && hv == 0.0) return 1.0;
    double mi = mutual_information(c);
    double emi = expected_mutual_information(c);
    double denom = 0.5 * (hu + hv) - emi;
    if (std::fabs(denom) < 1e-15) {
        return (std::fabs(mi - emi) < 1e-15) ? 1.0 : 0.0;
    }
    return (mi - emi) / denom;
}

double ari(const std::vector<int>& pred, const std::vector<int>& truth) {
    Contingency c = contingency(pred, truth);
    auto comb2 = [](long long x) { return 0.5 * static_cast<double>(x) * (x - 1); };
    double sum_ij = 0.0;
    for (const auto& row : c.n) {
        for (long long nij : row) sum_ij += comb2(nij);
    }
    double sum_a = 0.0, sum_b = 0.0;
    for (long long ai : c.a) sum_a += comb2(ai);
    for (long long bj : c.b) sum_b += comb2(bj);
    double total_pairs = comb2(c.total);
    if (total_pairs == 0.0) return 1.0; // single element
    double expected = sum_a * sum_b / total_pairs;
    double max_index = 0.5 * (sum_a + sum_b);
    double denom = max_index - expected;
    if (std::fabs(denom) < 1e-15) {
        return (std::fabs(sum_ij - expected) < 1e-15) ? 1.0 : 0.0;
    }
    return (sum_ij - expected) / denom;
}

ClusterScores score_clustering(const std::vector<int>& pred,
                               const std::vector<int>& truth) {
    return ClusterScores{nmi(pred, truth), ami(pred, truth), ari(pred, truth)};
}

namespace {

double point_dist2(const Eigen::MatrixXd& pts, int i, const Eigen::RowVectorXd& c) {
    return (pts.row(i) - c).squaredNorm();
}

// One Lloyd run from a k-means++ seeding. Returns (labels, inertia).
std::pair<std::vector<int>, double> kmeans_once(const Eigen::MatrixXd& pts, int k,
                                                Rng& rng) {
    const int n = static_cast<int>(pts.rows());
    Eigen::MatrixXd centers(k, pts.cols());

    // k-means++ seeding
    std::uniform_int_distribution<int> first(0, n - 1);
    centers.row(0) = pts.row(first(rng));
    std::vector<double> d2(n);
    for (int c = 1; c < k; ++c) {
        double sum = 0.0;
        for (int i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::max();
            for (int j = 0; j < c; ++j) {
                best = std::min(best, point_dist2(pts, i, centers.row(j)));
            }
            d2[i] = best;
            sum += best;
        }
        int pick = 0;
        if (sum > 0.0) {
            std::uniform_real_distribution<double> u(0.0, sum);
            double r = u(rng);
            double acc = 0.0;
            for (int i = 0; i < n; ++i) {
                acc += d2[i];
                if (acc >= r) { pick = i; break; }
            }
        } else {
            pick = first(rng);
        }
        centers.row(c) = pts.row(pick);
    }

    std::vector<int> labels(n, 0);
    for (int iter = 0; iter < 100; ++iter) {
        bool changed = false;
        for (int i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::max();
            int arg = 0;
            for (int j = 0; j < k; ++j) {
                double d = point_dist2(pts, i, centers.row(j));
                if (d < best) { best = d; arg = j; }
            }
            if (labels[i] != arg) { labels[i] = arg; changed = true; }
        }
        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, pts.cols());
        std::vector<int> counts(k, 0);
        for (int i = 0; i < n; ++i) {
            sums.row(labels[i]) += pts.row(i);
            counts[labels[i]]++;
        }
        for (int j = 0; j < k; ++j) {
            if (counts[j] > 0) {
                centers.row(j) = sums.row(j) / counts[j];
            } else {
                // empty cluster: re-seed at the point farthest from its center
                int far = 0;
                double far_d = -1.0;
                for (int i = 0; i < n; ++i) {
                    double d = point_dist2(pts, i, centers.row(labels[i]));
                    if (d > far_d) { far_d = d; far = i; }
                }
                centers.row(j) = pts.row(far);
                changed = true;
            }
        }
        if (!changed && iter > 0) break;
    }

    double inertia = 0.0;
    for (int i = 0; i < n; ++i) inertia += point_dist2(pts, i, centers.row(labels[i]));
    return {std::move(labels), inertia};
}

} // namespace

std::vector<int> kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed) {
    const int n = static_cast<int>(points.rows());
    if (k < 2) throw std::invalid_argument("kmeans: k must be >= 2");
    if (n < k) throw std::invalid_argument("kmeans: fewer points than clusters");
    Rng rng(seed);
    std::vector<int> best_labels;
    double best_inertia = std::numeric_limits<double>::max();
    for (int restart = 0; restart < 10; ++restart) {
        auto [labels, inertia] = kmeans_once(points, k, rng);
        if (inertia < best_inertia) {
            best_inertia = inertia;
            best_labels = std::move(labels);
        }
    }
    return best_labels;
}

} // namespace dame
