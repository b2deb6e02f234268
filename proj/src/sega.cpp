#include "dame/sega.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace dame {

double ClientGraph::degree(int i) const {
    double d = 0.0;
    for (int j = 0; j < K; ++j) {
        if (j != i) d += W_pos(i, j);
    }
    return d;
}

namespace {

constexpr int kProbeBlocks = 2;
constexpr int kProbeBlockSize = 16;
constexpr double kProbeIntraP = 0.5;
constexpr double kProbeInterP = 0.05;

// Union-find for the per-block connectivity repair.
struct Dsu {
    std::vector<int> parent;
    explicit Dsu(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); }
    void unite(int a, int b) { parent[find(a)] = find(b); }
};

} // namespace

ProbeGraph gen_probe(std::uint64_t seed, int d_in) {
    ProbeGraph g;
    g.n = kProbeBlocks * kProbeBlockSize;
    Rng rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    auto block_of = [](int v) { return v / kProbeBlockSize; };
    for (int i = 0; i < g.n; ++i) {
        for (int j = i + 1; j < g.n; ++j) {
            double p = block_of(i) == block_of(j) ? kProbeIntraP : kProbeInterP;
            if (unif(rng) < p) g.edges.emplace_back(i, j);
        }
    }
    // Keep each block connected: stitch its components along a chain.
    for (int b = 0; b < kProbeBlocks; ++b) {
        const int lo = b * kProbeBlockSize;
        Dsu dsu(kProbeBlockSize);
        for (auto [i, j] : g.edges) {
            if (block_of(i) == b && block_of(j) == b) dsu.unite(i - lo, j - lo);
        }
        for (int v = 1; v < kProbeBlockSize; ++v) {
            if (dsu.find(v) != dsu.find(0)) {
                g.edges.emplace_back(lo, lo + v);
                dsu.unite(v, 0);
            }
        }
    }
    std::sort(g.edges.begin(), g.edges.end());
    std::normal_distribution<double> gauss(0.0, 1.0);
    g.features.resize(g.n, d_in);
    for (int i = 0; i < g.n; ++i) {
        for (int d = 0; d < d_in; ++d) g.features(i, d) = gauss(rng);
    }
    g.subgraph = Subgraph::full(g.n, g.edges);
    return g;
}

Eigen::VectorXd client_representation(const Encoder& encoder, const ParamVector& params,
                                      const ProbeGraph& probe) {
    EmbeddingBatch emb = encoder.forward(params, probe.subgraph, probe.features);
    return emb.H.colwise().mean();
}

ClientGraph similarity_matrix(const std::vector<Eigen::VectorXd>& reps) {
    const int K = static_cast<int>(reps.size());
    if (K < 1) throw std::invalid_argument("similarity_matrix: no representations");
    ClientGraph g;
    g.K = K;
    g.W.resize(K, K);
    std::vector<double> norms(static_cast<std::size_t>(K));
    for (int i = 0; i < K; ++i) {
        norms[static_cast<std::size_t>(i)] = reps[static_cast<std::size_t>(i)].norm();
        if (norms[static_cast<std::size_t>(i)] <= 0.0) {
            throw std::runtime_error("similarity_matrix: zero-norm representation for client " +
                                     std::to_string(i));
        }
    }
    for (int i = 0; i < K; ++i) {
        g.W(i, i) = 1.0;
        for (int j = i + 1; j < K; ++j) {
            double c = reps[static_cast<std::size_t>(i)].dot(reps[static_cast<std::size_t>(j)]) /
                       (norms[static_cast<std::size_t>(i)] * norms[static_cast<std::size_t>(j)]);
            c = std::clamp(c, -1.0, 1.0);
            g.W(i, j) = c;
            g.W(j, i) = c;
        }
    }
    g.W_pos = g.W;
    for (int i = 0; i < K; ++i) {
        for (int j = 0; j < K; ++j) {
            if (i != j) g.W_pos(i, j) = std::max(g.W(i, j), ClientGraph::kEps);
        }
    }
    return g;
}

namespace {

void check_partition(const ClientGraph& graph, const PartitionSet& parts) {
    std::vector<int> seen(static_cast<std::size_t>(graph.K), 0);
    for (const auto& part : parts) {
        if (part.empty()) throw std::invalid_argument("partition: empty block");
        for (int v : part) {
            if (v < 0 || v >= graph.K || seen[static_cast<std::size_t>(v)]++) {
                throw std::invalid_argument("partition: not a disjoint cover");
            }
        }
    }
    for (int s : seen) {
        if (!s) throw std::invalid_argument("partition: does not cover all clients");
    }
}

// Entropy contribution of one block: node term plus boundary term.
double block_entropy(const ClientGraph& g, const std::vector<int>& block,
                     const std::vector<double>& deg, double vol_g) {
    double vol = 0.0;
    for (int v : block) vol += deg[static_cast<std::size_t>(v)];
    std::vector<char> inside(static_cast<std::size_t>(g.K), 0);
    for (int v : block) inside[static_cast<std::size_t>(v)] = 1;
    double cut = 0.0;
    for (int v : block) {
        for (int u = 0; u < g.K; ++u) {
            if (u != v && !inside[static_cast<std::size_t>(u)]) cut += g.W_pos(v, u);
        }
    }
    double h = 0.0;
    for (int v : block) {
        double d = deg[static_cast<std::size_t>(v)];
        h -= (d / vol_g) * std::log2(d / vol);
    }
    h -= (cut / vol_g) * std::log2(vol / vol_g);
    return h;
}

std::vector<double> degrees(const ClientGraph& g) {
    std::vector<double> deg(static_cast<std::size_t>(g.K));
    for (int i = 0; i < g.K; ++i) {
        deg[static_cast<std::size_t>(i)] = g.degree(i);
        if (deg[static_cast<std::size_t>(i)] <= 0.0) {
            throw std::runtime_error("structural entropy: zero-degree client " +
                                     std::to_string(i));
        }
    }
    return deg;
}

} // namespace

double structural_entropy_2d(const ClientGraph& graph, const PartitionSet& parts) {
    check_partition(graph, parts);
    auto deg = degrees(graph);
    double vol_g = std::accumulate(deg.begin(), deg.end(), 0.0);
    double h = 0.0;
    for (const auto& block : parts) h += block_entropy(graph, block, deg, vol_g);
    return h;
}

double delta_se(const ClientGraph& graph, const PartitionSet& parts, int i, int j) {
    if (i == j || i < 0 || j < 0 || i >= static_cast<int>(parts.size()) ||
        j >= static_cast<int>(parts.size())) {
        throw std::invalid_argument("delta_se: bad partition indices");
    }
    auto deg = degrees(graph);
    double vol_g = std::accumulate(deg.begin(), deg.end(), 0.0);
    std::vector<int> merged = parts[static_cast<std::size_t>(i)];
    merged.insert(merged.end(), parts[static_cast<std::size_t>(j)].begin(),
                  parts[static_cast<std::size_t>(j)].end());
    return block_entropy(graph, merged, deg, vol_g) -
           block_entropy(graph, parts[static_cast<std::size_t>(i)], deg, vol_g) -
           block_entropy(graph, parts[static_cast<std::size_t>(j)], deg, vol_g);
}

PartitionSet greedy_minimize(const ClientGraph& graph) {
    PartitionSet parts;
    for (int i = 0; i < graph.K; ++i) parts.push_back({i});
    if (graph.K < 2) return parts;

    while (parts.size() > 1) {
        double best = 0.0;
        int best_i = -1, best_j = -1;
        for (int i = 0; i < static_cast<int>(parts.size()); ++i) {
            for (int j = i + 1; j < static_cast<int>(parts.size()); ++j) {
                double d = delta_se(graph, parts, i, j);
                if (d < best) {
                    best = d;
                    best_i = i;
                    best_j = j;
                }
            }
        }
        if (best_i < 0) break; // all merges are non-improving
        auto& keep = parts[static_cast<std::size_t>(best_i)];
        auto& drop = parts[static_cast<std::size_t>(best_j)];
        keep.insert(keep.end(), drop.begin(), drop.end());
        std::sort(keep.begin(), keep.end());
        parts.erase(parts.begin() + best_j);
    }
    return parts;
}

std::vector<std::vector<std::pair<int, double>>> aggregation_weights(
    const PartitionSet& parts, const ClientGraph& sims) {
    check_partition(sims, parts);
    std::vector<std::vector<std::pair<int, double>>> weights(
        static_cast<std::size_t>(sims.K));
    for (const auto& block : parts) {
        for (int u : block) {
            double denom = 0.0;
            for (int v : block) denom += std::exp(sims.W(u, v));
            auto& row = weights[static_cast<std::size_t>(u)];
            for (int v : block) row.emplace_back(v, std::exp(sims.W(u, v)) / denom);
        }
    }
    return weights;
}

std::vector<ParamVector> aggregate_global(const PartitionSet& parts, const ClientGraph& sims,
                                          const std::vector<ParamVector>& locals) {
    if (static_cast<int>(locals.size()) != sims.K) {
        throw std::invalid_argument("aggregate_global: model count != K");
    }
    for (const auto& pv : locals) locals[0].require_same_layout(pv, "aggregate_global");
    auto weights = aggregation_weights(parts, sims);
    std::vector<ParamVector> out;
    out.reserve(locals.size());
    for (int u = 0; u < sims.K; ++u) {
        ParamVector acc(locals[0].layout());
        for (auto [v, w] : weights[static_cast<std::size_t>(u)]) {
            ParamVector term = locals[static_cast<std::size_t>(v)];
            term *= w;
            acc += term;
        }
        out.push_back(std::move(acc));
    }
    return out;
}

} // namespace dame
