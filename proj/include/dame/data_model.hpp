#ifndef DAME_DATA_MODEL_HPP
#define DAME_DATA_MODEL_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "dame/common.hpp"

namespace dame {

// One social post. Timestamps are OLE days (fractional days since
// 1899-12-30T00:00 UTC).
struct Message {
    std::string id;
    Eigen::VectorXd text_embedding;
    double timestamp = 0.0;
    std::string user;
    std::set<std::string> hashtags;
    std::set<std::string> entities;
    int event_id = 0;
};

struct Splits {
    std::vector<int> train;
    std::vector<int> test;
    std::vector<int> val;
};

// A client's private collection, with a deterministic 70/20/10 split.
struct Dataset {
    std::vector<Message> messages;
    Splits splits;
    int num_events = 0;
    int d_t = 0;

    int size() const { return static_cast<int>(messages.size()); }
};

// Homogeneous message graph: nodes are messages, an edge joins two messages
// that share a user, hashtag, or entity. Features are text embedding rows
// concatenated with the min-max normalized (day, fraction) pair.
struct MessageGraph {
    int n = 0;
    std::vector<std::pair<int, int>> edges; // i < j, deduplicated, no self-loops
    Eigen::MatrixXd features;               // n x (d_t + 2)
    std::vector<int> labels;

    std::vector<std::vector<int>> adjacency() const;
};

// Two-layer sampled computation graph for the encoder. `nodes` holds original
// node ids with the batch first; nbrs lists hold local indices. Self-loops
// are implicit (every node attends to itself).
struct Subgraph {
    std::vector<int> nodes;
    int n_batch = 0;
    int n_inner = 0;                        // batch + direct samples
    std::vector<std::vector<int>> nbrs_l1;  // size n_inner
    std::vector<std::vector<int>> nbrs_l2;  // size n_batch

    // Whole-graph computation: every node is a batch node, both layers see
    // the full neighbor lists.
    static Subgraph full(int n, const std::vector<std::pair<int, int>>& edges);
};

// (floor(t), t - floor(t)); normalization over the dataset happens at feature
// assembly time.
std::pair<double, double> temporal_embedding(double timestamp);

// Deterministic split assignment: shuffle under `seed`, then take
// floor(0.7n) train, floor(0.2n) test, remainder val.
Splits make_splits(int n, std::uint64_t seed);

// Line-delimited JSON records; errors carry the offending line number.
Dataset load_dataset(const std::string& path, int expected_d_t, std::uint64_t split_seed);
void save_dataset(const Dataset& ds, const std::string& path);

// Edge (i,j) iff messages i and j share an attribute value (case-folded)
// among user/hashtags/entities.
MessageGraph project_homogeneous(const std::vector<Message>& messages);

// Builds the message graph restricted to one split's messages.
MessageGraph split_graph(const Dataset& ds, const std::vector<int>& split);

Subgraph sample_neighborhood(const MessageGraph& graph, const std::vector<int>& batch,
                             int fanout1, int fanout2, Rng& rng);

// Synthetic non-IID generator: every event is an isotropic Gaussian in
// embedding space, clients sharing an event share its mean plus a
// client-specific shift, and attributes are seeded so that intra-event pairs
// share attributes more often than inter-event pairs.
struct SynthSpec {
    int clients = 6;
    int events_per_client = 20;
    int messages_per_event = 50;
    int d_t = 32;
    double overlap = 0.5;     // fraction of each client's events from the shared pool
    double shift = 0.5;       // magnitude of the per-client mean shift
    double cluster_std = 1.0; // within-event embedding noise
    double p_in = 0.4;        // intra-event attribute-sharing probability
    double p_out = 0.02;      // inter-event attribute-sharing probability
    std::uint64_t seed = 1;

    void validate() const;
};

std::vector<Dataset> synthesize_clients(const SynthSpec& spec);

} // namespace dame

#endif
