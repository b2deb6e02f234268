#include "dame/data_model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

namespace dame {

using nlohmann::json;

std::pair<double, double> temporal_embedding(double timestamp) {
    if (!std::isfinite(timestamp)) {
        throw data_error("temporal_embedding: non-finite timestamp");
    }
    double day = std::floor(timestamp);
    return {day, timestamp - day};
}

Splits make_splits(int n, std::uint64_t seed) {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng = make_rng(seed, 0x5eedu);
    std::shuffle(idx.begin(), idx.end(), rng);
    int n_train = static_cast<int>(std::floor(0.7 * n));
    int n_test = static_cast<int>(std::floor(0.2 * n));
    Splits s;
    s.train.assign(idx.begin(), idx.begin() + n_train);
    s.test.assign(idx.begin() + n_train, idx.begin() + n_train + n_test);
    s.val.assign(idx.begin() + n_train + n_test, idx.end());
    return s;
}

namespace {

int count_events(const std::vector<Message>& messages) {
    std::unordered_set<int> ids;
    for (const auto& m : messages) ids.insert(m.event_id);
    return static_cast<int>(ids.size());
}

std::string fold_case(const std::string& s) {
    std::string out = s;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

} // namespace

Dataset load_dataset(const std::string& path, int expected_d_t, std::uint64_t split_seed) {
    std::ifstream f(path);
    if (!f) throw data_error("cannot open dataset file '" + path + "'");
    Dataset ds;
    ds.d_t = expected_d_t;
    std::string line;
    int line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception& e) {
            throw data_error(path + ":" + std::to_string(line_no) + ": invalid JSON: " + e.what());
        }
        auto fail = [&](const std::string& what) {
            throw data_error(path + ":" + std::to_string(line_no) + ": " + what);
        };
        for (const char* field : {"id", "embedding", "timestamp", "user", "hashtags",
                                  "entities", "event_id"}) {
            if (!rec.contains(field)) fail(std::string("missing field '") + field + "'");
        }
        Message m;
        try {
            m.id = rec["id"].get<std::string>();
            auto emb = rec["embedding"].get<std::vector<double>>();
            if (static_cast<int>(emb.size()) != expected_d_t) {
                fail("embedding length " + std::to_string(emb.size()) + " != declared d_t " +
                     std::to_string(expected_d_t));
            }
            m.text_embedding = Eigen::Map<Eigen::VectorXd>(emb.data(),
                                                           static_cast<long>(emb.size()));
            m.timestamp = rec["timestamp"].get<double>();
            if (!std::isfinite(m.timestamp)) fail("non-finite timestamp");
            m.user = rec["user"].get<std::string>();
            for (const auto& h : rec["hashtags"]) m.hashtags.insert(h.get<std::string>());
            for (const auto& e : rec["entities"]) m.entities.insert(e.get<std::string>());
            m.event_id = rec["event_id"].get<int>();
            if (m.event_id < 0) fail("negative event_id");
        } catch (const json::exception& e) {
            fail(std::string("bad field type: ") + e.what());
        }
        ds.messages.push_back(std::move(m));
    }
    if (ds.messages.empty()) throw data_error(path + ": empty dataset");
    ds.splits = make_splits(ds.size(), split_seed);
    ds.num_events = count_events(ds.messages);
    return ds;
}

void save_dataset(const Dataset& ds, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw data_error("cannot open '" + path + "' for writing");
    for (const auto& m : ds.messages) {
        json rec;
        rec["id"] = m.id;
        std::vector<double> emb(m.text_embedding.data(),
                                m.text_embedding.data() + m.text_embedding.size());
        rec["embedding"] = emb;
        rec["timestamp"] = m.timestamp;
        rec["user"] = m.user;
        rec["hashtags"] = m.hashtags;
        rec["entities"] = m.entities;
        rec["event_id"] = m.event_id;
        f << rec.dump() << "\n";
    }
}

std::vector<std::vector<int>> MessageGraph::adjacency() const {
    std::vector<std::vector<int>> adj(n);
    for (auto [i, j] : edges) {
        adj[i].push_back(j);
        adj[j].push_back(i);
    }
    return adj;
}

MessageGraph project_homogeneous(const std::vector<Message>& messages) {
    if (messages.empty()) throw data_error("project_homogeneous: empty message list");
    const int n = static_cast<int>(messages.size());
    const long d_t = messages[0].text_embedding.size();
    for (const auto& m : messages) {
        if (m.text_embedding.size() != d_t) {
            throw data_error("project_homogeneous: inconsistent embedding lengths");
        }
    }

    // Attribute value -> message indices carrying it. Keys are namespaced by
    // attribute type so a user name never matches a hashtag.
    std::unordered_map<std::string, std::vector<int>> attr;
    for (int i = 0; i < n; ++i) {
        const auto& m = messages[i];
        if (!m.user.empty()) attr["u:" + fold_case(m.user)].push_back(i);
        for (const auto& h : m.hashtags) attr["h:" + fold_case(h)].push_back(i);
        for (const auto& e : m.entities) attr["e:" + fold_case(e)].push_back(i);
    }
    std::set<std::pair<int, int>> edge_set;
    for (const auto& [key, members] : attr) {
        for (std::size_t a = 0; a < members.size(); ++a) {
            for (std::size_t b = a + 1; b < members.size(); ++b) {
                int i = members[a], j = members[b];
                if (i != j) edge_set.emplace(std::min(i, j), std::max(i, j));
            }
        }
    }

    MessageGraph g;
    g.n = n;
    g.edges.assign(edge_set.begin(), edge_set.end());
    g.labels.resize(n);

    // Min-max normalize the (day, fraction) pair over this message list.
    double day_lo = 1e300, day_hi = -1e300, frac_lo = 1e300, frac_hi = -1e300;
    std::vector<std::pair<double, double>> temporal(n);
    for (int i = 0; i < n; ++i) {
        temporal[i] = temporal_embedding(messages[i].timestamp);
        day_lo = std::min(day_lo, temporal[i].first);
        day_hi = std::max(day_hi, temporal[i].first);
        frac_lo = std::min(frac_lo, temporal[i].second);
        frac_hi = std::max(frac_hi, temporal[i].second);
    }
    auto norm = [](double v, double lo, double hi) {
        return hi > lo ? (v - lo) / (hi - lo) : 0.0;
    };
    g.features.resize(n, d_t + 2);
    for (int i = 0; i < n; ++i) {
        g.features.block(i, 0, 1, d_t) = messages[i].text_embedding.transpose();
        g.features(i, d_t) = norm(temporal[i].first, day_lo, day_hi);
        g.features(i, d_t + 1) = norm(temporal[i].second, frac_lo, frac_hi);
        g.labels[i] = messages[i].event_id;
    }
    return g;
}

MessageGraph split_graph(const Dataset& ds, const std::vector<int>& split) {
    std::vector<Message> subset;
    subset.reserve(split.size());
    for (int idx : split) subset.push_back(ds.messages[idx]);
    return project_homogeneous(subset);
}

Subgraph Subgraph::full(int n, const std::vector<std::pair<int, int>>& edges) {
    Subgraph sg;
    sg.nodes.resize(n);
    std::iota(sg.nodes.begin(), sg.nodes.end(), 0);
    sg.n_batch = n;
    sg.n_inner = n;
    sg.nbrs_l1.assign(n, {});
    for (auto [i, j] : edges) {
        sg.nbrs_l1[i].push_back(j);
        sg.nbrs_l1[j].push_back(i);
    }
    sg.nbrs_l2 = sg.nbrs_l1;
    return sg;
}

namespace {

// Uniform sample of up to `fanout` entries without replacement.
std::vector<int> sample_up_to(std::vector<int> pool, int fanout, Rng& rng) {
    if (static_cast<int>(pool.size()) <= fanout) return pool;
    for (int i = 0; i < fanout; ++i) {
        std::uniform_int_distribution<int> pick(i, static_cast<int>(pool.size()) - 1);
        std::swap(pool[i], pool[pick(rng)]);
    }
    pool.resize(fanout);
    return pool;
}

} // namespace

Subgraph sample_neighborhood(const MessageGraph& graph, const std::vector<int>& batch,
                             int fanout1, int fanout2, Rng& rng) {
    if (fanout1 < 1 || fanout2 < 1) {
        throw std::invalid_argument("sample_neighborhood: fanouts must be >= 1");
    }
    auto adj = graph.adjacency();
    for (int b : batch) {
        if (b < 0 || b >= graph.n) {
            throw std::invalid_argument("sample_neighborhood: batch node out of range");
        }
    }

    Subgraph sg;
    std::unordered_map<int, int> local; // original id -> local index
    auto add_node = [&](int orig) {
        auto [it, inserted] = local.emplace(orig, static_cast<int>(sg.nodes.size()));
        if (inserted) sg.nodes.push_back(orig);
        return it->second;
    };
    for (int b : batch) add_node(b);
    sg.n_batch = static_cast<int>(sg.nodes.size());

    // Hop 1: direct samples per batch node.
    std::vector<std::vector<int>> hop1(sg.n_batch);
    for (int bi = 0; bi < sg.n_batch; ++bi) {
        hop1[bi] = sample_up_to(adj[sg.nodes[bi]], fanout1, rng);
        for (int nb : hop1[bi]) add_node(nb);
    }
    sg.n_inner = static_cast<int>(sg.nodes.size());

    sg.nbrs_l2.resize(sg.n_batch);
    for (int bi = 0; bi < sg.n_batch; ++bi) {
        for (int nb : hop1[bi]) sg.nbrs_l2[bi].push_back(local[nb]);
    }

    // Hop 2: expand each inner node, skipping nodes already in the
    // computation graph so layers stay distinct.
    sg.nbrs_l1.resize(sg.n_inner);
    for (int vi = 0; vi < sg.n_inner; ++vi) {
        if (vi < sg.n_batch) {
            sg.nbrs_l1[vi] = sg.nbrs_l2[vi];
            continue;
        }
        std::vector<int> pool;
        for (int nb : adj[sg.nodes[vi]]) {
            auto it = local.find(nb);
            if (it == local.end() || it->second >= sg.n_inner) pool.push_back(nb);
        }
        std::sort(pool.begin(), pool.end());
        pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
        for (int nb : sample_up_to(std::move(pool), fanout2, rng)) {
            sg.nbrs_l1[vi].push_back(add_node(nb));
        }
    }
    return sg;
}

void SynthSpec::validate() const {
    if (clients < 1) throw config_error("synth: clients must be >= 1");
    if (events_per_client < 2) throw config_error("synth: events_per_client must be >= 2");
    if (messages_per_event < 1) throw config_error("synth: messages_per_event must be >= 1");
    if (d_t < 1) throw config_error("synth: d_t must be >= 1");
    if (overlap < 0.0 || overlap > 1.0) throw config_error("synth: overlap must be in [0,1]");
    if (p_out >= p_in) throw config_error("synth: p_out must be < p_in");
    if (p_in < 0.0 || p_in > 1.0 || p_out < 0.0) throw config_error("synth: bad p_in/p_out");
    if (cluster_std < 0.0 || shift < 0.0) throw config_error("synth: bad std/shift");
}

std::vector<Dataset> synthesize_clients(const SynthSpec& spec) {
    spec.validate();
    const int K = spec.clients;
    const int E = spec.events_per_client;
    const int n_shared = static_cast<int>(std::lround(spec.overlap * E));
    const int n_private = E - n_shared;
    const double q_in = std::sqrt(spec.p_in);
    const double q_out = std::sqrt(spec.p_out);

    // Shared event means come from one stream so every client sees the same.
    Rng shared_rng = make_rng(spec.seed, 0x5a11);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<Eigen::VectorXd> shared_means(n_shared);
    for (auto& mu : shared_means) {
        mu.resize(spec.d_t);
        for (int d = 0; d < spec.d_t; ++d) mu(d) = gauss(shared_rng);
    }

    std::vector<Dataset> out;
    out.reserve(K);
    for (int k = 0; k < K; ++k) {
        Rng rng = make_rng(spec.seed, 0xc11e, static_cast<std::uint64_t>(k));
        Eigen::VectorXd client_shift = Eigen::VectorXd::Zero(spec.d_t);
        for (int d = 0; d < spec.d_t; ++d) client_shift(d) = spec.shift * gauss(rng);

        // Event ids: shared pool first, then a globally unique private range.
        std::vector<int> event_ids;
        std::vector<Eigen::VectorXd> means;
        for (int e = 0; e < n_shared; ++e) {
            event_ids.push_back(e);
            means.push_back(shared_means[e]);
        }
        for (int j = 0; j < n_private; ++j) {
            event_ids.push_back(n_shared + k * n_private + j);
            Eigen::VectorXd mu(spec.d_t);
            for (int d = 0; d < spec.d_t; ++d) mu(d) = gauss(rng);
            means.push_back(mu);
        }

        Dataset ds;
        ds.d_t = spec.d_t;
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        for (int ei = 0; ei < E; ++ei) {
            const int gid = event_ids[ei];
            // Events are spread over distinct days; 43466 is 2019-01-01.
            const double base_day = 43466.0 + 3.0 * gid;
            for (int m = 0; m < spec.messages_per_event; ++m) {
                Message msg;
                msg.id = "c" + std::to_string(k) + "_e" + std::to_string(gid) + "_m" +
                         std::to_string(m);
                msg.text_embedding.resize(spec.d_t);
                for (int d = 0; d < spec.d_t; ++d) {
                    msg.text_embedding(d) =
                        means[ei](d) + client_shift(d) + spec.cluster_std * gauss(rng);
                }
                msg.timestamp = base_day + 2.0 * unif(rng);
                msg.user = "u" + std::to_string(k) + "_" + std::to_string(ei) + "_" +
                           std::to_string(m);
                if (unif(rng) < q_in) msg.hashtags.insert("ev" + std::to_string(gid));
                if (unif(rng) < q_out) msg.entities.insert("bg");
                msg.event_id = gid;
                ds.messages.push_back(std::move(msg));
            }
        }
        ds.splits = make_splits(ds.size(), derive_seed(spec.seed, 0x511f5, k));
        ds.num_events = count_events(ds.messages);
        out.push_back(std::move(ds));
    }
    return out;
}

} // namespace dame
