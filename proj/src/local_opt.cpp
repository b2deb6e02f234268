#include "dame/local_opt.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

namespace dame {

namespace {

// event_id -> member row indices, keys ascending.
std::map<int, std::vector<int>> group_by_event(const std::vector<int>& labels) {
    std::map<int, std::vector<int>> groups;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        groups[labels[i]].push_back(static_cast<int>(i));
    }
    return groups;
}

void check_aligned(const EmbeddingBatch& a, const EmbeddingBatch& b,
                   const std::vector<int>& labels) {
    if (a.node_ids != b.node_ids) {
        throw std::invalid_argument("glecc: global and local batches cover different nodes");
    }
    if (labels.size() != a.node_ids.size()) {
        throw std::invalid_argument("glecc: label count mismatch");
    }
}

} // namespace

EventCentroids event_representation(const EmbeddingBatch& batch,
                                    const std::vector<int>& labels) {
    if (batch.node_ids.empty()) {
        throw std::invalid_argument("event_representation: empty batch");
    }
    if (labels.size() != batch.node_ids.size()) {
        throw std::invalid_argument("event_representation: label count mismatch");
    }
    auto groups = group_by_event(labels);
    EventCentroids out;
    out.H_e.resize(static_cast<long>(groups.size()), batch.H.cols());
    long row = 0;
    for (const auto& [event, members] : groups) {
        out.event_ids.push_back(event);
        Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(batch.H.cols());
        for (int m : members) mean += batch.H.row(m);
        out.H_e.row(row++) = mean / static_cast<double>(members.size());
    }
    return out;
}

double glecc_loss(const EmbeddingBatch& global_batch, const EmbeddingBatch& local_batch,
                  const std::vector<int>& labels) {
    return glecc_grad(global_batch, local_batch, labels).first;
}

std::pair<double, Eigen::MatrixXd> glecc_grad(const EmbeddingBatch& global_batch,
                                              const EmbeddingBatch& local_batch,
                                              const std::vector<int>& labels) {
    check_aligned(global_batch, local_batch, labels);
    auto groups = group_by_event(labels);
    const double n_events = static_cast<double>(groups.size());
    Eigen::MatrixXd dH = Eigen::MatrixXd::Zero(local_batch.H.rows(), local_batch.H.cols());
    double loss = 0.0;
    for (const auto& [event, members] : groups) {
        Eigen::RowVectorXd cg = Eigen::RowVectorXd::Zero(local_batch.H.cols());
        Eigen::RowVectorXd cl = cg;
        for (int m : members) {
            cg += global_batch.H.row(m);
            cl += local_batch.H.row(m);
        }
        cg /= static_cast<double>(members.size());
        cl /= static_cast<double>(members.size());
        double dist = (cg - cl).norm();
        loss += dist;
        if (dist > 0.0) {
            Eigen::RowVectorXd dir =
                (cl - cg) / (dist * n_events * static_cast<double>(members.size()));
            for (int m : members) dH.row(m) += dir;
        }
    }
    return {loss / n_events, dH};
}

double glecc_gate(double loss_t_local, double loss_t_global) {
    if (!std::isfinite(loss_t_local) || !std::isfinite(loss_t_global)) {
        throw std::invalid_argument("glecc_gate: non-finite loss");
    }
    return std::exp(std::min(loss_t_local - loss_t_global, 0.0));
}

void TrainConfig::validate() const {
    if (batch_size < 2) throw config_error("train: batch_size must be >= 2");
    if (fanout1 < 1 || fanout2 < 1) throw config_error("train: fanouts must be >= 1");
    if (lr <= 0.0) throw config_error("train: lr must be > 0");
}

ParamVector local_train_epoch(const Encoder& encoder, ParamVector theta_tilde,
                              const ParamVector& theta_g_frozen,
                              const MessageGraph& train_graph, const TrainConfig& config,
                              AdamState& adam, Rng& rng, std::vector<BatchLogRow>* log) {
    config.validate();
    if (train_graph.n == 0) throw data_error("local_train_epoch: empty train graph");
    const double margin = encoder.config().margin;

    std::vector<int> order(static_cast<std::size_t>(train_graph.n));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    int batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
        std::vector<int> batch(
            order.begin() + static_cast<long>(start),
            order.begin() + static_cast<long>(std::min(start + config.batch_size, order.size())));
        Subgraph sg = sample_neighborhood(train_graph, batch, config.fanout1, config.fanout2, rng);

        EmbeddingBatch local = encoder.forward(theta_tilde, sg, train_graph.features);
        std::vector<int> labels(local.node_ids.size());
        for (std::size_t i = 0; i < local.node_ids.size(); ++i) {
            labels[i] = train_graph.labels[static_cast<std::size_t>(local.node_ids[i])];
        }
        auto triplets = mine_triplets(local.H, labels, rng);
        auto [loss_local, dh] = triplet_grad(local.H, triplets, margin);

        BatchLogRow row;
        row.batch = batch_index++;
        row.loss_triplet_local = loss_local;
        double total = loss_local;
        if (config.glecc) {
            // Same triplets on the frozen global branch so the two triplet
            // losses are comparable.
            EmbeddingBatch global = encoder.forward(theta_g_frozen, sg, train_graph.features);
            double loss_global = triplet_loss_value(global.H, triplets, margin);
            double gate = glecc_gate(loss_local, loss_global);
            auto [glecc_val, dh_glecc] = glecc_grad(global, local, labels);
            dh += gate * dh_glecc;
            total += gate * glecc_val;
            row.loss_triplet_global = loss_global;
            row.gate = gate;
            row.glecc = glecc_val;
        }
        row.total = total;
        if (log) log->push_back(row);

        ParamVector grad = encoder.backward_embedding(theta_tilde, sg, train_graph.features, dh);
        adam_step(theta_tilde, grad, adam, config.lr);
    }
    return theta_tilde;
}

} // namespace dame
