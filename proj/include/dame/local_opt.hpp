#ifndef DAME_LOCAL_OPT_HPP
#define DAME_LOCAL_OPT_HPP

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "dame/common.hpp"
#include "dame/data_model.hpp"
#include "dame/encoder.hpp"
#include "dame/param_vector.hpp"

namespace dame {

// Per-event arithmetic means of in-batch message representations, ordered by
// ascending event_id.
struct EventCentroids {
    std::vector<int> event_ids;
    Eigen::MatrixXd H_e;
};

EventCentroids event_representation(const EmbeddingBatch& batch,
                                    const std::vector<int>& labels);

// Mean Euclidean distance between global and local event centroids over the
// in-batch events. The global branch is a constant: no gradient flows into it.
double glecc_loss(const EmbeddingBatch& global_batch, const EmbeddingBatch& local_batch,
                  const std::vector<int>& labels);

// Loss plus gradient with respect to the local batch rows.
std::pair<double, Eigen::MatrixXd> glecc_grad(const EmbeddingBatch& global_batch,
                                              const EmbeddingBatch& local_batch,
                                              const std::vector<int>& labels);

// exp(min(L_t_local - L_t_global, 0)): full constraint weight only when the
// global model is doing at least as well on the batch.
double glecc_gate(double loss_t_local, double loss_t_global);

struct TrainConfig {
    int batch_size = 256;
    int fanout1 = 800;
    int fanout2 = 100;
    double lr = 1e-3;
    bool glecc = true;

    void validate() const;
};

struct BatchLogRow {
    int batch = 0;
    double loss_triplet_local = 0.0;
    double loss_triplet_global = 0.0;
    double gate = 0.0;
    double glecc = 0.0;
    double total = 0.0;
};

// One epoch of mini-batch training on the train graph: triplet loss plus the
// gated event-centric constraint against the frozen global model and one Adam
// step per batch. The gate is a stop-gradient constant within each batch.
ParamVector local_train_epoch(const Encoder& encoder, ParamVector theta_tilde,
                              const ParamVector& theta_g_frozen,
                              const MessageGraph& train_graph, const TrainConfig& config,
                              AdamState& adam, Rng& rng,
                              std::vector<BatchLogRow>* log = nullptr);

} // namespace dame

#endif
