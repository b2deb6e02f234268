#ifndef DAME_ENCODER_HPP
#define DAME_ENCODER_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "dame/common.hpp"
#include "dame/data_model.hpp"
#include "dame/param_vector.hpp"

namespace dame {

// Two-layer graph attention encoder. Layer 1 runs heads_l1 concatenated
// heads of width d_hidden/heads_l1 with an ELU between layers; layer 2 is a
// single head producing d_out-wide message representations.
struct EncoderConfig {
    int d_in = 0;
    int d_hidden = 64;
    int d_out = 64;
    int heads_l1 = 4;
    double leaky_slope = 0.2;
    double margin = 3.0;

    void validate() const;
};

struct EmbeddingBatch {
    std::vector<int> node_ids;
    Eigen::MatrixXd H; // |batch| x d_out, row order matches node_ids
};

// Row indices into an embedding batch.
struct Triplet {
    int anchor = 0;
    int positive = 0;
    int negative = 0;
};

// Uniform fan-in-scaled initialization; identical across clients for an
// identical seed.
ParamVector init_params(const EncoderConfig& cfg, std::uint64_t seed);
std::size_t param_count(const EncoderConfig& cfg);

class Encoder {
public:
    explicit Encoder(EncoderConfig cfg);

    const EncoderConfig& config() const { return cfg_; }

    EmbeddingBatch forward(const ParamVector& params, const Subgraph& sg,
                           const Eigen::MatrixXd& features) const;

    // Backpropagates an embedding-space gradient dH (|batch| x d_out) through
    // the network; the returned gradient shares the params layout.
    ParamVector backward_embedding(const ParamVector& params, const Subgraph& sg,
                                   const Eigen::MatrixXd& features,
                                   const Eigen::MatrixXd& dH) const;

    // Mines triplets on the forward embeddings and returns the triplet loss
    // with its analytic parameter gradient.
    std::pair<double, ParamVector> backward(const ParamVector& params, const Subgraph& sg,
                                            const Eigen::MatrixXd& features,
                                            const std::vector<int>& labels, Rng& rng) const;

private:
    EncoderConfig cfg_;
};

// One random in-batch positive and one semi-hard negative per anchor (the
// nearest negative farther than the positive; random negative as fallback).
std::vector<Triplet> mine_triplets(const Eigen::MatrixXd& H, const std::vector<int>& labels,
                                   Rng& rng);

// Mean over triplets of max(D(a,p) - D(a,n) + margin, 0), Euclidean D.
std::pair<double, std::vector<Triplet>> triplet_loss(const Eigen::MatrixXd& H,
                                                     const std::vector<int>& labels,
                                                     double margin, Rng& rng);
double triplet_loss_value(const Eigen::MatrixXd& H, const std::vector<Triplet>& triplets,
                          double margin);

// Loss plus gradient with respect to the embedding rows.
std::pair<double, Eigen::MatrixXd> triplet_grad(const Eigen::MatrixXd& H,
                                                const std::vector<Triplet>& triplets,
                                                double margin);

struct AdamState {
    Eigen::ArrayXd m;
    Eigen::ArrayXd v;
    long t = 0;
};

// beta1=0.9, beta2=0.999, eps=1e-8.
void adam_step(ParamVector& params, const ParamVector& grad, AdamState& state, double lr);

} // namespace dame

#endif
