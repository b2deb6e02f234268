#include "dame/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dame {

namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using MapMat = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                              Eigen::RowMajor>>;
using MapMatMut =
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using MapVec = Eigen::Map<const Eigen::VectorXd>;
using MapVecMut = Eigen::Map<Eigen::VectorXd>;

// Per-node attention record: neighborhood (self first) and softmax weights.
struct NodeAttention {
    std::vector<int> nbh;
    Vec alpha;
    Vec score; // pre-LeakyReLU logits
};

// Everything the backward pass needs from one forward evaluation.
struct ForwardTrace {
    Mat x;  // gathered inputs, n_all x d_in
    std::vector<Mat> z1;                     // per head, n_all x dh
    std::vector<std::vector<NodeAttention>> att1; // per head, per inner node
    Mat u;  // n_inner x d_hidden, pre-ELU
    Mat y;  // n_inner x d_hidden, post-ELU
    Mat z2; // n_inner x d_out
    std::vector<NodeAttention> att2;         // per batch node
    Mat h;  // n_batch x d_out
};

double leaky(double v, double slope) { return v > 0.0 ? v : slope * v; }
double leaky_grad(double v, double slope) { return v > 0.0 ? 1.0 : slope; }

// Softmax over a node's neighborhood logits, max-shifted.
Vec softmax(const Vec& e) {
    Vec out = (e.array() - e.maxCoeff()).exp();
    return out / out.sum();
}

NodeAttention attend(int i, const std::vector<int>& nbrs, const Mat& z,
                     const Vec& a_src, const Vec& a_dst, double slope) {
    NodeAttention na;
    na.nbh.reserve(nbrs.size() + 1);
    na.nbh.push_back(i);
    na.nbh.insert(na.nbh.end(), nbrs.begin(), nbrs.end());
    const double src_term = a_src.dot(z.row(i));
    na.score.resize(static_cast<long>(na.nbh.size()));
    Vec e(static_cast<long>(na.nbh.size()));
    for (std::size_t j = 0; j < na.nbh.size(); ++j) {
        na.score(static_cast<long>(j)) = src_term + a_dst.dot(z.row(na.nbh[j]));
        e(static_cast<long>(j)) = leaky(na.score(static_cast<long>(j)), slope);
    }
    na.alpha = softmax(e);
    return na;
}

} // namespace

void EncoderConfig::validate() const {
    if (d_in < 1 || d_hidden < 1 || d_out < 1 || heads_l1 < 1) {
        throw config_error("encoder: all widths and head counts must be >= 1");
    }
    if (d_hidden % heads_l1 != 0) {
        throw config_error("encoder: d_hidden must be divisible by heads_l1");
    }
    if (margin <= 0.0) throw config_error("encoder: margin must be > 0");
    if (leaky_slope <= 0.0 || leaky_slope >= 1.0) {
        throw config_error("encoder: leaky_slope must be in (0,1)");
    }
}

namespace {

std::vector<ParamSegment> make_layout(const EncoderConfig& cfg) {
    const auto dh = static_cast<std::size_t>(cfg.d_hidden / cfg.heads_l1);
    const auto din = static_cast<std::size_t>(cfg.d_in);
    const auto dhid = static_cast<std::size_t>(cfg.d_hidden);
    const auto dout = static_cast<std::size_t>(cfg.d_out);
    std::vector<ParamSegment> layout;
    for (int h = 0; h < cfg.heads_l1; ++h) {
        std::string p = "l1.h" + std::to_string(h) + ".";
        layout.push_back({p + "W", {din, dh}, 0});
        layout.push_back({p + "a_src", {dh}, 0});
        layout.push_back({p + "a_dst", {dh}, 0});
    }
    layout.push_back({"l2.W", {dhid, dout}, 0});
    layout.push_back({"l2.a_src", {dout}, 0});
    layout.push_back({"l2.a_dst", {dout}, 0});
    return layout;
}

} // namespace

std::size_t param_count(const EncoderConfig& cfg) {
    std::size_t total = 0;
    for (const auto& seg : make_layout(cfg)) total += seg.size();
    return total;
}

ParamVector init_params(const EncoderConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    ParamVector params(make_layout(cfg));
    Rng rng(seed);
    for (const auto& seg : params.layout()) {
        // fan-in = leading dimension for matrices, vector length for the
        // attention vectors.
        double fan_in = static_cast<double>(seg.shape.front());
        double bound = 1.0 / std::sqrt(fan_in);
        std::uniform_real_distribution<double> u(-bound, bound);
        double* p = params.values().data() + seg.offset;
        for (std::size_t i = 0; i < seg.size(); ++i) p[i] = u(rng);
    }
    return params;
}

Encoder::Encoder(EncoderConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

namespace {

ForwardTrace run_forward(const EncoderConfig& cfg, const ParamVector& params,
                         const Subgraph& sg, const Mat& features) {
    const int n_all = static_cast<int>(sg.nodes.size());
    const int dh = cfg.d_hidden / cfg.heads_l1;
    ForwardTrace t;

    t.x.resize(n_all, cfg.d_in);
    for (int i = 0; i < n_all; ++i) {
        if (sg.nodes[i] < 0 || sg.nodes[i] >= features.rows()) {
            throw std::invalid_argument("encoder forward: subgraph node outside feature matrix");
        }
        t.x.row(i) = features.row(sg.nodes[i]);
    }
    if (t.x.cols() != cfg.d_in) {
        throw std::invalid_argument("encoder forward: feature width does not match d_in");
    }

    // Layer 1: multi-head attention over sampled neighborhoods.
    t.z1.resize(static_cast<std::size_t>(cfg.heads_l1));
    t.att1.resize(static_cast<std::size_t>(cfg.heads_l1));
    t.u.resize(sg.n_inner, cfg.d_hidden);
    for (int h = 0; h < cfg.heads_l1; ++h) {
        std::string p = "l1.h" + std::to_string(h) + ".";
        MapMat w(params.segment(p + "W"), cfg.d_in, dh);
        MapVec a_src(params.segment(p + "a_src"), dh);
        MapVec a_dst(params.segment(p + "a_dst"), dh);
        auto& z = t.z1[static_cast<std::size_t>(h)];
        z = t.x * w;
        auto& att = t.att1[static_cast<std::size_t>(h)];
        att.resize(static_cast<std::size_t>(sg.n_inner));
        for (int i = 0; i < sg.n_inner; ++i) {
            att[static_cast<std::size_t>(i)] =
                attend(i, sg.nbrs_l1[static_cast<std::size_t>(i)], z, a_src, a_dst,
                       cfg.leaky_slope);
            Eigen::RowVectorXd agg = Eigen::RowVectorXd::Zero(dh);
            const auto& na = att[static_cast<std::size_t>(i)];
            for (std::size_t j = 0; j < na.nbh.size(); ++j) {
                agg += na.alpha(static_cast<long>(j)) * z.row(na.nbh[j]);
            }
            t.u.block(i, h * dh, 1, dh) = agg;
        }
    }
    if (!t.u.allFinite()) {
        throw std::runtime_error("encoder forward: non-finite activation in layer 1");
    }
    t.y = t.u.unaryExpr([](double v) { return v > 0.0 ? v : std::expm1(v); });

    // Layer 2: single head over the batch nodes.
    MapMat w2(params.segment("l2.W"), cfg.d_hidden, cfg.d_out);
    MapVec a2_src(params.segment("l2.a_src"), cfg.d_out);
    MapVec a2_dst(params.segment("l2.a_dst"), cfg.d_out);
    t.z2 = t.y * w2;
    t.att2.resize(static_cast<std::size_t>(sg.n_batch));
    t.h.resize(sg.n_batch, cfg.d_out);
    for (int i = 0; i < sg.n_batch; ++i) {
        t.att2[static_cast<std::size_t>(i)] =
            attend(i, sg.nbrs_l2[static_cast<std::size_t>(i)], t.z2, a2_src, a2_dst,
                   cfg.leaky_slope);
        Eigen::RowVectorXd agg = Eigen::RowVectorXd::Zero(cfg.d_out);
        const auto& na = t.att2[static_cast<std::size_t>(i)];
        for (std::size_t j = 0; j < na.nbh.size(); ++j) {
            agg += na.alpha(static_cast<long>(j)) * t.z2.row(na.nbh[j]);
        }
        t.h.row(i) = agg;
    }
    if (!t.h.allFinite()) {
        throw std::runtime_error("encoder forward: non-finite activation in layer 2");
    }
    return t;
}

// Reverse pass of one attention layer. dout rows correspond to target nodes;
// accumulates into dz (rows over the layer's input nodes) and the attention
// vector gradients.
void attention_backward(const std::vector<NodeAttention>& att, const Mat& z,
                        const Mat& dout, double slope, Mat& dz, MapVecMut da_src,
                        MapVecMut da_dst, const Vec& a_src, const Vec& a_dst) {
    for (std::size_t i = 0; i < att.size(); ++i) {
        const auto& na = att[i];
        const Eigen::RowVectorXd g = dout.row(static_cast<long>(i));
        const int self = na.nbh[0];
        const long m = static_cast<long>(na.nbh.size());
        Vec dalpha(m);
        for (long j = 0; j < m; ++j) dalpha(j) = g.dot(z.row(na.nbh[static_cast<std::size_t>(j)]));
        const double inner = na.alpha.dot(dalpha);
        for (long j = 0; j < m; ++j) {
            const int nj = na.nbh[static_cast<std::size_t>(j)];
            // aggregation term
            dz.row(nj) += na.alpha(j) * g;
            // softmax + LeakyReLU chain
            const double de = na.alpha(j) * (dalpha(j) - inner);
            const double ds = de * leaky_grad(na.score(j), slope);
            da_src += ds * z.row(self).transpose();
            da_dst += ds * z.row(nj).transpose();
            dz.row(self) += ds * a_src.transpose();
            dz.row(nj) += ds * a_dst.transpose();
        }
    }
}

} // namespace

EmbeddingBatch Encoder::forward(const ParamVector& params, const Subgraph& sg,
                                const Eigen::MatrixXd& features) const {
    ForwardTrace t = run_forward(cfg_, params, sg, features);
    EmbeddingBatch out;
    out.node_ids.assign(sg.nodes.begin(), sg.nodes.begin() + sg.n_batch);
    out.H = std::move(t.h);
    return out;
}

ParamVector Encoder::backward_embedding(const ParamVector& params, const Subgraph& sg,
                                        const Eigen::MatrixXd& features,
                                        const Eigen::MatrixXd& dH) const {
    if (dH.rows() != sg.n_batch || dH.cols() != cfg_.d_out) {
        throw std::invalid_argument("encoder backward: dH shape mismatch");
    }
    ForwardTrace t = run_forward(cfg_, params, sg, features);
    ParamVector grad(params.layout());
    const int dh = cfg_.d_hidden / cfg_.heads_l1;
    const int n_all = static_cast<int>(sg.nodes.size());

    // Layer 2 backward.
    MapVec a2_src(params.segment("l2.a_src"), cfg_.d_out);
    MapVec a2_dst(params.segment("l2.a_dst"), cfg_.d_out);
    MapVecMut da2_src(grad.segment("l2.a_src"), cfg_.d_out);
    MapVecMut da2_dst(grad.segment("l2.a_dst"), cfg_.d_out);
    Mat dz2 = Mat::Zero(sg.n_inner, cfg_.d_out);
    attention_backward(t.att2, t.z2, dH, cfg_.leaky_slope, dz2, da2_src, da2_dst,
                       a2_src, a2_dst);
    MapMatMut dw2(grad.segment("l2.W"), cfg_.d_hidden, cfg_.d_out);
    dw2 += t.y.transpose() * dz2;
    MapMat w2(params.segment("l2.W"), cfg_.d_hidden, cfg_.d_out);
    Mat dy = dz2 * w2.transpose();

    // ELU'(u) = 1 for u > 0, exp(u) otherwise.
    Mat du = dy.array() * t.u.unaryExpr([](double v) {
                              return v > 0.0 ? 1.0 : std::exp(v);
                          }).array();

    // Layer 1 backward, head by head.
    for (int h = 0; h < cfg_.heads_l1; ++h) {
        std::string p = "l1.h" + std::to_string(h) + ".";
        MapVec a_src(params.segment(p + "a_src"), dh);
        MapVec a_dst(params.segment(p + "a_dst"), dh);
        MapVecMut da_src(grad.segment(p + "a_src"), dh);
        MapVecMut da_dst(grad.segment(p + "a_dst"), dh);
        const Mat dout = du.block(0, h * dh, sg.n_inner, dh);
        Mat dz = Mat::Zero(n_all, dh);
        attention_backward(t.att1[static_cast<std::size_t>(h)],
                           t.z1[static_cast<std::size_t>(h)], dout, cfg_.leaky_slope, dz,
                           da_src, da_dst, a_src, a_dst);
        MapMatMut dw(grad.segment(p + "W"), cfg_.d_in, dh);
        dw += t.x.transpose() * dz;
    }
    return grad;
}

std::pair<double, ParamVector> Encoder::backward(const ParamVector& params, const Subgraph& sg,
                                                 const Eigen::MatrixXd& features,
                                                 const std::vector<int>& labels,
                                                 Rng& rng) const {
    EmbeddingBatch batch = forward(params, sg, features);
    std::vector<int> batch_labels(static_cast<std::size_t>(sg.n_batch));
    for (int i = 0; i < sg.n_batch; ++i) {
        batch_labels[static_cast<std::size_t>(i)] = labels[static_cast<std::size_t>(sg.nodes[i])];
    }
    auto triplets = mine_triplets(batch.H, batch_labels, rng);
    auto [loss, dH] = triplet_grad(batch.H, triplets, cfg_.margin);
    if (triplets.empty()) {
        return {loss, ParamVector(params.layout())};
    }
    return {loss, backward_embedding(params, sg, features, dH)};
}

std::vector<Triplet> mine_triplets(const Eigen::MatrixXd& H, const std::vector<int>& labels,
                                   Rng& rng) {
    const int n = static_cast<int>(H.rows());
    if (static_cast<int>(labels.size()) != n) {
        throw std::invalid_argument("mine_triplets: label count mismatch");
    }
    std::vector<Triplet> out;
    for (int a = 0; a < n; ++a) {
        std::vector<int> pos, neg;
        for (int j = 0; j < n; ++j) {
            if (j == a) continue;
            (labels[static_cast<std::size_t>(j)] == labels[static_cast<std::size_t>(a)] ? pos
                                                                                        : neg)
                .push_back(j);
        }
        if (pos.empty() || neg.empty()) continue;
        std::uniform_int_distribution<int> pick_pos(0, static_cast<int>(pos.size()) - 1);
        int p = pos[pick_pos(rng)];
        double d_ap = (H.row(a) - H.row(p)).norm();
        // semi-hard: nearest negative beyond the positive
        int best = -1;
        double best_d = std::numeric_limits<double>::max();
        for (int nn : neg) {
            double d_an = (H.row(a) - H.row(nn)).norm();
            if (d_an > d_ap && d_an < best_d) {
                best_d = d_an;
                best = nn;
            }
        }
        if (best < 0) {
            std::uniform_int_distribution<int> pick_neg(0, static_cast<int>(neg.size()) - 1);
            best = neg[pick_neg(rng)];
        }
        out.push_back({a, p, best});
    }
    return out;
}

std::pair<double, std::vector<Triplet>> triplet_loss(const Eigen::MatrixXd& H,
                                                     const std::vector<int>& labels,
                                                     double margin, Rng& rng) {
    auto triplets = mine_triplets(H, labels, rng);
    return {triplet_loss_value(H, triplets, margin), std::move(triplets)};
}

double triplet_loss_value(const Eigen::MatrixXd& H, const std::vector<Triplet>& triplets,
                          double margin) {
    if (triplets.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& t : triplets) {
        double d_ap = (H.row(t.anchor) - H.row(t.positive)).norm();
        double d_an = (H.row(t.anchor) - H.row(t.negative)).norm();
        sum += std::max(d_ap - d_an + margin, 0.0);
    }
    return sum / static_cast<double>(triplets.size());
}

std::pair<double, Eigen::MatrixXd> triplet_grad(const Eigen::MatrixXd& H,
                                                const std::vector<Triplet>& triplets,
                                                double margin) {
    Eigen::MatrixXd dH = Eigen::MatrixXd::Zero(H.rows(), H.cols());
    if (triplets.empty()) return {0.0, dH};
    double sum = 0.0;
    const double inv = 1.0 / static_cast<double>(triplets.size());
    for (const auto& t : triplets) {
        Eigen::RowVectorXd ap = H.row(t.anchor) - H.row(t.positive);
        Eigen::RowVectorXd an = H.row(t.anchor) - H.row(t.negative);
        double d_ap = ap.norm();
        double d_an = an.norm();
        double term = d_ap - d_an + margin;
        if (term <= 0.0) continue;
        sum += term;
        // subgradient 0 at coincident points
        if (d_ap > 0.0) {
            dH.row(t.anchor) += inv * ap / d_ap;
            dH.row(t.positive) -= inv * ap / d_ap;
        }
        if (d_an > 0.0) {
            dH.row(t.anchor) -= inv * an / d_an;
            dH.row(t.negative) += inv * an / d_an;
        }
    }
    return {sum * inv, dH};
}

void adam_step(ParamVector& params, const ParamVector& grad, AdamState& state, double lr) {
    params.require_same_layout(grad, "adam_step");
    if (lr <= 0.0) throw std::invalid_argument("adam_step: lr must be > 0");
    if (!grad.all_finite()) throw std::runtime_error("adam_step: non-finite gradient");
    const long n = static_cast<long>(params.size());
    if (state.t == 0) {
        state.m = Eigen::ArrayXd::Zero(n);
        state.v = Eigen::ArrayXd::Zero(n);
    }
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    Eigen::Map<const Eigen::ArrayXd> g(grad.values().data(), n);
    Eigen::Map<Eigen::ArrayXd> p(params.values().data(), n);
    state.t += 1;
    state.m = beta1 * state.m + (1.0 - beta1) * g;
    state.v = beta2 * state.v + (1.0 - beta2) * g.square();
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
    p -= lr * (state.m / c1) / ((state.v / c2).sqrt() + eps);
}

} // namespace dame
