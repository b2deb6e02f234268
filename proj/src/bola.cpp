#include "dame/bola.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>

#include "dame/eval_metrics.hpp"

namespace dame {

void BolaConfig::validate() const {
    if (alpha < 0.0 || alpha >= 1.0) throw config_error("bola: alpha must be in [0,1)");
    if (n_init < 2) throw config_error("bola: n_init must be >= 2");
    if (n_iter < 0) throw config_error("bola: n_iter must be >= 0");
    if (grid < n_init) throw config_error("bola: grid must be >= n_init");
    if (ucb_delta <= 0.0 || ucb_delta >= 1.0) throw config_error("bola: ucb_delta in (0,1)");
}

ParamVector interpolate(const ParamVector& theta_l, const ParamVector& theta_g,
                        double lambda) {
    if (lambda < 0.0 || lambda > 1.0) {
        throw std::invalid_argument("interpolate: lambda outside [0,1]");
    }
    return ParamVector::linear(lambda, theta_l, 1.0 - lambda, theta_g);
}

double bola_objective(const Encoder& encoder, const ParamVector& theta_l,
                      const ParamVector& theta_g, double lambda, const Subgraph& val_sg,
                      const Eigen::MatrixXd& val_features, const std::vector<int>& val_labels,
                      std::uint64_t kmeans_seed) {
    std::set<int> distinct(val_labels.begin(), val_labels.end());
    const int k = static_cast<int>(distinct.size());
    if (k < 2) {
        throw data_error("bola objective: validation split has fewer than 2 events");
    }
    ParamVector theta = interpolate(theta_l, theta_g, lambda);
    EmbeddingBatch emb = encoder.forward(theta, val_sg, val_features);
    std::vector<int> truth(emb.node_ids.size());
    for (std::size_t i = 0; i < emb.node_ids.size(); ++i) {
        truth[i] = val_labels[static_cast<std::size_t>(emb.node_ids[i])];
    }
    auto pred = kmeans(emb.H, k, kmeans_seed);
    return nmi(pred, truth);
}

namespace {

double sq_exp(double x1, double x2, double lengthscale, double sigma_f2) {
    double d = x1 - x2;
    return sigma_f2 * std::exp(-d * d / (2.0 * lengthscale * lengthscale));
}

// Cholesky with escalating diagonal jitter; throws past 1e-6.
Eigen::LLT<Eigen::MatrixXd> chol_with_jitter(const Eigen::MatrixXd& k) {
    for (double jitter : {0.0, 1e-10, 1e-8, 1e-6}) {
        Eigen::MatrixXd kj = k;
        if (jitter > 0.0) kj.diagonal().array() += jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(kj);
        if (llt.info() == Eigen::Success) return llt;
    }
    throw std::runtime_error("gpr_fit: Cholesky failed after max jitter 1e-6");
}

double log_marginal_likelihood(const Eigen::LLT<Eigen::MatrixXd>& llt,
                               const Eigen::VectorXd& y) {
    Eigen::VectorXd alpha = llt.solve(y);
    double logdet = 0.0;
    const auto& l = llt.matrixLLT();
    for (long i = 0; i < l.rows(); ++i) logdet += std::log(l(i, i));
    return -0.5 * y.dot(alpha) - logdet -
           0.5 * static_cast<double>(y.size()) * std::log(2.0 * std::numbers::pi);
}

} // namespace

GPRState gpr_fit(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.size() < 2) {
        throw std::invalid_argument("gpr_fit: need at least 2 observations");
    }
    GPRState st;
    st.xs = xs;
    st.ys = ys;
    const long n = static_cast<long>(xs.size());

    double mean = 0.0;
    for (double y : ys) mean += y;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double y : ys) var += (y - mean) * (y - mean);
    var /= static_cast<double>(n - 1);
    st.y_mean = mean;
    st.y_std = std::sqrt(var);

    if (st.y_std < 1e-12) {
        // All observations equal: flat posterior at the common value.
        st.degenerate = true;
        st.y_std = 1.0;
        st.sigma_f2 = 1e-12;
        return st;
    }

    Eigen::VectorXd y_std(n);
    for (long i = 0; i < n; ++i) y_std(i) = (ys[static_cast<std::size_t>(i)] - mean) / st.y_std;

    st.sigma_f2 = 1.0; // sample variance after standardization
    st.sigma_n2 = 1e-4;

    double best_lml = -std::numeric_limits<double>::max();
    for (double ell : {0.05, 0.1, 0.2, 0.4}) {
        Eigen::MatrixXd k(n, n);
        for (long i = 0; i < n; ++i) {
            for (long j = 0; j < n; ++j) {
                k(i, j) = sq_exp(xs[static_cast<std::size_t>(i)], xs[static_cast<std::size_t>(j)],
                                 ell, st.sigma_f2);
            }
        }
        k.diagonal().array() += st.sigma_n2;
        auto llt = chol_with_jitter(k);
        double lml = log_marginal_likelihood(llt, y_std);
        if (lml > best_lml) {
            best_lml = lml;
            st.lengthscale = ell;
            st.chol_lower = llt.matrixL();
            st.alpha = llt.solve(y_std);
        }
    }
    return st;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> posterior(const GPRState& state,
                                                      const std::vector<double>& candidates) {
    const long m = static_cast<long>(candidates.size());
    Eigen::VectorXd mu(m), sigma(m);
    if (state.degenerate) {
        mu.setConstant(state.y_mean);
        sigma.setZero();
        return {mu, sigma};
    }
    const long n = static_cast<long>(state.xs.size());
    for (long c = 0; c < m; ++c) {
        Eigen::VectorXd k_star(n);
        for (long i = 0; i < n; ++i) {
            k_star(i) = sq_exp(state.xs[static_cast<std::size_t>(i)],
                               candidates[static_cast<std::size_t>(c)], state.lengthscale,
                               state.sigma_f2);
        }
        double mean_std = k_star.dot(state.alpha);
        // v = L^{-1} k_*, var = k_** - v.v
        Eigen::VectorXd v =
            state.chol_lower.triangularView<Eigen::Lower>().solve(k_star);
        double var = state.sigma_f2 - v.squaredNorm();
        mu(c) = state.y_mean + mean_std * state.y_std;
        sigma(c) = std::sqrt(std::max(var, 0.0)) * state.y_std;
    }
    return {mu, sigma};
}

namespace {

double norm_pdf(double z) {
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

} // namespace

int acquire_ei(const Eigen::VectorXd& mu, const Eigen::VectorXd& sigma, double best_so_far) {
    if (mu.size() != sigma.size() || mu.size() == 0) {
        throw std::invalid_argument("acquire_ei: bad candidate vectors");
    }
    int arg = 0;
    double best = -std::numeric_limits<double>::max();
    for (long i = 0; i < mu.size(); ++i) {
        double improve = mu(i) - best_so_far;
        double ei;
        if (sigma(i) <= 0.0) {
            ei = std::max(improve, 0.0);
        } else {
            double z = improve / sigma(i);
            ei = improve * norm_cdf(z) + sigma(i) * norm_pdf(z);
        }
        if (ei > best) {
            best = ei;
            arg = static_cast<int>(i);
        }
    }
    return arg;
}

int acquire_ucb(const Eigen::VectorXd& mu, const Eigen::VectorXd& sigma, int t,
                int grid_size, double delta) {
    if (t < 1) throw std::invalid_argument("acquire_ucb: t must be >= 1");
    if (mu.size() != sigma.size() || mu.size() == 0) {
        throw std::invalid_argument("acquire_ucb: bad candidate vectors");
    }
    const double pi2 = std::numbers::pi * std::numbers::pi;
    double beta = 2.0 * std::log(static_cast<double>(grid_size) * t * t * pi2 / (6.0 * delta));
    beta = std::max(beta, 0.0);
    int arg = 0;
    double best = -std::numeric_limits<double>::max();
    for (long i = 0; i < mu.size(); ++i) {
        double ucb = mu(i) + std::sqrt(beta) * sigma(i);
        if (ucb > best) {
            best = ucb;
            arg = static_cast<int>(i);
        }
    }
    return arg;
}

BolaResult bola_search(const ParamVector& theta_l, const ParamVector& theta_g,
                       const BolaObjective& objective, const BolaConfig& config) {
    config.validate();
    theta_l.require_same_layout(theta_g, "bola_search");

    std::vector<double> grid(static_cast<std::size_t>(config.grid));
    for (int i = 0; i < config.grid; ++i) {
        grid[static_cast<std::size_t>(i)] =
            config.alpha + (1.0 - config.alpha) * i / (config.grid - 1);
    }

    std::vector<bool> visited(static_cast<std::size_t>(config.grid), false);
    std::vector<double> xs, ys;
    BolaResult res;
    res.best_score = -std::numeric_limits<double>::max();
    int evaluation = 0;

    auto evaluate = [&](int grid_idx, const char* acq) {
        double lambda = grid[static_cast<std::size_t>(grid_idx)];
        double score = objective(lambda);
        visited[static_cast<std::size_t>(grid_idx)] = true;
        xs.push_back(lambda);
        ys.push_back(score);
        res.trace.push_back({evaluation++, acq, lambda, score});
        if (score > res.best_score) {
            res.best_score = score;
            res.lambda_star = lambda;
        }
    };

    // Initial design: evenly spaced grid indices including both endpoints,
    // so lambda = 1 (pure local) is always evaluated.
    for (int i = 0; i < config.n_init; ++i) {
        int idx = static_cast<int>(
            std::lround(static_cast<double>(i) * (config.grid - 1) / (config.n_init - 1)));
        evaluate(idx, "init");
    }

    for (int it = 0; it < config.n_iter; ++it) {
        GPRState state = gpr_fit(xs, ys);
        std::vector<int> open;
        std::vector<double> open_lambda;
        for (int i = 0; i < config.grid; ++i) {
            if (!visited[static_cast<std::size_t>(i)]) {
                open.push_back(i);
                open_lambda.push_back(grid[static_cast<std::size_t>(i)]);
            }
        }
        if (open.empty()) break;
        auto [mu, sigma] = posterior(state, open_lambda);
        int pick;
        const char* acq;
        if (it % 2 == 0) {
            pick = acquire_ei(mu, sigma, *std::max_element(ys.begin(), ys.end()));
            acq = "ei";
        } else {
            pick = acquire_ucb(mu, sigma, it + 1, config.grid, config.ucb_delta);
            acq = "ucb";
        }
        evaluate(open[static_cast<std::size_t>(pick)], acq);
    }

    res.theta_tilde = interpolate(theta_l, theta_g, res.lambda_star);
    return res;
}

} // namespace dame
