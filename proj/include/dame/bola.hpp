#ifndef DAME_BOLA_HPP
#define DAME_BOLA_HPP

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "dame/common.hpp"
#include "dame/encoder.hpp"
#include "dame/param_vector.hpp"

namespace dame {

// Gaussian process regression over observed (lambda, score) pairs with a
// squared-exponential kernel. Scores are standardized internally and
// de-standardized on prediction.
struct GPRState {
    std::vector<double> xs;
    std::vector<double> ys; // original units
    double y_mean = 0.0;
    double y_std = 1.0;
    double lengthscale = 0.1;
    double sigma_f2 = 1.0;
    double sigma_n2 = 1e-4;
    bool degenerate = false;     // all ys equal: flat posterior
    Eigen::MatrixXd chol_lower;  // L with L L^T = K + jitter
    Eigen::VectorXd alpha;       // K^{-1} y_standardized
};

struct BolaConfig {
    double alpha = 0.5;    // lower bound of the lambda search interval
    int n_init = 4;        // initial design points, evenly spaced incl. endpoints
    int n_iter = 6;        // acquisition-driven evaluations
    int grid = 101;        // candidate resolution over [alpha, 1]
    double ucb_delta = 0.1;

    void validate() const;
};

// Elementwise lambda * theta_l + (1 - lambda) * theta_g.
ParamVector interpolate(const ParamVector& theta_l, const ParamVector& theta_g,
                        double lambda);

// Task objective f(lambda): NMI of k-means clustering of the interpolated
// model's validation embeddings against ground truth, with k the number of
// distinct validation events.
double bola_objective(const Encoder& encoder, const ParamVector& theta_l,
                      const ParamVector& theta_g, double lambda, const Subgraph& val_sg,
                      const Eigen::MatrixXd& val_features, const std::vector<int>& val_labels,
                      std::uint64_t kmeans_seed);

// Lengthscale chosen from {0.05, 0.1, 0.2, 0.4} by exact log marginal
// likelihood; sigma_f^2 is the sample variance of ys (1 after
// standardization), sigma_n^2 = 1e-4.
GPRState gpr_fit(const std::vector<double>& xs, const std::vector<double>& ys);

// Posterior mean and standard deviation at the candidate points,
// de-standardized to original units.
std::pair<Eigen::VectorXd, Eigen::VectorXd> posterior(const GPRState& state,
                                                      const std::vector<double>& candidates);

// Expected improvement argmax; sigma = 0 entries score max(mu - best, 0).
// Ties break toward the lowest index.
int acquire_ei(const Eigen::VectorXd& mu, const Eigen::VectorXd& sigma, double best_so_far);

// UCB argmax with beta_t = 2 log(grid_size * t^2 * pi^2 / (6 delta)).
int acquire_ucb(const Eigen::VectorXd& mu, const Eigen::VectorXd& sigma, int t,
                int grid_size, double delta);

struct BolaTraceRow {
    int iteration = 0;           // evaluation order, 0-based
    std::string acquisition;     // "init", "ei", or "ucb"
    double lambda = 0.0;
    double score = 0.0;
};

struct BolaResult {
    double lambda_star = 1.0;
    double best_score = 0.0;
    ParamVector theta_tilde;
    std::vector<BolaTraceRow> trace;
};

using BolaObjective = std::function<double(double lambda)>;

// Evaluates the initial design, then alternates EI (even iterations) and UCB
// (odd) without revisiting grid points. The pure-local endpoint lambda = 1 is
// always in the initial design, so the returned score never regresses below
// the local model's.
BolaResult bola_search(const ParamVector& theta_l, const ParamVector& theta_g,
                       const BolaObjective& objective, const BolaConfig& config);

} // namespace dame

#endif
