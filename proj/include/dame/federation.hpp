#ifndef DAME_FEDERATION_HPP
#define DAME_FEDERATION_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "dame/bola.hpp"
#include "dame/common.hpp"
#include "dame/data_model.hpp"
#include "dame/encoder.hpp"
#include "dame/eval_metrics.hpp"
#include "dame/local_opt.hpp"
#include "dame/param_vector.hpp"
#include "dame/sega.hpp"

namespace dame {

enum class Strategy { local, fedavg, dame };
enum class Role { honest, model_poisoner, data_poisoner };

Strategy parse_strategy(const std::string& s);
std::string strategy_name(Strategy s);
std::string role_name(Role r);

struct AttackConfig {
    std::vector<int> model_poisoners;
    std::vector<int> data_poisoners;
    double rate = 0.3;
    // Data-poison label target: -1 picks the poisoned client's first event.
    int target_event = -1;
};

struct ExperimentConfig {
    Strategy strategy = Strategy::dame;
    int rounds = 20;
    std::uint64_t seed = 1;
    EncoderConfig encoder; // d_in filled in from the data
    BolaConfig bola;
    TrainConfig train;
    AttackConfig attack;
    int threads = 0;          // 0: one task per client
    bool batch_logs = false;  // collect per-batch training rows

    void validate(int num_clients) const;
};

// One simulated participant. Datasets and split graphs are immutable after
// setup; theta/adam/rng are owned exclusively by the client between barriers.
struct ClientState {
    int id = 0;
    Role role = Role::honest;
    Dataset dataset;
    MessageGraph train_graph;
    MessageGraph val_graph;
    MessageGraph test_graph;
    ParamVector theta;
    AdamState adam;
    Rng rng;
};

struct ClientRoundStats {
    int client = 0;
    Role role = Role::honest;
    ClusterScores test;
    double lambda = 1.0;
    double lambda_score = 0.0; // best BOLA objective value
    double local_score = 0.0;  // objective at lambda = 1 (pure local)
    int partition_id = 0;
    std::uint64_t bytes_up = 0;
    std::uint64_t bytes_down = 0;
    double t_upload_ms = 0.0;
    double t_bola_ms = 0.0;
    double t_train_ms = 0.0;
    double t_eval_ms = 0.0;
    std::vector<BolaTraceRow> bola_trace;
    std::vector<BatchLogRow> batch_log;
};

struct RoundLog {
    int round = 0;
    std::vector<ClientRoundStats> clients;
    PartitionSet partition;     // DAMe only
    Eigen::MatrixXd similarity; // DAMe only
    double t_server_ms = 0.0;
};

struct ExperimentResult {
    std::vector<RoundLog> rounds;
};

// Sum_k (N_k / N_sum) theta_k.
ParamVector fedavg_aggregate(const std::vector<ParamVector>& locals,
                             const std::vector<std::int64_t>& sample_counts);

class Federation {
public:
    // Takes ownership of the datasets; applies data poisoning, builds split
    // graphs, and hands every client the shared round-0 initialization.
    Federation(ExperimentConfig config, std::vector<Dataset> datasets);

    RoundLog run_round(int round);
    ExperimentResult run_experiment();

    const std::vector<ClientState>& clients() const { return clients_; }
    const ExperimentConfig& config() const { return config_; }

private:
    RoundLog run_round_local(int round);
    RoundLog run_round_fedavg(int round);
    RoundLog run_round_dame(int round);

    void train_and_eval(ClientState& c, const ParamVector& theta_start,
                        const ParamVector* theta_g, int round, ClientRoundStats& stats);
    ParamVector upload(const ClientState& c, int round) const;

    ExperimentConfig config_;
    Encoder encoder_;
    std::vector<ClientState> clients_;
};

ExperimentResult run_experiment(ExperimentConfig config, std::vector<Dataset> datasets);

} // namespace dame

#endif
