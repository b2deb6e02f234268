#include "dame/federation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <set>
#include <stdexcept>

#include "dame/attacks.hpp"

namespace dame {

namespace {

// Seed-stream tags, one per purpose.
constexpr std::uint64_t kTagInit = 0x1a17;
constexpr std::uint64_t kTagClientRng = 0xc11e27;
constexpr std::uint64_t kTagProbe = 0x9e0b;
constexpr std::uint64_t kTagPoisonModel = 0xbadbad;
constexpr std::uint64_t kTagTrigger = 0x7171;
constexpr std::uint64_t kTagBolaEval = 0xb01a;
constexpr std::uint64_t kTagTestEval = 0xe7a1;

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

// Runs fn(k) for every client, one async task each unless threads == 1.
template <typename Fn>
void for_each_client(int n_clients, int threads, Fn&& fn) {
    if (threads == 1 || n_clients == 1) {
        for (int k = 0; k < n_clients; ++k) fn(k);
        return;
    }
    std::vector<std::future<void>> futs;
    futs.reserve(static_cast<std::size_t>(n_clients));
    for (int k = 0; k < n_clients; ++k) {
        futs.push_back(std::async(std::launch::async, [&fn, k] { fn(k); }));
    }
    for (auto& f : futs) f.get();
}

template <typename Fn>
auto with_phase(const char* phase, int round, Fn&& fn) {
    try {
        return fn();
    } catch (const config_error& e) {
        throw config_error("round " + std::to_string(round) + " phase " + phase + ": " +
                           e.what());
    } catch (const data_error& e) {
        throw data_error("round " + std::to_string(round) + " phase " + phase + ": " + e.what());
    } catch (const std::exception& e) {
        throw std::runtime_error("round " + std::to_string(round) + " phase " + phase + ": " +
                                 e.what());
    }
}

int distinct_labels(const std::vector<int>& labels) {
    return static_cast<int>(std::set<int>(labels.begin(), labels.end()).size());
}

} // namespace

Strategy parse_strategy(const std::string& s) {
    if (s == "local") return Strategy::local;
    if (s == "fedavg") return Strategy::fedavg;
    if (s == "dame") return Strategy::dame;
    throw config_error("unknown strategy '" + s + "' (expected local|fedavg|dame)");
}

std::string strategy_name(Strategy s) {
    switch (s) {
        case Strategy::local: return "local";
        case Strategy::fedavg: return "fedavg";
        case Strategy::dame: return "dame";
    }
    return "?";
}

std::string role_name(Role r) {
    switch (r) {
        case Role::honest: return "honest";
        case Role::model_poisoner: return "model_poisoner";
        case Role::data_poisoner: return "data_poisoner";
    }
    return "?";
}

void ExperimentConfig::validate(int num_clients) const {
    if (rounds < 1) throw config_error("experiment: rounds must be >= 1");
    if (num_clients < 1) throw config_error("experiment: need at least one client");
    encoder.validate();
    bola.validate();
    train.validate();
    if (attack.rate <= 0.0 || attack.rate > 1.0) {
        throw config_error("attack: rate must be in (0,1]");
    }
    for (int k : attack.model_poisoners) {
        if (k < 0 || k >= num_clients) throw config_error("attack: model_poisoner out of range");
    }
    for (int k : attack.data_poisoners) {
        if (k < 0 || k >= num_clients) throw config_error("attack: data_poisoner out of range");
        if (std::find(attack.model_poisoners.begin(), attack.model_poisoners.end(), k) !=
            attack.model_poisoners.end()) {
            throw config_error("attack: client " + std::to_string(k) + " has two roles");
        }
    }
}

ParamVector fedavg_aggregate(const std::vector<ParamVector>& locals,
                             const std::vector<std::int64_t>& sample_counts) {
    if (locals.empty() || locals.size() != sample_counts.size()) {
        throw std::invalid_argument("fedavg_aggregate: bad inputs");
    }
    std::int64_t total = 0;
    for (std::int64_t c : sample_counts) {
        if (c <= 0) throw std::invalid_argument("fedavg_aggregate: counts must be > 0");
        total += c;
    }
    ParamVector acc(locals[0].layout());
    for (std::size_t k = 0; k < locals.size(); ++k) {
        locals[0].require_same_layout(locals[k], "fedavg_aggregate");
        ParamVector term = locals[k];
        term *= static_cast<double>(sample_counts[k]) / static_cast<double>(total);
        acc += term;
    }
    return acc;
}

Federation::Federation(ExperimentConfig config, std::vector<Dataset> datasets)
    : config_(std::move(config)),
      encoder_((config_.validate(static_cast<int>(datasets.size())),
                config_.encoder.d_in = datasets.at(0).d_t + 2, config_.encoder)) {
    const int K = static_cast<int>(datasets.size());
    for (const auto& ds : datasets) {
        if (ds.d_t != datasets[0].d_t) {
            throw data_error("federation: clients disagree on embedding width");
        }
        if (ds.num_events < 2) throw data_error("federation: dataset has fewer than 2 events");
    }

    // Shared round-0 initialization (identical bytes on every client).
    ParamVector theta0 = init_params(config_.encoder, derive_seed(config_.seed, kTagInit));

    clients_.reserve(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
        ClientState c;
        c.id = k;
        if (std::find(config_.attack.model_poisoners.begin(),
                      config_.attack.model_poisoners.end(),
                      k) != config_.attack.model_poisoners.end()) {
            c.role = Role::model_poisoner;
        } else if (std::find(config_.attack.data_poisoners.begin(),
                             config_.attack.data_poisoners.end(),
                             k) != config_.attack.data_poisoners.end()) {
            c.role = Role::data_poisoner;
        }
        c.dataset = std::move(datasets[static_cast<std::size_t>(k)]);
        if (c.role == Role::data_poisoner) {
            int target = config_.attack.target_event;
            if (target < 0) {
                target = c.dataset.messages.front().event_id;
                for (const auto& m : c.dataset.messages) target = std::min(target, m.event_id);
            }
            double mean_norm = 0.0;
            for (const auto& m : c.dataset.messages) mean_norm += m.text_embedding.norm();
            mean_norm /= static_cast<double>(c.dataset.size());
            Rng trng = make_rng(config_.seed, kTagTrigger, static_cast<std::uint64_t>(k));
            std::normal_distribution<double> gauss(0.0, 1.0);
            Eigen::VectorXd trigger(c.dataset.d_t);
            for (int d = 0; d < c.dataset.d_t; ++d) trigger(d) = gauss(trng);
            trigger *= mean_norm / trigger.norm();
            c.dataset = poison_data(std::move(c.dataset), config_.attack.rate, target, trigger,
                                    derive_seed(config_.seed, kTagTrigger, k, 1));
        }
        c.train_graph = split_graph(c.dataset, c.dataset.splits.train);
        c.val_graph = split_graph(c.dataset, c.dataset.splits.val);
        c.test_graph = split_graph(c.dataset, c.dataset.splits.test);
        c.theta = theta0;
        c.rng = make_rng(config_.seed, kTagClientRng, static_cast<std::uint64_t>(k));
        clients_.push_back(std::move(c));
    }
}

ParamVector Federation::upload(const ClientState& c, int round) const {
    if (c.role == Role::model_poisoner) {
        return poison_model(c.theta,
                            derive_seed(config_.seed, kTagPoisonModel, c.id, round));
    }
    return c.theta;
}

void Federation::train_and_eval(ClientState& c, const ParamVector& theta_start,
                                const ParamVector* theta_g, int round,
                                ClientRoundStats& stats) {
    TrainConfig tc = config_.train;
    if (theta_g == nullptr) tc.glecc = false; // no global model to align with

    auto t0 = Clock::now();
    // A frozen-global reference is required by the signature even when GLECC
    // is off; reuse the start params in that case (never touched).
    const ParamVector& frozen = theta_g ? *theta_g : theta_start;
    std::vector<BatchLogRow>* log = config_.batch_logs ? &stats.batch_log : nullptr;
    c.theta = local_train_epoch(encoder_, theta_start, frozen, c.train_graph, tc, c.adam,
                                c.rng, log);
    stats.t_train_ms = ms_since(t0);

    t0 = Clock::now();
    const int k = distinct_labels(c.test_graph.labels);
    if (k < 2) throw data_error("evaluation: test split has fewer than 2 events");
    Subgraph test_sg = Subgraph::full(c.test_graph.n, c.test_graph.edges);
    EmbeddingBatch emb = encoder_.forward(c.theta, test_sg, c.test_graph.features);
    auto pred = kmeans(emb.H, k, derive_seed(config_.seed, kTagTestEval, c.id, round));
    stats.test = score_clustering(pred, c.test_graph.labels);
    stats.t_eval_ms = ms_since(t0);
}

RoundLog Federation::run_round_local(int round) {
    RoundLog log;
    log.round = round;
    log.clients.resize(clients_.size());
    for_each_client(static_cast<int>(clients_.size()), config_.threads, [&](int k) {
        with_phase("local_training", round, [&] {
            ClientState& c = clients_[static_cast<std::size_t>(k)];
            ClientRoundStats& stats = log.clients[static_cast<std::size_t>(k)];
            stats.client = k;
            stats.role = c.role;
            train_and_eval(c, c.theta, nullptr, round, stats);
        });
    });
    return log;
}

RoundLog Federation::run_round_fedavg(int round) {
    RoundLog log;
    log.round = round;
    log.clients.resize(clients_.size());
    const int K = static_cast<int>(clients_.size());

    std::vector<ParamVector> uploads;
    uploads.reserve(static_cast<std::size_t>(K));
    std::vector<std::int64_t> counts;
    with_phase("upload", round, [&] {
        for (int k = 0; k < K; ++k) {
            auto t0 = Clock::now();
            uploads.push_back(upload(clients_[static_cast<std::size_t>(k)], round));
            auto& stats = log.clients[static_cast<std::size_t>(k)];
            stats.client = k;
            stats.role = clients_[static_cast<std::size_t>(k)].role;
            stats.bytes_up = uploads.back().serialized_size();
            stats.t_upload_ms = ms_since(t0);
            counts.push_back(static_cast<std::int64_t>(
                clients_[static_cast<std::size_t>(k)].dataset.splits.train.size()));
        }
    });

    auto t0 = Clock::now();
    ParamVector global = with_phase("server_aggregate", round,
                                    [&] { return fedavg_aggregate(uploads, counts); });
    log.t_server_ms = ms_since(t0);

    for_each_client(K, config_.threads, [&](int k) {
        ClientState& c = clients_[static_cast<std::size_t>(k)];
        ClientRoundStats& stats = log.clients[static_cast<std::size_t>(k)];
        stats.bytes_down = global.serialized_size();
        with_phase("client_update", round, [&] {
            // FedAvg overrides the local model with the dispatched global.
            train_and_eval(c, global, nullptr, round, stats);
        });
    });
    return log;
}

RoundLog Federation::run_round_dame(int round) {
    RoundLog log;
    log.round = round;
    log.clients.resize(clients_.size());
    const int K = static_cast<int>(clients_.size());

    // Phase 1: uploads (model poisoning happens here).
    std::vector<ParamVector> uploads;
    uploads.reserve(static_cast<std::size_t>(K));
    with_phase("upload", round, [&] {
        for (int k = 0; k < K; ++k) {
            auto t0 = Clock::now();
            uploads.push_back(upload(clients_[static_cast<std::size_t>(k)], round));
            auto& stats = log.clients[static_cast<std::size_t>(k)];
            stats.client = k;
            stats.role = clients_[static_cast<std::size_t>(k)].role;
            stats.bytes_up = uploads.back().serialized_size();
            stats.t_upload_ms = ms_since(t0);
        }
    });

    // Phase 2: server-side probing, partitioning, aggregation.
    auto t0 = Clock::now();
    std::vector<ParamVector> globals = with_phase("server_aggregate", round, [&] {
        ProbeGraph probe = gen_probe(derive_seed(config_.seed, kTagProbe, round),
                                     config_.encoder.d_in);
        std::vector<Eigen::VectorXd> reps;
        reps.reserve(static_cast<std::size_t>(K));
        for (int k = 0; k < K; ++k) {
            reps.push_back(client_representation(encoder_, uploads[static_cast<std::size_t>(k)],
                                                 probe));
        }
        ClientGraph sims = similarity_matrix(reps);
        log.partition = greedy_minimize(sims);
        log.similarity = sims.W;
        return aggregate_global(log.partition, sims, uploads);
    });
    log.t_server_ms = ms_since(t0);
    for (int l = 0; l < static_cast<int>(log.partition.size()); ++l) {
        for (int v : log.partition[static_cast<std::size_t>(l)]) {
            log.clients[static_cast<std::size_t>(v)].partition_id = l;
        }
    }

    // Phases 3-5 per client: BOLA, gated local training, evaluation.
    for_each_client(K, config_.threads, [&](int k) {
        ClientState& c = clients_[static_cast<std::size_t>(k)];
        ClientRoundStats& stats = log.clients[static_cast<std::size_t>(k)];
        const ParamVector& theta_g = globals[static_cast<std::size_t>(k)];
        stats.bytes_down = theta_g.serialized_size();

        auto tb = Clock::now();
        BolaResult bola = with_phase("bola_search", round, [&] {
            Subgraph val_sg = Subgraph::full(c.val_graph.n, c.val_graph.edges);
            std::uint64_t km_seed = derive_seed(config_.seed, kTagBolaEval, c.id, round);
            return bola_search(
                c.theta, theta_g,
                [&](double lambda) {
                    return bola_objective(encoder_, c.theta, theta_g, lambda, val_sg,
                                          c.val_graph.features, c.val_graph.labels, km_seed);
                },
                config_.bola);
        });
        stats.t_bola_ms = ms_since(tb);
        stats.lambda = bola.lambda_star;
        stats.lambda_score = bola.best_score;
        for (const auto& row : bola.trace) {
            if (row.acquisition == "init" && row.lambda >= stats.lambda - 2.0 &&
                row.lambda >= 0.999999999) {
                stats.local_score = row.score; // lambda = 1 endpoint
            }
        }
        stats.bola_trace = std::move(bola.trace);

        with_phase("local_training", round, [&] {
            train_and_eval(c, bola.theta_tilde, &theta_g, round, stats);
        });
    });
    return log;
}

RoundLog Federation::run_round(int round) {
    switch (config_.strategy) {
        case Strategy::local: return run_round_local(round);
        case Strategy::fedavg: return run_round_fedavg(round);
        case Strategy::dame: return run_round_dame(round);
    }
    throw std::logic_error("unreachable strategy");
}

ExperimentResult Federation::run_experiment() {
    ExperimentResult res;
    res.rounds.reserve(static_cast<std::size_t>(config_.rounds));
    for (int r = 0; r < config_.rounds; ++r) res.rounds.push_back(run_round(r));
    return res;
}

ExperimentResult run_experiment(ExperimentConfig config, std::vector<Dataset> datasets) {
    Federation fed(std::move(config), std::move(datasets));
    return fed.run_experiment();
}

} // namespace dame
