#include "dame/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace dame {

ParamVector poison_model(const ParamVector& theta_legit, std::uint64_t seed) {
    ParamVector out(theta_legit.layout());
    Rng rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (double& v : out.values()) v = gauss(rng);
    double target = theta_legit.norm2();
    double actual = out.norm2();
    if (actual > 0.0) out *= target / actual;
    return out;
}

Dataset poison_data(Dataset dataset, double rate, int target_event,
                    const Eigen::VectorXd& trigger, std::uint64_t seed) {
    if (rate <= 0.0 || rate > 1.0) {
        throw std::invalid_argument("poison_data: rate must be in (0,1]");
    }
    if (trigger.size() != dataset.d_t) {
        throw std::invalid_argument("poison_data: trigger length != d_t");
    }
    bool target_exists = false;
    for (const auto& m : dataset.messages) {
        if (m.event_id == target_event) {
            target_exists = true;
            break;
        }
    }
    if (!target_exists) {
        throw std::invalid_argument("poison_data: target_event not present in dataset");
    }

    std::vector<int> train = dataset.splits.train;
    Rng rng(seed);
    std::shuffle(train.begin(), train.end(), rng);
    const auto n_poison =
        static_cast<std::size_t>(std::floor(rate * static_cast<double>(train.size())));
    for (std::size_t i = 0; i < n_poison; ++i) {
        Message& m = dataset.messages[static_cast<std::size_t>(train[i])];
        m.text_embedding += trigger;
        m.event_id = target_event;
    }

    std::unordered_set<int> ids;
    for (const auto& m : dataset.messages) ids.insert(m.event_id);
    dataset.num_events = static_cast<int>(ids.size());
    return dataset;
}

} // namespace dame
