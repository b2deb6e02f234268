#ifndef DAME_ATTACKS_HPP
#define DAME_ATTACKS_HPP

#include <Eigen/Dense>
#include <cstdint>

#include "dame/data_model.hpp"
#include "dame/param_vector.hpp"

namespace dame {

// Model poisoning: standard-normal noise rescaled to the legitimate model's
// Euclidean norm — a plausible-looking upload with no utility.
ParamVector poison_model(const ParamVector& theta_legit, std::uint64_t seed);

// Data poisoning: a uniformly chosen fraction of the training messages gets
// the trigger added to its embedding and its label flipped to target_event.
// Test and validation splits are untouched.
Dataset poison_data(Dataset dataset, double rate, int target_event,
                    const Eigen::VectorXd& trigger, std::uint64_t seed);

} // namespace dame

#endif
