#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace pairflow {

/// Base class for every error this library throws on purpose.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Input that is structurally unusable: empty clouds, |xi| out of range,
/// non-finite coordinates, mismatched array sizes.
struct degenerate_input_error : error {
    using error::error;
};

/// Sphere pairs that overlap or violate the separation hypotheses.
struct overlap_error : error {
    using error::error;
};

/// Far-field expansion evaluated inside its validity radius.
struct near_field_error : error {
    std::size_t pair_index;
    near_field_error(const std::string& what, std::size_t pair)
        : error(what), pair_index(pair) {}
};

/// Iteration failed to contract; carries the observed ratio history.
struct non_convergence_error : error {
    std::vector<double> ratios;
    non_convergence_error(const std::string& what, std::vector<double> history)
        : error(what), ratios(std::move(history)) {}
};

/// Non-finite state encountered during time integration.
struct blow_up_error : error {
    double time;
    blow_up_error(const std::string& what, double t) : error(what), time(t) {}
};

/// A diagnostic asked for more recorded history than the run kept.
struct insufficient_history_error : error {
    using error::error;
};

/// Characteristic foot or interpolation query left the grid domain.
struct domain_exit_error : error {
    using error::error;
};

/// Config file could not be parsed or failed schema validation.
struct config_error : error {
    using error::error;
};

/// Estimator resolution too coarse for the requested cloud.
struct resolution_error : error {
    using error::error;
};

}  // namespace pairflow
