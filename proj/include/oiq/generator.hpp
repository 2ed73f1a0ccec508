#pragma once

#include "oiq/dynamics.hpp"

namespace oiq {

struct GeneratorResult {
    std::vector<DState> states;          // BFS order from the empty state
    std::vector<double> pi;              // stationary probabilities, sum 1
    double residual = 0;                 // || pi Q ||_inf (pi (P - I) when discrete)
    int truncation = 0;
    int solver_iterations = 0;           // 0 for the direct solve
    double pi_of(const DState& st) const;
};

// Brute-force oracle: enumerates all detailed states with at most `max_jobs`
// jobs, redirects boundary arrivals as losses (the truncated chain keeps the
// conditional product-form law), and solves the balance equations exactly.
// Direct sparse LU up to `direct_limit` states, damped power sweeps with a
// componentwise-relative stopping rule beyond.
GeneratorResult generator_solve(const SystemSpec& spec, int max_jobs,
                                const ActivationTable* table = nullptr,
                                const OIRate* rate = nullptr,
                                std::size_t max_states = 2000000,
                                std::size_t direct_limit = 4000);

}  // namespace oiq
