#pragma once

#include <functional>
#include <limits>
#include <mutex>
#include <unordered_map>
#include <vector>

#include "oiq/oi_rate.hpp"

namespace oiq {

// One-sided product-form chain over per-item counts: states x with weight
// Phi(x) * prod_i a_i^{x_i}, Phi(x) = sum_{i: x_i>0} Phi(x - e_i) / rate(x).
// Collapses all orderings of the detailed states exactly (the OI property),
// so total masses can be accumulated level by level.
struct CountChain {
    int items = 0;
    std::vector<double> weight;                      // a_i
    std::function<double(const Counts&)> rate;       // mu(x), must be > 0 on valid x
    std::function<bool(const Counts&)> valid;        // optional validity (matching kinds)
    std::function<bool(const Counts&)> region;       // optional truncation region
};

struct MassSum {
    double total = 0;            // sum of weights over all states (levels 0..levels)
    double tail_bound = 0;       // certified-empirical bound on the omitted mass
    int levels = 0;              // last level enumerated
    bool converged = false;
    std::vector<double> level_mass;  // mass of states with total count == n
};

struct MassLimits {
    double tol = 1e-10;              // relative tail target
    double envelope = 0.0;           // a-priori geometric ratio (0 = unknown)
    int max_levels = 100000;
    std::size_t max_level_states = std::size_t(40) * 1000 * 1000;
};

// Accumulates sum over x of Phi(x) prod a_i^{x_i} with a rolling two-level
// buffer.  The tail is certified against max(envelope, trailing observed
// level ratios); throws errc::tolerance when the caps are hit first.
MassSum count_chain_mass(const CountChain& chain, const MassLimits& lim);

// Same sum without the convergence machinery, up to total count <= frontier.
MassSum count_chain_mass_upto(const CountChain& chain, int frontier,
                              std::size_t max_level_states = std::size_t(40) * 1000 * 1000);

// Memoized Phi table for a spec's OI rate, built eagerly up to the frontier;
// reads after construction are lock-free.
class PhiTable {
public:
    PhiTable(const SystemSpec& spec, OIRate rate, int frontier);

    int frontier() const { return frontier_; }
    const SystemSpec& spec() const { return spec_; }

    // Phi(x); errc::input if x lies beyond the frontier
    double phi(const Counts& x) const;
    // zero when x is invalid / unreachable
    bool contains(const Counts& x) const;

    double mu_of(const Counts& x) const { return rate_(spec_, x); }

private:
    SystemSpec spec_;
    OIRate rate_;
    int frontier_;
    struct CountsHash {
        std::size_t operator()(const Counts& x) const;
    };
    std::unordered_map<Counts, double, CountsHash> table_;
};

// Balanced-fairness rates phi_i(x) = Phi(x - e_i)/Phi(x) on x_i > 0.
std::vector<double> balanced_rates(const PhiTable& table, const Counts& x);

}  // namespace oiq
