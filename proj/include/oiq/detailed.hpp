#pragma once

#include <functional>

#include "oiq/normalize.hpp"

namespace oiq {

using JobSequence = std::vector<int>;  // class indices, oldest first

struct ZEntry {
    bool is_server = false;
    int id = 0;  // class index or server index
    bool operator==(const ZEntry&) const = default;
};

inline ZEntry job_entry(int cls) { return {false, cls}; }
inline ZEntry server_entry(int s) { return {true, s}; }

struct AlisState {
    JobSequence queue;       // waiting jobs only
    std::vector<int> idle;   // idle servers, longest idle first
};

struct RaisState {
    std::vector<ZEntry> entries;  // interleaved queue jobs / busy servers
};

struct ClosedTokenState {
    std::vector<int> busy;  // tokens serving, oldest job first
    std::vector<int> idle;  // tokens idle, longest idle first
};

struct MatchingState {
    JobSequence jobs;          // waiting jobs (gm: all waiting agents)
    std::vector<int> servers;  // waiting server types, arrival order (repeats ok)
};

// Unified detailed state shared with the dynamics/generator layer.
struct DState {
    std::vector<ZEntry> q;   // arrival-ordered side
    std::vector<int> srv;    // idle/waiting server side where the kind has one
    bool operator==(const DState&) const = default;
};

struct DStateHash {
    std::size_t operator()(const DState& s) const;
};

DState to_dstate(const JobSequence& seq);
DState to_dstate(const AlisState& st);
DState to_dstate(const RaisState& st);
DState to_dstate(const ClosedTokenState& st);
DState to_dstate(const MatchingState& st);

// ---- unnormalized product-form weights ---------------------------------------

struct Weight {
    double value = 0;
    bool valid = false;
};

Weight weight_collaborative(const SystemSpec& spec, const JobSequence& seq,
                            const OIRate* rate = nullptr);
Weight weight_alis(const SystemSpec& spec, const AlisState& st);
Weight weight_rais(const SystemSpec& spec, const ActivationTable& table, const RaisState& st,
                   const OIRate* token_rate = nullptr);
Weight weight_closed_token(const SystemSpec& spec, const ClosedTokenState& st,
                           const OIRate* token_rate = nullptr);
Weight weight_matching(const SystemSpec& spec, const MatchingState& st);

// kind dispatch over the unified state
Weight state_weight(const SystemSpec& spec, const DState& st,
                    const ActivationTable* table = nullptr, const OIRate* rate = nullptr);

// ---- stationary probabilities ------------------------------------------------

struct PiValue {
    double value = 0;
    bool valid = false;       // state validity; invalid states carry value 0
    double tail_bound = 0;    // normalization tail when normalized
};

PiValue pi_detailed(const SystemSpec& spec, const DState& st, bool normalized,
                    double tol = 1e-10, const ActivationTable* table = nullptr,
                    const OIRate* rate = nullptr,
                    const std::function<bool(const Counts&)>& region = {});
PiValue pi_matching(const SystemSpec& spec, const MatchingState& st, bool normalized,
                    double tol = 1e-10);

// ---- truncation regions --------------------------------------------------

struct RegionVerdict {
    bool ok = true;
    Counts witness;  // in-region vector whose reduction leaves the region
};

// Permutation closure is structural for count-based regions; this checks
// coordinatewise down-closure for all vectors with total <= bound.
RegionVerdict check_truncation_region(const SystemSpec& spec,
                                      const std::function<bool(const Counts&)>& region,
                                      int bound);

// ---- partial balance ----------------------------------------------------

struct BalanceFamily {
    enum class Which { Class, Server };
    Which which = Which::Class;
    int id = 0;
    static BalanceFamily cls(int c) { return {Which::Class, c}; }
    static BalanceFamily server(int s) { return {Which::Server, s}; }
};

// (flow out) - (flow in) for one partial-balance family under the
// product-form weights; zero up to rounding when the product form is exact.
double partial_balance_residual(const SystemSpec& spec, const DState& st, BalanceFamily family,
                                const ActivationTable* table = nullptr,
                                const OIRate* rate = nullptr);

struct BalanceSweep {
    double max_residual = 0;
    double max_global_gap = 0;  // | sum of family residuals - global residual |
    int states = 0;
};

// All families over every state within the job bound, in one enumeration.
BalanceSweep partial_balance_sweep(const SystemSpec& spec, int max_jobs,
                                   const ActivationTable* table = nullptr,
                                   const OIRate* rate = nullptr);

}  // namespace oiq
