#pragma once

#include <map>

#include "oiq/dynamics.hpp"

namespace oiq {

struct SimRecord {
    bool state_occupancy = true;
    bool response_samples = true;
    bool queue_waits = false;           // nc kinds: time to enter service
    bool departure_gaps = false;
    bool busy_set_occupancy = false;
    bool queue_given_all_busy = false;  // nc kinds, Obs-1 style conditioning
    std::vector<int> wait_condition;    // ordered busy servers seen at arrival
    int response_cap_per_class = 100000;
    int gap_cap = 200000;
};

struct SimConfig {
    std::uint64_t seed = 1;
    double horizon = 1e6;     // measurement window per replication
    double warmup = -1;       // < 0: 10% of horizon
    int replications = 10;
    SimRecord record;
    std::size_t queue_cap = 200000;  // abort guard on state growth

    double warmup_time() const { return warmup < 0 ? 0.1 * horizon : warmup; }
};

struct StateStat {
    double mean = 0;
    double se = 0;
};

struct SimEstimate {
    std::uint64_t seed = 0;
    int replications = 0;
    int aborted = 0;
    double time_per_rep = 0;
    long long events = 0;

    std::map<std::vector<int>, StateStat> occupancy;       // canonical state key
    std::map<std::vector<int>, StateStat> queue_all_busy;  // queue content given all busy
    std::map<ServerSet, StateStat> busy_sets;
    std::vector<std::vector<double>> response;              // per class
    std::vector<std::vector<double>> queue_wait;            // per class
    std::vector<std::vector<double>> wait_conditioned;      // per class, at wait_condition
    std::vector<double> departure_gaps;
};

// canonical key used in the occupancy maps
std::vector<int> state_key(const DState& st);

SimEstimate simulate(const SystemSpec& spec, const SimConfig& cfg,
                     const ActivationTable* table = nullptr, const OIRate* rate = nullptr);

// Obs-1 debug check: drives the noncollaborative queue and the collaborative
// system with one event stream from an all-busy start and reports how long
// the job-queue paths stay identical.
struct CouplingTrace {
    bool identical = true;
    long long events_checked = 0;
    long long diverged_at = -1;
};
CouplingTrace coupled_all_busy_trace(const SystemSpec& spec, std::uint64_t seed,
                                     long long max_events);

}  // namespace oiq
