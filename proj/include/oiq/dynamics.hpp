#pragma once

#include "oiq/detailed.hpp"

namespace oiq {

enum class Ev { JobArrive, ServerArrive, Complete, JobAbandon, ServerAbandon, PairArrive };

// Transition annotations: the trigger plus the queue/pool membership effects,
// enough for partial-balance family classification and for the simulator's
// per-job bookkeeping.
struct Event {
    Ev trigger = Ev::JobArrive;
    int cls = -1;          // arriving or abandoning job class
    int server = -1;       // arriving server type / completing server or token
    int depart_cls = -1;   // class of a job leaving the queue (service entry, match, abandon)
    int depart_pos = -1;   // its position in q before the transition
    int enter_pos = -1;    // position of a freshly appended q entry
    int moved_pos = -1;    // RAIS: queue position whose job just entered service
    int srv_left = -1;     // server leaving the idle/waiting pool
    int srv_joined = -1;   // server joining the idle/waiting pool
    int busy_left = -1;    // server/token leaving the busy set
    int busy_joined = -1;  // server/token joining the busy set
};

struct Transition {
    DState to;
    double rate = 0;  // probability for discrete kinds
    Event ev;
};

// Model dynamics per kind: the generator's transition function, shared by the
// exact solver, the partial-balance checks, and the event simulator.
class Dynamics {
public:
    Dynamics(const SystemSpec& spec, const ActivationTable* table = nullptr,
             const OIRate* rate = nullptr);

    const SystemSpec& spec() const { return spec_; }
    bool discrete() const;
    DState initial() const;  // empty system (closed_token: all tokens idle)

    // truncation measure: jobs in system (dbma adds waiting servers)
    int measure(const DState& st) const;

    void transitions(const DState& st, std::vector<Transition>& out) const;

    // deterministic BFS enumeration of states with measure <= bound
    std::vector<DState> enumerate(int bound, std::size_t max_states = 2000000) const;

private:
    const SystemSpec& spec_;
    const ActivationTable* table_;
    const OIRate* rate_;
    OIRate svc_rate_;  // collaborative marginals (hook or pooled default)
};

}  // namespace oiq
