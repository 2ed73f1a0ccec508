#pragma once

#include <optional>

#include "oiq/detailed.hpp"
#include "oiq/dist.hpp"

namespace oiq {

// Partially aggregated state: ordered busy servers b_l (or in-service classes
// d_l for the collaborative form) with the waiting-job gap counts n_l, and
// the idle-server order for the ALIS form.
struct PartialState {
    std::vector<int> busy;                  // servers (rais/alis) or classes (collab)
    std::vector<int> gaps;                  // n_j >= 0, one per busy entry
    std::optional<std::vector<int>> idle;   // ALIS: idle servers, longest idle first
};

enum class PartialVariant { Rais, Alis, Collab };

struct PartialPi {
    double value = 0;
    bool valid = false;
};

PartialPi pi_partial_agg(const SystemSpec& spec, const PartialState& st, PartialVariant variant,
                         const ActivationTable* table = nullptr, bool normalized = false,
                         double tol = 1e-10, const OIRate* token_rate = nullptr);

struct MarginalCheck {
    bool ok = false;
    double alis_sum = 0;   // sum over idle-order permutations, normalized
    double rais_value = 0;
    double gap = 0;
};

// The ALIS law aggregated over idle-server orderings coincides with the RAIS
// law built from the canonical activation table.
MarginalCheck alis_rais_marginal_check(const SystemSpec& spec, const std::vector<int>& busy,
                                       const std::vector<int>& gaps, const ActivationTable& table,
                                       double tol = 1e-10);

// Conditional queueing time of class i given the ordered busy servers (or the
// ordered in-service classes in the collaborative form): a tandem of
// exponentials with rates mu(prefix_j) - lambda(R(prefix_j)), or the point
// mass at zero when class i can still find a free compatible server.
ResponseDist cond_queue_time(const SystemSpec& spec, int cls, const std::vector<int>& cond,
                             bool cond_is_classes);

// pi^X(x): aggregate stationary probability from the Phi table.
struct AggregatePi {
    double value = 0;
    double tail_bound = 0;
};
AggregatePi pi_aggregate(const SystemSpec& spec, const PhiTable& table, const Counts& x,
                         bool normalized = true, double tol = 1e-10);

// ---- recursions on reduced systems ---------------------------------------

struct EmptyProb {
    double value = 0;
    std::vector<double> psi;  // per-server idle probabilities
    bool exact = false;
    Rat value_exact;
    std::vector<Rat> psi_exact;
};

// pi(empty) and psi_k by server-removal recursion; exact rationals whenever
// the input rates are rational.
EmptyProb pi_empty_recursive(const SystemSpec& spec);

struct MeanCountsResult {
    double L = 0;
    std::vector<double> Li;
    bool exact = false;
    Rat L_exact;
    std::vector<Rat> Li_exact;
};

MeanCountsResult mean_counts(const SystemSpec& spec);

}  // namespace oiq
