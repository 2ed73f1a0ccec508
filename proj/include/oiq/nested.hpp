#pragma once

#include <map>

#include "oiq/aggregate.hpp"

namespace oiq {

struct EffectiveRates {
    std::vector<double> mu_hat;  // mu(S_i) - lambda(R(S_i)) + lambda_i
    std::vector<double> rho;     // lambda_i / mu_hat_i
    bool exact = false;
    std::vector<Rat> mu_hat_exact, rho_exact;
};

// Per-class effective rates in a nested system; errc::input with the
// trichotomy witness when the spec is not nested.
EffectiveRates effective_rates(const SystemSpec& spec);

enum class ResponseModel { Collab, NcAllBusy, NcGivenBusy, NcEqualRates };

// Conditioning weights for the equal-rates noncollaborative response time:
// probability the arriving job finds a compatible idle server, and otherwise
// the law of the maximal busy nested class y.
struct BusyWeights {
    double p_immediate = 0;
    std::map<int, double> by_class;  // class y -> probability
    std::string provenance = "user";
};

// Closed-form response (collab) and queueing (nc) time distributions for
// nested systems.
ResponseDist response_time(const SystemSpec& spec, int cls, ResponseModel model,
                           ServerSet busy = 0, const BusyWeights* weights = nullptr);

}  // namespace oiq
