#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "oiq/model.hpp"

namespace oiq {

// Per-class job counts; the aggregate state x.
using Counts = std::vector<int>;

// Total service rate as a function of the multiset of classes present.  The
// counts signature makes permutation invariance structural; the remaining OI
// requirements are mu(single class) > 0 and monotonicity in each coordinate.
struct OIRate {
    std::function<double(const SystemSpec&, const Counts&)> mu;

    double operator()(const SystemSpec& spec, const Counts& x) const { return mu(spec, x); }

    // mu(S(x)), the pooled-server family of Eq-style collaborative rates.
    static OIRate collaborative();
    // adds sum of per-job abandonment rates on top of the pooled rate
    static OIRate collaborative_abandon();
    // sum of arrival probabilities of compatible neighbor classes (gm)
    static OIRate gm_match();
    static OIRate for_kind(const SystemSpec& spec);
};

ClassSet support_of(const Counts& x);

struct OiEval {
    double mu_total = 0;
    std::vector<double> delta;  // marginal rate of the j'th job
};

// mu(prefixes) and the marginal rates Delta_j for an ordered class sequence.
// Raises errc::oi_violation if the rate functional produces a negative
// marginal (only possible with user hooks).
OiEval oi_rate_eval(const SystemSpec& spec, const OIRate& rate, const std::vector<int>& seq);

struct OiCheck {
    bool ok = true;
    std::string what;
};

// Spot verification of the OI properties on sampled states: positivity on
// singletons and coordinatewise monotonicity.  Exhaustive checking is
// exponential and not attempted.
OiCheck verify_oi_properties(const SystemSpec& spec, const OIRate& rate, int max_total,
                             std::uint64_t seed, int samples);

}  // namespace oiq
