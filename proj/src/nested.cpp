#include "oiq/nested.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace oiq {

EffectiveRates effective_rates(const SystemSpec& spec) {
    auto dec = nested_decompose(spec);
    if (!dec.nested) {
        std::ostringstream os;
        os << "system is not nested; classes " << spec.cls(dec.witness.first).id << " and "
           << spec.cls(dec.witness.second).id << " violate the trichotomy";
        throw Error(errc::input, os.str());
    }
    EffectiveRates out;
    for (int i = 0; i < spec.num_classes(); i++) {
        double mu_hat = dec.tree.nodes[i].mu_hat;
        out.mu_hat.push_back(mu_hat);
        out.rho.push_back(spec.lambda(i) / mu_hat);
    }
    if (spec.rates_exact()) {
        out.exact = true;
        for (int i = 0; i < spec.num_classes(); i++) {
            Rat mu = spec.mu_exact(spec.S(i));
            Rat lamR = spec.lambda_exact(spec.R_of(spec.S(i)));
            Rat mh = mu - lamR + spec.cls(i).lambda.q;
            out.mu_hat_exact.push_back(mh);
            out.rho_exact.push_back(spec.cls(i).lambda.q / mh);
        }
    }
    return out;
}

namespace {

void require_stable_nested(const SystemSpec& spec) {
    auto v = check_stability(spec);
    if (!v.stable) throw Error(errc::instability, "response times require stability");
}

// classes j with S_i strictly inside S_j, restricted to S_j inside `cap`
std::vector<int> ancestors_within(const SystemSpec& spec, int cls, ServerSet cap) {
    std::vector<int> out;
    for (int j = 0; j < spec.num_classes(); j++) {
        if (j == cls) continue;
        ServerSet sj = spec.S(j);
        if ((spec.S(cls) & ~sj) == 0 && sj != spec.S(cls) && (sj & ~cap) == 0) out.push_back(j);
    }
    // inner subsystems first, matching the tandem order
    std::sort(out.begin(), out.end(), [&spec](int a, int b) {
        return popcount(spec.S(a)) < popcount(spec.S(b));
    });
    return out;
}

ResponseDist queueing_sum(const SystemSpec& spec, const EffectiveRates& eff,
                          const std::vector<int>& classes) {
    ResponseDist d = ResponseDist::zero();
    for (int j : classes) d.then(ResponseDist::mm1_wait(spec.lambda(j), eff.mu_hat[j]));
    return d;
}

}  // namespace

ResponseDist response_time(const SystemSpec& spec, int cls, ResponseModel model, ServerSet busy,
                           const BusyWeights* weights) {
    if (cls < 0 || cls >= spec.num_classes()) throw Error(errc::input, "unknown class");
    EffectiveRates eff = effective_rates(spec);
    require_stable_nested(spec);

    switch (model) {
        case ResponseModel::Collab:
        case ResponseModel::NcAllBusy: {
            // the nc all-busy queueing law equals the collaborative response law
            ResponseDist d = ResponseDist::mm1_response(spec.lambda(cls), eff.mu_hat[cls]);
            d.then(queueing_sum(spec, eff, ancestors_within(spec, cls, spec.all_servers())));
            return d;
        }
        case ResponseModel::NcGivenBusy: {
            if ((spec.S(cls) & ~busy) != 0)
                throw Error(errc::input, "conditioning set must contain S_i");
            // maximal nested class y with S_i <= S_y <= busy
            int y = cls;
            for (int j = 0; j < spec.num_classes(); j++) {
                ServerSet sj = spec.S(j);
                if ((spec.S(cls) & ~sj) != 0 || (sj & ~busy) != 0) continue;
                if ((spec.S(y) & ~sj) == 0 && popcount(sj) >= popcount(spec.S(y))) y = j;
            }
            ResponseDist d = ResponseDist::mm1_response(spec.lambda(cls), eff.mu_hat[cls]);
            d.then(queueing_sum(spec, eff, ancestors_within(spec, cls, spec.S(y))));
            return d;
        }
        case ResponseModel::NcEqualRates: {
            double mu0 = spec.mu(0);
            for (int j = 1; j < spec.num_servers(); j++)
                if (std::fabs(spec.mu(j) - mu0) > 1e-12 * mu0)
                    throw Error(errc::unsupported_query,
                                "equal-rates response needs identical server rates");
            if (!weights)
                throw Error(errc::unsupported_query,
                            "equal-rates response needs busy-set weights (exact or simulated)");
            ResponseDist service =
                ResponseDist::exponential(spec.total_mu() / spec.num_servers());
            std::vector<std::pair<double, ResponseDist>> parts;
            parts.push_back({weights->p_immediate, ResponseDist::zero()});
            for (const auto& [y, p] : weights->by_class) {
                if (y < 0 || y >= spec.num_classes())
                    throw Error(errc::input, "busy weights name an unknown class");
                if ((spec.S(cls) & ~spec.S(y)) != 0)
                    throw Error(errc::input, "conditioning class must cover S_i");
                ResponseDist q = ResponseDist::mm1_response(spec.lambda(cls), eff.mu_hat[cls]);
                q.then(queueing_sum(spec, eff, ancestors_within(spec, cls, spec.S(y))));
                parts.push_back({p, q});
            }
            ResponseDist mix = ResponseDist::mixture(parts);
            service.then(mix);
            service.set_provenance(weights->provenance);
            return service;
        }
    }
    throw Error(errc::input, "unhandled response model");
}

}  // namespace oiq
