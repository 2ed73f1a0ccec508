#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "oiq/model.hpp"

namespace oiq {

// Independent sum of stages, each either Exp(rate) or a zero-atom/exponential
// mixture (1-p) d0 + p Exp(rate); a top-level mixture of such sums covers the
// conditioned variants.  Closed-form moments; CDF through the phase-type
// representation of each branch.
class ResponseDist {
public:
    struct Stage {
        double rate = 0;  // exponential rate
        double p = 1.0;   // probability the stage is drawn (else zero)
    };
    struct Branch {
        double weight = 1.0;
        std::vector<Stage> stages;  // empty: point mass at zero
    };

    ResponseDist() : branches_{Branch{}} {}

    static ResponseDist zero();
    static ResponseDist exponential(double rate);
    // response and queueing time of M/M/1(lambda, mu)
    static ResponseDist mm1_response(double lambda, double mu);
    static ResponseDist mm1_wait(double lambda, double mu);
    static ResponseDist mixture(const std::vector<std::pair<double, ResponseDist>>& parts);

    // independent sum (convolution)
    ResponseDist& then(const ResponseDist& other);

    double mean() const;
    double variance() const;
    double cdf(double t) const;
    double quantile(double prob) const;
    std::vector<double> sample(std::uint64_t seed, int count) const;

    double atom_at_zero() const;
    const std::vector<Branch>& branches() const { return branches_; }

    // result provenance for conditioning weights: analytic-exact by default
    const std::string& provenance() const { return provenance_; }
    void set_provenance(std::string p) { provenance_ = std::move(p); }

private:
    std::vector<Branch> branches_;
    std::string provenance_ = "analytic-exact";
};

// Bernoulli splitting of a geometric: Y ~ geom(1-p) with type-i failures of
// probability q_i gives Y_i ~ geom(1 - q_i/(q_i + 1 - p)); returns that
// parameter.  Requires 0 <= q_i <= p < 1.
double split_geometric(double p, double q_i);

}  // namespace oiq
