#pragma once

#include <functional>

#include "oiq/assignment.hpp"
#include "oiq/phi.hpp"

namespace oiq {

struct NormConstant {
    double G = 1;           // total unnormalized mass; pi(empty) = 1/G
    double tail_bound = 0;  // certified bound on the omitted mass
};

// Total mass of the one-sided OI job chain, optionally restricted to class
// supports inside `support` (the job side of the reduced system with the
// other classes unreachable) and to a down-closed count region.
NormConstant oi_side_mass(const SystemSpec& spec, double tol, ClassSet support,
                          const OIRate* rate = nullptr,
                          const std::function<bool(const Counts&)>& region = {});

// Kind-dispatching normalization over the full detailed state space.
// Requires stability where the kind has a stability notion; RAIS kinds need
// the activation table; token kinds may pass an OI rate over busy-token sets.
NormConstant normalizing_constant(const SystemSpec& spec, double tol = 1e-10,
                                  const ActivationTable* table = nullptr,
                                  const OIRate* token_rate = nullptr,
                                  const std::function<bool(const Counts&)>& region = {});

// Geometric envelope ratio max_A lambda(A)/mu(A) (< 1 under stability); 0
// when the kind has no subset condition.
double stability_envelope(const SystemSpec& spec);

// Subset-ordering aggregates used by several normalizers:
//   idle_order_weights[I]  = sum over orderings of I of prod_j 1/lambda(C(prefix))
//   server_order_weights[B] = sum over orderings of B of prod_j mu_{b_j}/lambda(C(prefix))
std::vector<double> idle_order_weights(const SystemSpec& spec);
std::vector<double> server_order_weights(const SystemSpec& spec);

// Busy-side ordering aggregate for RAIS: V(B) summed over orderings of B of
// prod_j lambda^a_{b_j}(prefix) / (mu(prefix_j) * (1 - alpha(prefix_j))),
// the closed-form gap sums folded in.
std::vector<double> rais_busy_weights(const SystemSpec& spec, const ActivationTable& table,
                                      const OIRate* token_rate = nullptr);

// mu over a busy server/token set: additive for nc kinds, the OI hook for
// token kinds.
double busy_mu(const SystemSpec& spec, ServerSet B, const OIRate* token_rate);

// Normalizer of the (idle order, busy order, gaps) aggregated ALIS chain.
// Its idle factors are 1/lambda(prefix) (no mu product), so it matches the
// detailed-state normalizer only when all server rates are one.
NormConstant alis_partial_normalizer(const SystemSpec& spec);

}  // namespace oiq
