#pragma once

#include <string>
#include <vector>

#include "oiq/model.hpp"

namespace oiq {

// Activation rates lambda^a_s(B) for the RAIS policies, together with the
// per-(B, class) routing distributions that realize them.  Tables are
// immutable once built and safe to share.
class ActivationTable {
public:
    ActivationTable() = default;
    ActivationTable(int num_servers, std::vector<std::vector<double>> act,
                    std::vector<std::vector<std::vector<double>>> routing);

    int num_servers() const { return m_; }
    bool valid_set(ServerSet B) const { return B < act_.size(); }

    // rate at which idle server s becomes busy when the busy set is B
    double rate(ServerSet B, int s) const { return act_[B][s]; }
    // routing probability p_{c -> s}(B); zero off the idle compatible support
    double routing(ServerSet B, int c, int s) const { return p_[B][c][s]; }
    bool has_routing() const { return !p_.empty(); }

    // product of activation rates along one ordering of B; permutation
    // invariant when the assignment condition holds
    double product(const std::vector<int>& busy_order) const;
    // the set function the table was built from (any ordering)
    double product(ServerSet B) const;

private:
    int m_ = 0;
    std::vector<std::vector<double>> act_;          // [B][s]
    std::vector<std::vector<std::vector<double>>> p_;  // [B][c][s]
};

// Builds the canonical table: the set-function targets are the idle-order
// aggregates of the ALIS model, the unique choice under which the ALIS and
// RAIS partially aggregated laws coincide.  Routing probabilities are the
// ALIS first-compatible probabilities under the conditional idle-order law,
// which solve the class-supply / server-demand transportation exactly.
ActivationTable build_activation(const SystemSpec& spec);

struct AssignmentVerdict {
    bool ok = true;
    double max_deviation = 0;      // relative
    ServerSet witness_set = 0;
    std::vector<int> witness_order_a, witness_order_b;
};

// Permutation invariance of the rate products over every reachable busy set,
// via the pairwise (Kolmogorov cycle) identities that generate all
// permutations, plus full-ordering cross checks on small sets.
AssignmentVerdict verify_assignment_condition(const SystemSpec& spec,
                                              const ActivationTable& table, double tol);

std::string activation_to_json(const SystemSpec& spec, const ActivationTable& table);
ActivationTable activation_from_json(const SystemSpec& spec, const std::string& text);

}  // namespace oiq
