#include "oiq/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

namespace oiq {

ActivationTable::ActivationTable(int num_servers, std::vector<std::vector<double>> act,
                                 std::vector<std::vector<std::vector<double>>> routing)
    : m_(num_servers), act_(std::move(act)), p_(std::move(routing)) {}

double ActivationTable::product(const std::vector<int>& busy_order) const {
    double prod = 1;
    ServerSet B = 0;
    for (int s : busy_order) {
        prod *= rate(B, s);
        B |= (1u << s);
    }
    return prod;
}

double ActivationTable::product(ServerSet B) const {
    double prod = 1;
    ServerSet built = 0;
    for (int s : set_bits(B)) {
        prod *= rate(built, s);
        built |= (1u << s);
    }
    return prod;
}

namespace {

void require_rais_kind(const SystemSpec& spec) {
    if (spec.kind() != Kind::NcRais && spec.kind() != Kind::TokenRais)
        throw Error(errc::unsupported_query,
                    "activation tables apply to nc_rais/token_rais, not " + kind_name(spec.kind()));
}

}  // namespace

ActivationTable build_activation(const SystemSpec& spec) {
    require_rais_kind(spec);
    int M = spec.num_servers();
    if (M > 16) throw Error(errc::input, "activation construction capped at 16 servers");
    int J = spec.num_classes();
    std::size_t n_sets = std::size_t(1) << M;

    // W(I) = sum over idle orderings of prod_j 1/lambda(C(prefix_j)).
    std::vector<double> w(n_sets, 0.0);
    w[0] = 1.0;
    for (ServerSet I = 1; I < n_sets; I++) {
        double lam = spec.lambda_of_servers(I);
        if (!(lam > 0)) {
            // servers no class can reach never activate and never go idle
            w[I] = 0;
            continue;
        }
        double acc = 0;
        for (int s : set_bits(I)) acc += w[I & ~(1u << s)];
        w[I] = acc / lam;
    }

    std::vector<std::vector<double>> act(n_sets, std::vector<double>(M, 0.0));
    std::vector<std::vector<std::vector<double>>> routing(
        n_sets, std::vector<std::vector<double>>(J, std::vector<double>(M, 0.0)));

    ServerSet full = spec.all_servers();
    std::vector<double> tail((std::size_t(1) << M), 0.0);

    for (ServerSet B = 0; B < n_sets; B++) {
        ServerSet I = full & ~B;
        if (I == 0) continue;
        if (!(w[I] > 0)) {
            std::ostringstream os;
            os << "activation construction failed at busy set " << B
               << " (idle set unreachable by arrivals)";
            throw Error(errc::construction_failure, os.str());
        }
        for (int s : set_bits(I)) act[B][s] = w[I & ~(1u << s)] / w[I];

        // tail(Q) = sum over orderings of I \ Q of prod 1/lambda(C(Q u prefix)),
        // computed from the largest Q down.
        std::vector<int> idle = set_bits(I);
        tail[I] = 1.0;
        // iterate subsets Q of I by decreasing popcount: enumerate all subsets and sort
        std::vector<ServerSet> subs;
        for (ServerSet Q = I;; Q = (Q - 1) & I) {
            subs.push_back(Q);
            if (Q == 0) break;
        }
        std::sort(subs.begin(), subs.end(),
                  [](ServerSet a, ServerSet b) { return popcount(a) > popcount(b); });
        for (ServerSet Q : subs) {
            if (Q == I) continue;
            double acc = 0;
            for (int t : set_bits(I & ~Q)) {
                ServerSet Q2 = Q | (1u << t);
                acc += tail[Q2] / spec.lambda_of_servers(Q2);
            }
            tail[Q] = acc;
        }

        for (int c = 0; c < J; c++) {
            ServerSet comp = spec.S(c) & I;
            if (comp == 0) continue;  // class is blocked, no routing needed
            ServerSet incompat = I & ~spec.S(c);
            double total = 0;
            for (int s : set_bits(comp)) {
                double q = 0;
                for (ServerSet P = incompat;; P = (P - 1) & incompat) {
                    ServerSet Ps = P | (1u << s);
                    q += w[P] * tail[Ps] / spec.lambda_of_servers(Ps);
                    if (P == 0) break;
                }
                q /= w[I];
                routing[B][c][s] = q;
                total += q;
            }
            if (std::fabs(total - 1.0) > 1e-9) {
                std::ostringstream os;
                os << "routing probabilities for class " << spec.cls(c).id
                   << " at busy set " << B << " sum to " << total;
                throw Error(errc::construction_failure, os.str());
            }
        }

        // the routing must reproduce the activation targets
        for (int s : set_bits(I)) {
            double got = 0;
            for (int c = 0; c < J; c++) got += spec.lambda(c) * routing[B][c][s];
            if (std::fabs(got - act[B][s]) > 1e-9 * std::max(1.0, act[B][s])) {
                std::ostringstream os;
                os << "activation target missed at busy set " << B << ", server "
                   << spec.server(s).id << ": " << got << " vs " << act[B][s];
                throw Error(errc::construction_failure, os.str());
            }
        }
    }
    return ActivationTable(M, std::move(act), std::move(routing));
}

AssignmentVerdict verify_assignment_condition(const SystemSpec& spec,
                                              const ActivationTable& table, double tol) {
    AssignmentVerdict v;
    int M = table.num_servers();
    ServerSet activatable = 0;
    for (int s = 0; s < M; s++)
        if (spec.C(1u << s) != 0) activatable |= (1u << s);

    auto record = [&](double dev, ServerSet B, int u, int vsrv) {
        if (dev > v.max_deviation) {
            v.max_deviation = dev;
            v.witness_set = B | (1u << u) | (1u << vsrv);
            v.witness_order_a = set_bits(B);
            v.witness_order_b = v.witness_order_a;
            v.witness_order_a.push_back(u);
            v.witness_order_a.push_back(vsrv);
            v.witness_order_b.push_back(vsrv);
            v.witness_order_b.push_back(u);
        }
    };

    std::size_t n_sets = std::size_t(1) << M;
    for (ServerSet B = 0; B < n_sets; B++) {
        if ((B & ~activatable) != 0) continue;
        auto idle = set_bits(activatable & ~B);
        for (std::size_t a = 0; a < idle.size(); a++)
            for (std::size_t b = a + 1; b < idle.size(); b++) {
                int u = idle[a], s = idle[b];
                double lhs = table.rate(B, u) * table.rate(B | (1u << u), s);
                double rhs = table.rate(B, s) * table.rate(B | (1u << s), u);
                double dev = std::fabs(lhs - rhs) / std::max({std::fabs(lhs), std::fabs(rhs), 1e-300});
                record(dev, B, u, s);
            }
    }

    // full-ordering agreement on small busy sets
    for (ServerSet B = 0; B < n_sets; B++) {
        if ((B & ~activatable) != 0 || popcount(B) > 6 || B == 0) continue;
        auto order = set_bits(B);
        std::sort(order.begin(), order.end());
        double ref = table.product(order);
        std::vector<int> perm = order;
        while (std::next_permutation(perm.begin(), perm.end())) {
            double p = table.product(perm);
            double dev = std::fabs(p - ref) / std::max({std::fabs(ref), std::fabs(p), 1e-300});
            if (dev > v.max_deviation) {
                v.max_deviation = dev;
                v.witness_set = B;
                v.witness_order_a = order;
                v.witness_order_b = perm;
            }
        }
    }

    v.ok = v.max_deviation <= tol;
    return v;
}

std::string activation_to_json(const SystemSpec& spec, const ActivationTable& table) {
    nlohmann::json out;
    out["servers"] = nlohmann::json::array();
    for (int j = 0; j < spec.num_servers(); j++) out["servers"].push_back(spec.server(j).id);
    out["construction"] = "alis-consistent";  // deterministic but not the only valid table
    nlohmann::json rates = nlohmann::json::array();
    std::size_t n_sets = std::size_t(1) << table.num_servers();
    for (ServerSet B = 0; B < n_sets; B++) {
        for (int s = 0; s < table.num_servers(); s++) {
            if (B & (1u << s)) continue;
            double r = table.rate(B, s);
            if (r == 0) continue;
            nlohmann::json rec;
            rec["busy"] = nlohmann::json::array();
            for (int b : set_bits(B)) rec["busy"].push_back(spec.server(b).id);
            rec["server"] = spec.server(s).id;
            rec["rate"] = r;
            if (table.has_routing()) {
                nlohmann::json pr = nlohmann::json::object();
                for (int c = 0; c < spec.num_classes(); c++) {
                    double p = table.routing(B, c, s);
                    if (p > 0) pr[spec.cls(c).id] = p;
                }
                rec["routing"] = pr;
            }
            rates.push_back(rec);
        }
    }
    out["rates"] = rates;
    return out.dump(2);
}

ActivationTable activation_from_json(const SystemSpec& spec, const std::string& text) {
    nlohmann::json in = nlohmann::json::parse(text);
    int M = spec.num_servers();
    int J = spec.num_classes();
    std::size_t n_sets = std::size_t(1) << M;
    std::vector<std::vector<double>> act(n_sets, std::vector<double>(M, 0.0));
    std::vector<std::vector<std::vector<double>>> routing(
        n_sets, std::vector<std::vector<double>>(J, std::vector<double>(M, 0.0)));
    for (const auto& rec : in.at("rates")) {
        ServerSet B = 0;
        for (const auto& id : rec.at("busy")) B |= (1u << spec.server_index(id.get<std::string>()));
        int s = spec.server_index(rec.at("server").get<std::string>());
        act[B][s] = rec.at("rate").get<double>();
        if (rec.contains("routing"))
            for (auto it = rec["routing"].begin(); it != rec["routing"].end(); ++it)
                routing[B][spec.class_index(it.key())][s] = it.value().get<double>();
    }
    return ActivationTable(M, std::move(act), std::move(routing));
}

}  // namespace oiq
