#include "oiq/detailed.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "oiq/dynamics.hpp"

namespace oiq {

std::size_t DStateHash::operator()(const DState& s) const {
    std::size_t h = 1469598103934665603ull;
    auto mix = [&h](std::size_t v) {
        h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    };
    for (const auto& e : s.q) mix((std::size_t(e.id) << 1) | (e.is_server ? 1 : 0));
    mix(0xfffful);
    for (int v : s.srv) mix(std::size_t(v) + 7);
    return h;
}

DState to_dstate(const JobSequence& seq) {
    DState st;
    st.q.reserve(seq.size());
    for (int c : seq) st.q.push_back(job_entry(c));
    return st;
}

DState to_dstate(const AlisState& s) {
    DState st = to_dstate(s.queue);
    st.srv = s.idle;
    return st;
}

DState to_dstate(const RaisState& s) {
    DState st;
    st.q = s.entries;
    return st;
}

DState to_dstate(const ClosedTokenState& s) {
    DState st;
    for (int b : s.busy) st.q.push_back(server_entry(b));
    st.srv = s.idle;
    return st;
}

DState to_dstate(const MatchingState& s) {
    DState st = to_dstate(s.jobs);
    st.srv = s.servers;
    return st;
}

namespace {

bool ids_ok(const SystemSpec& spec, const JobSequence& seq) {
    for (int c : seq)
        if (c < 0 || c >= spec.num_classes()) return false;
    return true;
}

bool server_ids_ok(const SystemSpec& spec, const std::vector<int>& srv) {
    for (int s : srv)
        if (s < 0 || s >= spec.num_servers()) return false;
    return true;
}

bool distinct(const std::vector<int>& v) {
    for (std::size_t i = 0; i < v.size(); i++)
        for (std::size_t j = i + 1; j < v.size(); j++)
            if (v[i] == v[j]) return false;
    return true;
}

}  // namespace

Weight weight_collaborative(const SystemSpec& spec, const JobSequence& seq,
                            const OIRate* rate) {
    Weight w;
    if (!ids_ok(spec, seq)) return w;
    OIRate r = rate ? *rate : OIRate::for_kind(spec);
    Counts x(spec.num_classes(), 0);
    double prod = 1;
    for (int c : seq) {
        x[c]++;
        double mu = r(spec, x);
        if (!(mu > 0)) return w;
        prod *= spec.lambda(c) / mu;
    }
    w.value = prod;
    w.valid = true;
    return w;
}

Weight weight_alis(const SystemSpec& spec, const AlisState& st) {
    Weight w;
    if (!ids_ok(spec, st.queue) || !server_ids_ok(spec, st.idle) || !distinct(st.idle)) return w;
    ServerSet idle = 0;
    for (int s : st.idle) idle |= (1u << s);
    ServerSet Sq = 0;
    for (int c : st.queue) Sq |= spec.S(c);
    if (Sq & idle) return w;  // an idle server compatible with a waiting job
    double prod = 1;
    ServerSet pref = 0;
    Counts x(spec.num_classes(), 0);
    for (int c : st.queue) {
        x[c]++;
        double mu = spec.mu_of(spec.S_of(support_of(x)));
        if (!(mu > 0)) return w;
        prod *= spec.lambda(c) / mu;
    }
    for (int s : st.idle) {
        pref |= (1u << s);
        double lam = spec.lambda_of_servers(pref);
        if (!(lam > 0)) return w;
        prod *= spec.mu(s) / lam;
    }
    w.value = prod;
    w.valid = true;
    return w;
}

Weight weight_rais(const SystemSpec& spec, const ActivationTable& table, const RaisState& st,
                   const OIRate* token_rate) {
    Weight w;
    ServerSet busy = 0;
    double prod = 1;
    for (const auto& z : st.entries) {
        if (z.is_server) {
            if (z.id < 0 || z.id >= spec.num_servers()) return w;
            if (busy & (1u << z.id)) return w;  // busy servers are distinct
            double act = table.rate(busy, z.id);
            busy |= (1u << z.id);
            double mu = busy_mu(spec, busy, token_rate);
            if (!(act > 0) || !(mu > 0)) return w;
            prod *= act / mu;
        } else {
            if (z.id < 0 || z.id >= spec.num_classes()) return w;
            if ((spec.S(z.id) & ~busy) != 0) return w;  // all compatible servers must be busy
            double mu = busy_mu(spec, busy, token_rate);
            if (!(mu > 0)) return w;
            prod *= spec.lambda(z.id) / mu;
        }
    }
    w.value = prod;
    w.valid = true;
    return w;
}

Weight weight_closed_token(const SystemSpec& spec, const ClosedTokenState& st,
                           const OIRate* token_rate) {
    Weight w;
    if (!server_ids_ok(spec, st.busy) || !server_ids_ok(spec, st.idle)) return w;
    std::vector<int> all = st.busy;
    all.insert(all.end(), st.idle.begin(), st.idle.end());
    if (!distinct(all) || static_cast<int>(all.size()) != spec.num_servers()) return w;
    double prod = 1;
    ServerSet pref = 0;
    for (int b : st.busy) {
        pref |= (1u << b);
        double mu = busy_mu(spec, pref, token_rate);
        if (!(mu > 0)) return w;
        prod /= mu;
    }
    pref = 0;
    for (int s : st.idle) {
        pref |= (1u << s);
        double lam = spec.lambda_of_servers(pref);
        if (!(lam > 0)) return w;
        prod /= lam;
    }
    w.value = prod;
    w.valid = true;
    return w;
}

Weight weight_matching(const SystemSpec& spec, const MatchingState& st) {
    Weight w;
    if (!ids_ok(spec, st.jobs)) return w;
    Kind k = spec.kind();
    if (k == Kind::Gm) {
        if (!st.servers.empty()) return w;
        ClassSet sup = 0;
        for (int c : st.jobs) sup |= (1u << c);
        if (spec.S_of(sup) & sup) return w;  // a compatible pair never waits
        double prod = 1;
        Counts x(spec.num_classes(), 0);
        OIRate r = OIRate::gm_match();
        for (int c : st.jobs) {
            x[c]++;
            double mu = r(spec, x);
            if (!(mu > 0)) return w;
            prod *= spec.lambda(c) / mu;
        }
        w.value = prod;
        w.valid = true;
        return w;
    }
    if (!server_ids_ok(spec, st.servers)) return w;
    ServerSet types = 0;
    for (int s : st.servers) types |= (1u << s);
    ClassSet jobsup = 0;
    for (int c : st.jobs) jobsup |= (1u << c);
    if (spec.S_of(jobsup) & types) return w;  // compatible job/server both waiting
    switch (k) {
        case Kind::Dbm:
            if (!st.servers.empty()) return w;
            break;
        case Kind::DbmK:
            if (static_cast<int>(st.servers.size()) > spec.buffer_k()) return w;
            break;
        case Kind::Pbm:
            if (st.servers.size() != st.jobs.size()) return w;
            break;
        case Kind::Dbma:
            break;
        default:
            throw Error(errc::input, "weight_matching needs a matching kind");
    }
    const bool abandon = (k == Kind::Dbma);
    double prod = 1;
    double gsum = 0;
    ServerSet Spref = 0;
    ClassSet seen = 0;
    for (int c : st.jobs) {
        seen |= (1u << c);
        Spref = spec.S_of(seen);
        gsum += abandon ? spec.gamma(c) : 0.0;
        double mu = gsum + spec.mu_of(Spref);
        if (!(mu > 0)) return w;
        prod *= spec.lambda(c) / mu;
    }
    double nsum = 0;
    ServerSet tpref = 0;
    for (int s : st.servers) {
        tpref |= (1u << s);
        nsum += abandon ? spec.nu(s) : 0.0;
        double lam = nsum + spec.lambda_of_servers(tpref);
        if (!(lam > 0)) return w;
        prod *= spec.mu(s) / lam;
    }
    w.value = prod;
    w.valid = true;
    return w;
}

Weight state_weight(const SystemSpec& spec, const DState& st, const ActivationTable* table,
                    const OIRate* rate) {
    switch (spec.kind()) {
        case Kind::Collaborative: {
            JobSequence seq;
            for (const auto& e : st.q) {
                if (e.is_server) return {};
                seq.push_back(e.id);
            }
            if (!st.srv.empty()) return {};
            return weight_collaborative(spec, seq, rate);
        }
        case Kind::NcAlis: {
            AlisState a;
            for (const auto& e : st.q) {
                if (e.is_server) return {};
                a.queue.push_back(e.id);
            }
            a.idle = st.srv;
            return weight_alis(spec, a);
        }
        case Kind::NcRais:
        case Kind::TokenRais: {
            if (!table) throw Error(errc::input, "rais weights need an activation table");
            RaisState r{st.q};
            return weight_rais(spec, *table, r, rate);
        }
        case Kind::ClosedToken: {
            ClosedTokenState c;
            for (const auto& e : st.q) {
                if (!e.is_server) return {};
                c.busy.push_back(e.id);
            }
            c.idle = st.srv;
            return weight_closed_token(spec, c, rate);
        }
        default: {
            MatchingState m;
            for (const auto& e : st.q) {
                if (e.is_server) return {};
                m.jobs.push_back(e.id);
            }
            m.servers = st.srv;
            return weight_matching(spec, m);
        }
    }
}

PiValue pi_detailed(const SystemSpec& spec, const DState& st, bool normalized, double tol,
                    const ActivationTable* table, const OIRate* rate,
                    const std::function<bool(const Counts&)>& region) {
    Weight w = state_weight(spec, st, table, rate);
    PiValue out;
    out.valid = w.valid;
    if (!w.valid) return out;
    if (region) {
        Counts x(spec.num_classes(), 0);
        for (const auto& e : st.q)
            if (!e.is_server) x[e.id]++;
        if (!region(x)) return out;  // outside the acceptance region
    }
    if (!normalized) {
        out.value = w.value;
        return out;
    }
    NormConstant G = normalizing_constant(spec, tol, table, rate, region);
    out.value = w.value / G.G;
    out.tail_bound = G.tail_bound / G.G;
    return out;
}

PiValue pi_matching(const SystemSpec& spec, const MatchingState& st, bool normalized,
                    double tol) {
    switch (spec.kind()) {
        case Kind::Dbm:
        case Kind::DbmK:
        case Kind::Dbma:
        case Kind::Gm:
        case Kind::Pbm:
            break;
        default:
            throw Error(errc::unsupported_query,
                        "pi_matching applies to matching kinds, not " + kind_name(spec.kind()));
    }
    return pi_detailed(spec, to_dstate(st), normalized, tol);
}

RegionVerdict check_truncation_region(const SystemSpec& spec,
                                      const std::function<bool(const Counts&)>& region,
                                      int bound) {
    RegionVerdict v;
    int J = spec.num_classes();
    Counts x(J, 0);
    // walk all count vectors with total <= bound
    std::function<bool(int, int)> walk = [&](int i, int left) -> bool {
        if (i == J) {
            if (!region(x)) return true;
            for (int k = 0; k < J; k++) {
                if (x[k] == 0) continue;
                x[k]--;
                bool inside = region(x);
                x[k]++;
                if (!inside) {
                    v.ok = false;
                    v.witness = x;
                    return false;
                }
            }
            return true;
        }
        for (int n = 0; n <= left; n++) {
            x[i] = n;
            if (!walk(i + 1, left - n)) return false;
        }
        x[i] = 0;
        return true;
    };
    walk(0, bound);
    return v;
}

namespace {

bool family_out(const Event& ev, BalanceFamily f) {
    if (f.which == BalanceFamily::Which::Class)
        // class-c arrivals that join the queue; arrivals that take a server
        // or match a waiting partner belong to other families
        return ev.trigger == Ev::JobArrive && ev.cls == f.id && ev.srv_left < 0 &&
               ev.busy_joined < 0 && ev.depart_cls < 0;
    return ev.srv_joined == f.id || ev.busy_joined == f.id;
}

bool family_in(const Event& ev, BalanceFamily f) {
    if (f.which == BalanceFamily::Which::Class) return ev.depart_cls == f.id;
    return ev.srv_left == f.id || ev.busy_left == f.id;
}

}  // namespace

double partial_balance_residual(const SystemSpec& spec, const DState& st, BalanceFamily family,
                                const ActivationTable* table, const OIRate* rate) {
    Dynamics dyn(spec, table, rate);
    Weight w0 = state_weight(spec, st, table, rate);
    if (!w0.valid) throw Error(errc::input, "partial balance queried on an invalid state");

    std::vector<Transition> ts;
    dyn.transitions(st, ts);
    double out = 0;
    for (const auto& t : ts)
        if (family_out(t.ev, family)) out += w0.value * t.rate;

    double in = 0;
    auto states = dyn.enumerate(dyn.measure(st) + 1);
    for (const auto& s : states) {
        dyn.transitions(s, ts);
        bool any = false;
        for (const auto& t : ts)
            if (t.to == st && family_in(t.ev, family)) any = true;
        if (!any) continue;
        Weight w = state_weight(spec, s, table, rate);
        for (const auto& t : ts)
            if (t.to == st && family_in(t.ev, family)) in += w.value * t.rate;
    }
    return out - in;
}

BalanceSweep partial_balance_sweep(const SystemSpec& spec, int max_jobs,
                                   const ActivationTable* table, const OIRate* rate) {
    Dynamics dyn(spec, table, rate);
    auto states = dyn.enumerate(max_jobs + 1);
    std::unordered_map<DState, int, DStateHash> index;
    for (int i = 0; i < static_cast<int>(states.size()); i++) index.emplace(states[i], i);

    std::vector<double> weight(states.size());
    for (std::size_t i = 0; i < states.size(); i++)
        weight[i] = state_weight(spec, states[i], table, rate).value;

    int J = spec.num_classes(), M = spec.num_servers();
    int fam_count = J + M;
    // per (state, family): out and in accumulators; global flows as the check
    std::vector<std::vector<double>> outflow(states.size(), std::vector<double>(fam_count, 0.0));
    std::vector<std::vector<double>> inflow(states.size(), std::vector<double>(fam_count, 0.0));
    std::vector<double> gout(states.size(), 0.0), gin(states.size(), 0.0);

    std::vector<Transition> ts;
    for (std::size_t i = 0; i < states.size(); i++) {
        dyn.transitions(states[i], ts);
        for (const auto& t : ts) {
            auto it = index.find(t.to);
            // transitions that leave the enumerated region only matter for
            // states at the boundary, which the sweep excludes below
            double flow = weight[i] * t.rate;
            for (int c = 0; c < J; c++) {
                if (family_out(t.ev, BalanceFamily::cls(c))) outflow[i][c] += flow;
                if (it != index.end() && family_in(t.ev, BalanceFamily::cls(c)))
                    inflow[it->second][c] += flow;
            }
            for (int s = 0; s < M; s++) {
                if (family_out(t.ev, BalanceFamily::server(s))) outflow[i][J + s] += flow;
                if (it != index.end() && family_in(t.ev, BalanceFamily::server(s)))
                    inflow[it->second][J + s] += flow;
            }
            gout[i] += flow;
            if (it != index.end()) gin[it->second] += flow;
        }
    }

    BalanceSweep sweep;
    for (std::size_t i = 0; i < states.size(); i++) {
        if (dyn.measure(states[i]) > max_jobs) continue;  // boundary states lack in-flows
        for (int f = 0; f < fam_count; f++) {
            double r = outflow[i][f] - inflow[i][f];
            sweep.max_residual = std::max(sweep.max_residual, std::fabs(r));
        }
        // global balance must close as well; the family identities are its
        // decomposition
        double global = gout[i] - gin[i];
        sweep.max_global_gap = std::max(sweep.max_global_gap, std::fabs(global));
        sweep.states++;
    }
    return sweep;
}

}  // namespace oiq
