#include "oiq/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace oiq {

namespace {

bool distinct_ints(const std::vector<int>& v) {
    for (std::size_t i = 0; i < v.size(); i++)
        for (std::size_t j = i + 1; j < v.size(); j++)
            if (v[i] == v[j]) return false;
    return true;
}

}  // namespace

PartialPi pi_partial_agg(const SystemSpec& spec, const PartialState& st, PartialVariant variant,
                         const ActivationTable* table, bool normalized, double tol,
                         const OIRate* token_rate) {
    PartialPi out;
    if (st.gaps.size() != st.busy.size()) return out;
    for (int n : st.gaps)
        if (n < 0) return out;

    double w = 1;
    if (variant == PartialVariant::Collab) {
        if (!distinct_ints(st.busy)) return out;
        ServerSet touched = 0;
        for (std::size_t j = 0; j < st.busy.size(); j++) {
            int d = st.busy[j];
            if (d < 0 || d >= spec.num_classes()) return out;
            ServerSet next = touched | spec.S(d);
            if (next == touched) return out;  // job d could not be in service
            touched = next;
            double mu = spec.mu_of(touched);
            double alpha = spec.lambda_of(spec.R_of(touched)) / mu;
            w *= spec.lambda(d) / mu * std::pow(alpha, st.gaps[j]);
        }
        out.valid = true;
        out.value = w;
        if (normalized) {
            NormConstant G = normalizing_constant(spec, tol);
            out.value = w / G.G;
        }
        return out;
    }

    // server forms
    if (!distinct_ints(st.busy)) return out;
    for (int b : st.busy)
        if (b < 0 || b >= spec.num_servers()) return out;
    ServerSet B = 0;
    if (variant == PartialVariant::Rais && !table)
        throw Error(errc::input, "rais aggregation needs an activation table");
    for (std::size_t j = 0; j < st.busy.size(); j++) {
        int b = st.busy[j];
        double act = 1;
        if (variant == PartialVariant::Rais) act = table->rate(B, b);
        B |= (1u << b);
        double mu = busy_mu(spec, B, token_rate);
        if (!(mu > 0)) return out;
        double alpha = spec.lambda_of(spec.R_of(B)) / mu;
        if (variant == PartialVariant::Rais)
            w *= act / mu * std::pow(alpha, st.gaps[j]);
        else
            w *= 1.0 / mu * std::pow(alpha, st.gaps[j]);
    }
    if (variant == PartialVariant::Alis) {
        if (!st.idle) return out;
        if (!distinct_ints(*st.idle)) return out;
        ServerSet ip = 0;
        for (int s : *st.idle) {
            if (s < 0 || s >= spec.num_servers()) return out;
            if (B & (1u << s)) return out;
            ip |= (1u << s);
            double lam = spec.lambda_of_servers(ip);
            if (!(lam > 0)) return out;
            w /= lam;
        }
        if (static_cast<int>(st.busy.size() + st.idle->size()) != spec.num_servers()) return out;
    }
    out.valid = true;
    out.value = w;
    if (normalized) {
        // the ALIS aggregated chain carries its own constant; see Thm-8 form
        NormConstant G = variant == PartialVariant::Alis
                             ? alis_partial_normalizer(spec)
                             : normalizing_constant(spec, tol, table, token_rate);
        out.value = w / G.G;
    }
    return out;
}

MarginalCheck alis_rais_marginal_check(const SystemSpec& spec, const std::vector<int>& busy,
                                       const std::vector<int>& gaps, const ActivationTable& table,
                                       double tol) {
    MarginalCheck chk;
    if (spec.kind() != Kind::NcAlis && spec.kind() != Kind::NcRais)
        throw Error(errc::unsupported_query, "marginal check applies to the nc kinds");

    // the two laws live on different state spaces; normalize each with the
    // matching kind
    SystemSpec::Options opts;
    opts.require_nonempty_server_classes = false;
    std::vector<Edge> edges;
    for (int i = 0; i < spec.num_classes(); i++)
        for (int j : set_bits(spec.S(i))) edges.push_back({spec.cls(i).id, spec.server(j).id});
    SystemSpec alis = SystemSpec::make(Kind::NcAlis, spec.classes(), spec.servers(), edges, 0, opts);
    SystemSpec rais = SystemSpec::make(Kind::NcRais, spec.classes(), spec.servers(), edges, 0, opts);

    PartialState rst{busy, gaps, std::nullopt};
    auto rv = pi_partial_agg(rais, rst, PartialVariant::Rais, &table, true, tol);
    chk.rais_value = rv.value;

    ServerSet B = 0;
    for (int b : busy) B |= (1u << b);
    std::vector<int> idle = set_bits(spec.all_servers() & ~B);
    std::sort(idle.begin(), idle.end());
    double total = 0;
    do {
        PartialState ast{busy, gaps, idle};
        auto av = pi_partial_agg(alis, ast, PartialVariant::Alis, nullptr, true, tol);
        if (av.valid) total += av.value;
    } while (std::next_permutation(idle.begin(), idle.end()));
    if (idle.empty()) {
        PartialState ast{busy, gaps, std::vector<int>{}};
        total = pi_partial_agg(alis, ast, PartialVariant::Alis, nullptr, true, tol).value;
    }
    chk.alis_sum = total;
    chk.gap = std::fabs(total - rv.value) / std::max({total, rv.value, 1e-300});
    chk.ok = chk.gap <= tol;
    return chk;
}

ResponseDist cond_queue_time(const SystemSpec& spec, int cls, const std::vector<int>& cond,
                             bool cond_is_classes) {
    if (cls < 0 || cls >= spec.num_classes()) throw Error(errc::input, "unknown class");
    if (!distinct_ints(cond)) throw Error(errc::input, "conditioning vector repeats an entry");
    int l = static_cast<int>(cond.size());

    // prefix aggregates: mu(prefix_j) and R(prefix_j)
    std::vector<double> mu(l), lamR(l);
    std::vector<bool> compat(l, false);
    if (cond_is_classes) {
        ServerSet touched = 0;
        for (int j = 0; j < l; j++) {
            int d = cond[j];
            if (d < 0 || d >= spec.num_classes()) throw Error(errc::input, "unknown class in d");
            ServerSet next = touched | spec.S(d);
            if (next == touched) throw Error(errc::input, "in-service list is not feasible");
            touched = next;
            mu[j] = spec.mu_of(touched);
            lamR[j] = spec.lambda_of(spec.R_of(touched));
            compat[j] = (spec.S(d) & spec.S(cls)) != 0;
        }
        if ((spec.S(cls) & ~touched) != 0) return ResponseDist::zero();
    } else {
        ServerSet B = 0;
        for (int j = 0; j < l; j++) {
            int b = cond[j];
            if (b < 0 || b >= spec.num_servers()) throw Error(errc::input, "unknown server in b");
            B |= (1u << b);
            mu[j] = spec.mu_of(B);
            lamR[j] = spec.lambda_of(spec.R_of(B));
            compat[j] = (spec.S(cls) & (1u << b)) != 0;
        }
        if ((spec.S(cls) & ~B) != 0) return ResponseDist::zero();  // i not in R(b_l)
    }
    int f = -1;
    for (int j = 0; j < l; j++)
        if (compat[j]) f = j;
    if (f < 0) return ResponseDist::zero();
    ResponseDist d = ResponseDist::zero();
    for (int j = f; j < l; j++) {
        double rate = mu[j] - lamR[j];
        if (!(rate > 0))
            throw Error(errc::instability, "conditional stage rate not positive; system unstable");
        d.then(ResponseDist::exponential(rate));
    }
    return d;
}

AggregatePi pi_aggregate(const SystemSpec& spec, const PhiTable& table, const Counts& x,
                         bool normalized, double tol) {
    AggregatePi out;
    double w = table.phi(x);
    for (int i = 0; i < spec.num_classes(); i++)
        for (int k = 0; k < x[i]; k++) w *= spec.lambda(i);
    out.value = w;
    if (normalized) {
        NormConstant G = normalizing_constant(spec, tol);
        out.value = w / G.G;
        out.tail_bound = G.tail_bound / G.G;
    }
    return out;
}

namespace {

template <typename T>
struct NumOps;

template <>
struct NumOps<double> {
    static double of(const Rate& r) { return r.value; }
    static bool positive(double v) { return v > 0; }
    static double dbl(double v) { return v; }
};

template <>
struct NumOps<Rat> {
    static Rat of(const Rate& r) { return r.q; }
    static bool positive(const Rat& v) { return v > 0; }
    static double dbl(const Rat& v) { return to_double(v); }
};

template <typename T>
class RemovalRecursion {
public:
    explicit RemovalRecursion(const SystemSpec& spec) : spec_(spec) {}

    T pi_empty(ServerSet mask) {
        auto it = pi_.find(mask);
        if (it != pi_.end()) return it->second;
        ClassSet alive = alive_classes(mask);
        T val;
        if (alive == 0) {
            val = T(1);
        } else {
            T lam = T(0), mu = T(0);
            for (int i : set_bits(alive)) lam += NumOps<T>::of(spec_.cls(i).lambda);
            for (int k : set_bits(mask)) mu += NumOps<T>::of(spec_.server(k).mu);
            if (!NumOps<T>::positive(mu - lam))
                throw Error(errc::instability, "reduced system unstable in the removal recursion");
            T denom = T(0);
            for (int k : set_bits(mask))
                denom += NumOps<T>::of(spec_.server(k).mu) / pi_empty(mask & ~(1u << k));
            val = (mu - lam) / denom;
        }
        pi_.emplace(mask, val);
        return val;
    }

    T mean_count(ServerSet mask, int cls) {
        auto key = std::make_pair(mask, cls);
        auto it = li_.find(key);
        if (it != li_.end()) return it->second;
        ClassSet alive = alive_classes(mask);
        if (!(alive & (1u << cls))) throw Error(errc::input, "class not alive in reduction");
        T lam = T(0), mu = T(0);
        for (int i : set_bits(alive)) lam += NumOps<T>::of(spec_.cls(i).lambda);
        for (int k : set_bits(mask)) mu += NumOps<T>::of(spec_.server(k).mu);
        T drift = mu - lam;
        if (!NumOps<T>::positive(drift))
            throw Error(errc::instability, "reduced system unstable in the removal recursion");
        T pi_here = pi_empty(mask);
        T acc = NumOps<T>::of(spec_.cls(cls).lambda);
        for (int k : set_bits(mask)) {
            if (spec_.S(cls) & (1u << k)) continue;  // only servers outside S_i
            T psi = pi_here / pi_empty(mask & ~(1u << k));
            acc += NumOps<T>::of(spec_.server(k).mu) * psi * mean_count(mask & ~(1u << k), cls);
        }
        T val = acc / drift;
        li_.emplace(key, val);
        return val;
    }

private:
    ClassSet alive_classes(ServerSet mask) const {
        ClassSet a = 0;
        for (int i = 0; i < spec_.num_classes(); i++)
            if ((spec_.S(i) & ~mask) == 0) a |= (1u << i);
        return a;
    }

    struct PairHash {
        std::size_t operator()(const std::pair<ServerSet, int>& p) const {
            return std::hash<std::uint64_t>()((std::uint64_t(p.first) << 8) ^ std::uint64_t(p.second));
        }
    };
    const SystemSpec& spec_;
    std::unordered_map<ServerSet, T> pi_;
    std::unordered_map<std::pair<ServerSet, int>, T, PairHash> li_;
};

void require_collaborative_like(const SystemSpec& spec) {
    if (spec.kind() != Kind::Collaborative)
        throw Error(errc::unsupported_query,
                    "removal recursions apply to the collaborative kind");
    if (spec.has_abandonments())
        throw Error(errc::unsupported_query, "removal recursions assume no abandonments");
}

}  // namespace

EmptyProb pi_empty_recursive(const SystemSpec& spec) {
    require_collaborative_like(spec);
    auto verdict = check_stability(spec);
    if (!verdict.stable) throw Error(errc::instability, "system unstable");
    EmptyProb out;
    ServerSet full = spec.all_servers();
    {
        RemovalRecursion<double> rec(spec);
        out.value = rec.pi_empty(full);
        for (int k = 0; k < spec.num_servers(); k++)
            out.psi.push_back(out.value / rec.pi_empty(full & ~(1u << k)));
    }
    if (spec.rates_exact()) {
        RemovalRecursion<Rat> rec(spec);
        out.exact = true;
        out.value_exact = rec.pi_empty(full);
        for (int k = 0; k < spec.num_servers(); k++)
            out.psi_exact.push_back(out.value_exact / rec.pi_empty(full & ~(1u << k)));
        out.value = to_double(out.value_exact);
        for (int k = 0; k < spec.num_servers(); k++) out.psi[k] = to_double(out.psi_exact[k]);
    }
    return out;
}

MeanCountsResult mean_counts(const SystemSpec& spec) {
    require_collaborative_like(spec);
    auto verdict = check_stability(spec);
    if (!verdict.stable) throw Error(errc::instability, "system unstable");
    MeanCountsResult out;
    ServerSet full = spec.all_servers();
    {
        RemovalRecursion<double> rec(spec);
        for (int i = 0; i < spec.num_classes(); i++) {
            out.Li.push_back(rec.mean_count(full, i));
            out.L += out.Li.back();
        }
    }
    if (spec.rates_exact()) {
        RemovalRecursion<Rat> rec(spec);
        out.exact = true;
        out.L_exact = 0;
        for (int i = 0; i < spec.num_classes(); i++) {
            out.Li_exact.push_back(rec.mean_count(full, i));
            out.L_exact += out.Li_exact.back();
        }
        out.L = to_double(out.L_exact);
        for (int i = 0; i < spec.num_classes(); i++) out.Li[i] = to_double(out.Li_exact[i]);
    }
    return out;
}

}  // namespace oiq
