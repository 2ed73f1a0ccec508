#include "oiq/normalize.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace oiq {

double stability_envelope(const SystemSpec& spec) {
    switch (spec.kind()) {
        case Kind::Collaborative:
        case Kind::NcAlis:
        case Kind::NcRais:
        case Kind::TokenRais:
        case Kind::Dbm:
        case Kind::DbmK: {
            if (spec.num_classes() > 20) return 0.0;
            double r = 0;
            ClassSet all = spec.all_classes();
            for (ClassSet A = 1; A <= all && all; A++)
                r = std::max(r, spec.lambda_of(A) / spec.mu_of_classes(A));
            return r;
        }
        default:
            return 0.0;
    }
}

double busy_mu(const SystemSpec& spec, ServerSet B, const OIRate* token_rate) {
    if (token_rate) {
        Counts x(spec.num_servers(), 0);
        for (int b : set_bits(B)) x[b] = 1;
        return token_rate->mu(spec, x);
    }
    return spec.mu_of(B);
}

NormConstant oi_side_mass(const SystemSpec& spec, double tol, ClassSet support,
                          const OIRate* rate, const std::function<bool(const Counts&)>& region) {
    OIRate r = rate ? *rate : OIRate::for_kind(spec);
    CountChain chain;
    chain.items = spec.num_classes();
    chain.weight.resize(chain.items);
    for (int i = 0; i < chain.items; i++) chain.weight[i] = spec.lambda(i);
    chain.rate = [&spec, r](const Counts& x) { return r(spec, x); };
    ClassSet all = spec.all_classes();
    if (support != all)
        chain.valid = [support](const Counts& x) { return (support_of(x) & ~support) == 0; };
    if (spec.kind() == Kind::Gm)
        chain.valid = [&spec, support](const Counts& x) {
            ClassSet s = support_of(x);
            return (s & ~support) == 0 && (spec.S_of(s) & s) == 0;
        };
    if (region) chain.region = region;

    MassLimits lim;
    lim.tol = tol;
    lim.envelope = stability_envelope(spec);
    MassSum sum = count_chain_mass(chain, lim);
    return {sum.total, sum.tail_bound};
}

std::vector<double> idle_order_weights(const SystemSpec& spec) {
    int M = spec.num_servers();
    std::size_t n = std::size_t(1) << M;
    std::vector<double> w(n, 0.0);
    w[0] = 1.0;
    for (ServerSet I = 1; I < n; I++) {
        double lam = spec.lambda_of_servers(I);
        if (!(lam > 0)) { w[I] = 0; continue; }
        double acc = 0;
        for (int s : set_bits(I)) acc += w[I & ~(1u << s)];
        w[I] = acc / lam;
    }
    return w;
}

std::vector<double> server_order_weights(const SystemSpec& spec) {
    int M = spec.num_servers();
    std::size_t n = std::size_t(1) << M;
    std::vector<double> w(n, 0.0);
    w[0] = 1.0;
    for (ServerSet B = 1; B < n; B++) {
        double lam = spec.lambda_of_servers(B);
        if (!(lam > 0)) { w[B] = 0; continue; }
        double acc = 0;
        for (int s : set_bits(B)) acc += spec.mu(s) * w[B & ~(1u << s)];
        w[B] = acc / lam;
    }
    return w;
}

std::vector<double> rais_busy_weights(const SystemSpec& spec, const ActivationTable& table,
                                      const OIRate* token_rate) {
    int M = spec.num_servers();
    std::size_t n = std::size_t(1) << M;
    std::vector<double> v(n, 0.0);
    v[0] = 1.0;
    for (ServerSet B = 1; B < n; B++) {
        double mu = busy_mu(spec, B, token_rate);
        if (!(mu > 0)) { v[B] = 0; continue; }
        double alpha = spec.lambda_of(spec.R_of(B)) / mu;
        if (alpha >= 1.0) {
            std::ostringstream os;
            os << "gap ratio alpha >= 1 at busy set " << B << "; system unstable";
            throw Error(errc::instability, os.str());
        }
        double acc = 0;
        for (int s : set_bits(B)) {
            ServerSet P = B & ~(1u << s);
            if (v[P] == 0) continue;
            acc += v[P] * table.rate(P, s);
        }
        v[B] = acc / (mu * (1.0 - alpha));
    }
    return v;
}

NormConstant alis_partial_normalizer(const SystemSpec& spec) {
    int M = spec.num_servers();
    std::size_t n = std::size_t(1) << M;
    // busy-ordering aggregate with the gap sums folded in, no activation rates
    std::vector<double> vb(n, 0.0);
    vb[0] = 1.0;
    for (ServerSet B = 1; B < n; B++) {
        double mu = spec.mu_of(B);
        double alpha = spec.lambda_of(spec.R_of(B)) / mu;
        if (alpha >= 1.0)
            throw Error(errc::instability, "gap ratio alpha >= 1; system unstable");
        double acc = 0;
        for (int s : set_bits(B)) acc += vb[B & ~(1u << s)];
        vb[B] = acc / (mu * (1.0 - alpha));
    }
    auto w = idle_order_weights(spec);
    ServerSet full = spec.all_servers();
    double G = 0;
    for (ServerSet B = 0; B < n; B++) G += vb[B] * w[full & ~B];
    return {G, 0.0};
}

namespace {

void require_stable(const SystemSpec& spec) {
    auto v = check_stability(spec);
    if (!v.stable) {
        std::ostringstream os;
        os << "system unstable; witness class subset {";
        bool first = true;
        for (int i : set_bits(v.witness)) {
            if (!first) os << ",";
            os << spec.cls(i).id;
            first = false;
        }
        os << "}";
        throw Error(errc::instability, os.str());
    }
}

// job-side masses restricted to each class-support mask, memoized
struct SupportMasses {
    const SystemSpec& spec;
    double tol;
    const OIRate* rate;
    std::map<ClassSet, NormConstant> memo;

    NormConstant upto(ClassSet support) {
        auto it = memo.find(support);
        if (it != memo.end()) return it->second;
        NormConstant g = oi_side_mass(spec, tol, support, rate);
        memo.emplace(support, g);
        return g;
    }
};

// server-side chain for the matching kinds: items are server types with
// weight mu_j, rate nu-sum + lambda(C(support)); states may repeat a type
NormConstant server_side_mass(const SystemSpec& spec, double tol, ServerSet support,
                              int cap_total) {
    CountChain chain;
    chain.items = spec.num_servers();
    chain.weight.resize(chain.items);
    for (int j = 0; j < chain.items; j++) chain.weight[j] = spec.mu(j);
    chain.rate = [&spec](const Counts& y) {
        double t = 0;
        for (int j = 0; j < static_cast<int>(y.size()); j++) t += y[j] * spec.nu(j);
        ServerSet sup = support_of(y);
        return t + spec.lambda_of_servers(sup);
    };
    chain.valid = [support](const Counts& y) { return (support_of(y) & ~support) == 0; };
    if (cap_total >= 0)
        chain.region = [cap_total](const Counts& y) {
            int t = 0;
            for (int v : y) t += v;
            return t <= cap_total;
        };
    MassLimits lim;
    lim.tol = tol;
    MassSum sum = count_chain_mass(chain, lim);
    return {sum.total, sum.tail_bound};
}

NormConstant norm_collaborative(const SystemSpec& spec, double tol, const OIRate* rate,
                                const std::function<bool(const Counts&)>& region) {
    if (!spec.has_abandonments() && !spec.empty()) require_stable(spec);
    return oi_side_mass(spec, tol, spec.all_classes(), rate, region);
}

NormConstant norm_alis(const SystemSpec& spec, double tol) {
    require_stable(spec);
    auto wg = server_order_weights(spec);
    SupportMasses jobs{spec, tol / (1 << spec.num_servers()), nullptr, {}};
    double G = 0, bound = 0;
    std::size_t n = std::size_t(1) << spec.num_servers();
    for (ServerSet B = 0; B < n; B++) {
        if (wg[B] == 0 && B != 0) continue;
        ClassSet allowed = 0;
        for (int i = 0; i < spec.num_classes(); i++)
            if ((spec.S(i) & B) == 0) allowed |= (1u << i);
        NormConstant g = jobs.upto(allowed);
        G += wg[B] * g.G;
        bound += wg[B] * g.tail_bound;
    }
    return {G, bound};
}

NormConstant norm_rais(const SystemSpec& spec, double tol, const ActivationTable* table,
                       const OIRate* token_rate) {
    if (!table) throw Error(errc::input, "rais normalization needs an activation table");
    if (spec.kind() == Kind::NcRais) require_stable(spec);
    (void)tol;  // the gap sums are closed-form; no truncation error
    auto v = rais_busy_weights(spec, *table, token_rate);
    double G = 0;
    for (double x : v) G += x;
    return {G, 0.0};
}

NormConstant norm_closed_token(const SystemSpec& spec, const OIRate* token_rate) {
    int M = spec.num_servers();
    std::size_t n = std::size_t(1) << M;
    std::vector<double> vb(n, 0.0);
    vb[0] = 1.0;
    for (ServerSet B = 1; B < n; B++) {
        double mu = busy_mu(spec, B, token_rate);
        if (!(mu > 0)) { vb[B] = 0; continue; }
        double acc = 0;
        for (int s : set_bits(B)) acc += vb[B & ~(1u << s)];
        vb[B] = acc / mu;
    }
    auto wi = idle_order_weights(spec);
    ServerSet full = spec.all_servers();
    double G = 0;
    for (ServerSet B = 0; B < n; B++) {
        double wid = wi[full & ~B];
        if (vb[B] == 0 || wid == 0) {
            if (B == 0 && wid != 0) G += wid;
            continue;
        }
        G += vb[B] * wid;
    }
    return {G, 0.0};
}

NormConstant norm_dbmk(const SystemSpec& spec, double tol) {
    require_stable(spec);
    int K = spec.kind() == Kind::Dbm ? 0 : spec.buffer_k();
    int M = spec.num_servers();
    SupportMasses jobs{spec, tol, nullptr, {}};
    double G = 0, bound = 0;
    // DFS over waiting-server lists (types may repeat, length <= K)
    std::vector<int> list;
    std::size_t visited = 0;
    std::function<void(double, ServerSet)> walk = [&](double w, ServerSet present) {
        if (++visited > 4u * 1000 * 1000)
            throw Error(errc::state_space_overflow, "server buffer enumeration too large");
        ClassSet allowed = 0;
        for (int i = 0; i < spec.num_classes(); i++)
            if ((spec.S(i) & present) == 0) allowed |= (1u << i);
        NormConstant g = jobs.upto(allowed);
        G += w * g.G;
        bound += w * g.tail_bound;
        if (static_cast<int>(list.size()) == K) return;
        for (int j = 0; j < M; j++) {
            ServerSet p2 = present | (1u << j);
            double lam = spec.lambda_of_servers(p2);
            if (!(lam > 0)) continue;
            list.push_back(j);
            walk(w * spec.mu(j) / lam, p2);
            list.pop_back();
        }
    };
    walk(1.0, 0);
    return {G, bound};
}

NormConstant norm_dbma(const SystemSpec& spec, double tol) {
    for (int i = 0; i < spec.num_classes(); i++)
        if (!spec.cls(i).gamma)
            throw Error(errc::input, "dbma requires abandonment rates on every class");
    for (int j = 0; j < spec.num_servers(); j++)
        if (!spec.server(j).nu)
            throw Error(errc::input, "dbma requires abandonment rates on every server");
    int J = spec.num_classes(), M = spec.num_servers();
    if (J + M > 16) throw Error(errc::input, "dbma normalization capped at 16 entities");
    double tol2 = tol / ((1 << J) + (1 << M));
    // restricted-support masses on both sides
    std::vector<NormConstant> jmass(std::size_t(1) << J), smass(std::size_t(1) << M);
    for (ClassSet A = 0; A < (1u << J); A++) jmass[A] = oi_side_mass(spec, tol2, A);
    for (ServerSet B = 0; B < (1u << M); B++) smass[B] = server_side_mass(spec, tol2, B, -1);
    // inclusion-exclusion to exact supports
    auto exact_of = [](std::vector<NormConstant>& m, int bits) {
        std::vector<double> e(m.size()), eb(m.size());
        for (std::uint32_t S = 0; S < m.size(); S++) {
            double v = 0, b = 0;
            for (std::uint32_t T = S;; T = (T - 1) & S) {
                double sign = (popcount(S ^ T) % 2 == 0) ? 1.0 : -1.0;
                v += sign * m[T].G;
                b += m[T].tail_bound;
                if (T == 0) break;
            }
            e[S] = v;
            eb[S] = b;
            (void)bits;
        }
        return std::make_pair(e, eb);
    };
    auto [je, jb] = exact_of(jmass, J);
    auto [se, sb] = exact_of(smass, M);
    double G = 0, bound = 0;
    for (ClassSet A = 0; A < (1u << J); A++) {
        ServerSet SA = spec.S_of(A);
        for (ServerSet B = 0; B < (1u << M); B++) {
            if (SA & B) continue;  // a compatible pair cannot wait on both sides
            G += je[A] * se[B];
            bound += jb[A] * se[B] + sb[B] * je[A];
        }
    }
    return {G, std::fabs(bound)};
}

NormConstant norm_gm(const SystemSpec& spec, double tol) {
    return oi_side_mass(spec, tol, spec.all_classes());
}

NormConstant norm_pbm(const SystemSpec& spec, double tol) {
    require_stable(spec);
    int J = spec.num_classes(), M = spec.num_servers();
    if (J + M > 14) throw Error(errc::input, "pbm normalization capped at 14 entities");
    double lam = spec.total_lambda(), mu = spec.total_mu();

    // per-level masses with support restricted, both sides in normalized units
    int levels = 64;
    for (;; levels *= 2) {
        if (levels > 4096)
            throw Error(errc::tolerance, "pbm normalization did not converge");
        auto side = [&](bool job_side, std::uint32_t support) {
            CountChain chain;
            chain.items = job_side ? J : M;
            chain.weight.resize(chain.items);
            for (int i = 0; i < chain.items; i++)
                chain.weight[i] = job_side ? spec.lambda(i) / lam : spec.mu(i) / mu;
            if (job_side)
                chain.rate = [&spec, mu](const Counts& x) {
                    return spec.mu_of(spec.S_of(support_of(x))) / mu;
                };
            else
                chain.rate = [&spec, lam](const Counts& y) {
                    return spec.lambda_of_servers(support_of(y)) / lam;
                };
            chain.valid = [support](const Counts& x) { return (support_of(x) & ~support) == 0; };
            return count_chain_mass_upto(chain, levels);
        };
        std::vector<std::vector<double>> jlev(std::size_t(1) << J), slev(std::size_t(1) << M);
        for (ClassSet A = 0; A < (1u << J); A++) jlev[A] = side(true, A).level_mass;
        for (ServerSet B = 0; B < (1u << M); B++) slev[B] = side(false, B).level_mass;
        auto exact_levels = [&](std::vector<std::vector<double>>& m) {
            std::vector<std::vector<double>> e(m.size());
            for (std::uint32_t S = 0; S < m.size(); S++) {
                e[S].assign(levels + 1, 0.0);
                for (std::uint32_t T = S;; T = (T - 1) & S) {
                    double sign = (popcount(S ^ T) % 2 == 0) ? 1.0 : -1.0;
                    for (int n = 0; n <= levels && n < static_cast<int>(m[T].size()); n++)
                        e[S][n] += sign * m[T][n];
                    if (T == 0) break;
                }
            }
            return e;
        };
        auto je = exact_levels(jlev);
        auto se = exact_levels(slev);
        std::vector<double> combined(levels + 1, 0.0);
        for (ClassSet A = 0; A < (1u << J); A++) {
            ServerSet SA = spec.S_of(A);
            for (ServerSet B = 0; B < (1u << M); B++) {
                if (SA & B) continue;
                for (int n = 0; n <= levels; n++) combined[n] += je[A][n] * se[B][n];
            }
        }
        double G = 0;
        for (double c : combined) G += c;
        double q = 0;
        for (int n = levels - 3; n < levels; n++)
            if (combined[n] > 0) q = std::max(q, combined[n + 1] / combined[n]);
        if (combined[levels] <= 0) return {G, 0.0};
        if (q < 1.0) {
            double bound = combined[levels] * q / (1.0 - q);
            if (bound <= tol * G) return {G, bound};
        }
    }
}

}  // namespace

NormConstant normalizing_constant(const SystemSpec& spec, double tol,
                                  const ActivationTable* table, const OIRate* token_rate,
                                  const std::function<bool(const Counts&)>& region) {
    if (spec.empty()) return {1.0, 0.0};
    switch (spec.kind()) {
        case Kind::Collaborative: return norm_collaborative(spec, tol, token_rate, region);
        case Kind::NcAlis: return norm_alis(spec, tol);
        case Kind::NcRais: return norm_rais(spec, tol, table, nullptr);
        case Kind::TokenRais: return norm_rais(spec, tol, table, token_rate);
        case Kind::ClosedToken: return norm_closed_token(spec, token_rate);
        case Kind::Dbm:
        case Kind::DbmK: return norm_dbmk(spec, tol);
        case Kind::Dbma: return norm_dbma(spec, tol);
        case Kind::Gm: return norm_gm(spec, tol);
        case Kind::Pbm: return norm_pbm(spec, tol);
    }
    throw Error(errc::input, "unhandled kind");
}

}  // namespace oiq
