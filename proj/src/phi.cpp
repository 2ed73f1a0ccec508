#include "oiq/phi.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace oiq {

namespace {

constexpr std::size_t kSat = std::size_t(1) << 62;

// C(a, b) saturated; b stays small (<= items).
std::size_t binom_sat(long long a, long long b) {
    if (b < 0 || b > a) return 0;
    b = std::min(b, a - b);
    unsigned __int128 r = 1;
    for (long long k = 1; k <= b; k++) {
        r = r * static_cast<unsigned __int128>(a - b + k);
        r /= static_cast<unsigned __int128>(k);
        if (r > kSat) return kSat;
    }
    return static_cast<std::size_t>(r);
}

// count vectors over `slots` coordinates summing to exactly `total`
std::size_t compositions(int slots, int total) {
    if (slots == 0) return total == 0 ? 1 : 0;
    return binom_sat(total + slots - 1, slots - 1);
}

// Enumerates level-n compositions in ascending lexicographic order of the
// leading J-1 coordinates; `rank` below matches this order.
template <typename Fn>
void for_each_composition(int J, int n, Counts& x, Fn&& fn) {
    std::fill(x.begin(), x.end(), 0);
    if (J == 1) {
        x[0] = n;
        fn(x);
        return;
    }
    x[J - 1] = n;
    while (true) {
        fn(x);
        if (x[J - 1] > 0) {
            x[J - 2]++;
            x[J - 1]--;
            continue;
        }
        int j = J - 2;
        while (j >= 0 && x[j] == 0) j--;
        if (j <= 0) break;
        int v = x[j];
        x[j] = 0;
        x[j - 1]++;
        x[J - 1] = v - 1;
    }
}

struct LevelRanker {
    int J;
    std::vector<std::size_t> comp;  // comp[s * (n + 1) + t] = compositions(s, t)
    int n = -1;

    explicit LevelRanker(int items) : J(items) {}

    void prepare(int total) {
        n = total;
        comp.assign(static_cast<std::size_t>(J + 1) * (n + 1), 0);
        for (int s = 0; s <= J; s++)
            for (int t = 0; t <= n; t++) comp[std::size_t(s) * (n + 1) + t] = compositions(s, t);
    }

    std::size_t rank(const Counts& x) const {
        std::size_t r = 0;
        int rem = n;
        for (int i = 0; i < J - 1; i++) {
            int slots = J - 1 - i;
            for (int v = 0; v < x[i]; v++) r += comp[std::size_t(slots) * (n + 1) + (rem - v)];
            rem -= x[i];
        }
        return r;
    }
};

MassSum run_levels(const CountChain& chain, const MassLimits& lim, int max_levels,
                   bool certify) {
    const int J = chain.items;
    MassSum out;
    out.level_mass.assign(1, 1.0);
    out.total = 1.0;
    if (J == 0 || max_levels == 0) {
        out.converged = true;
        return out;
    }

    std::vector<double> prev{1.0};  // weighted values Psi at level n-1
    LevelRanker prev_rank(J), cur_rank(J);
    prev_rank.prepare(0);
    Counts x(J, 0);

    for (int n = 1; n <= max_levels; n++) {
        std::size_t size = compositions(J, n);
        if (size > lim.max_level_states) {
            std::ostringstream os;
            os << "level " << n << " has " << size << " count vectors (cap "
               << lim.max_level_states << ")";
            throw Error(errc::state_space_overflow, os.str());
        }
        cur_rank.prepare(n);
        std::vector<double> cur(size, 0.0);
        double mass = 0;
        std::size_t idx = 0;
        for_each_composition(J, n, x, [&](Counts& v) {
            std::size_t my = idx++;
            if (chain.valid && !chain.valid(v)) return;
            if (chain.region && !chain.region(v)) return;
            double acc = 0;
            for (int i = 0; i < J; i++) {
                if (v[i] == 0) continue;
                v[i]--;
                double p = prev[prev_rank.rank(v)];
                v[i]++;
                if (p != 0) acc += chain.weight[i] * p;
            }
            if (acc == 0) return;
            double rate = chain.rate(v);
            if (!(rate > 0))
                throw Error(errc::input, "rate functional vanishes on a reachable state");
            double psi = acc / rate;
            cur[my] = psi;
            mass += psi;
        });
        out.level_mass.push_back(mass);
        out.total += mass;
        out.levels = n;
        if (mass == 0) {
            out.converged = true;
            out.tail_bound = 0;
            return out;
        }
        if (certify && n >= 2) {
            double q = lim.envelope;
            for (int back = 0; back < 3 && n - back >= 1; back++) {
                double lo = out.level_mass[n - back - 1];
                if (lo > 0) q = std::max(q, out.level_mass[n - back] / lo);
            }
            if (q < 1.0) {
                double bound = mass * q / (1.0 - q);
                if (bound <= lim.tol * out.total || mass < out.total * 1e-300) {
                    out.tail_bound = bound;
                    out.converged = true;
                    return out;
                }
            }
        }
        prev = std::move(cur);
        std::swap(prev_rank, cur_rank);
    }
    if (certify) {
        std::ostringstream os;
        os << "mass sum not converged after " << max_levels
           << " levels; last level mass " << out.level_mass.back();
        out.tail_bound = out.level_mass.back();
        throw Error(errc::tolerance, os.str());
    }
    out.converged = false;
    return out;
}

}  // namespace

MassSum count_chain_mass(const CountChain& chain, const MassLimits& lim) {
    return run_levels(chain, lim, lim.max_levels, true);
}

MassSum count_chain_mass_upto(const CountChain& chain, int frontier,
                              std::size_t max_level_states) {
    MassLimits lim;
    lim.max_level_states = max_level_states;
    return run_levels(chain, lim, frontier, false);
}

std::size_t PhiTable::CountsHash::operator()(const Counts& x) const {
    std::size_t h = 1469598103934665603ull;
    for (int v : x) {
        h ^= static_cast<std::size_t>(v) + 0x9e3779b97f4a7c15ull;
        h *= 1099511628211ull;
    }
    return h;
}

PhiTable::PhiTable(const SystemSpec& spec, OIRate rate, int frontier)
    : spec_(spec), rate_(std::move(rate)), frontier_(frontier) {
    int J = spec_.num_classes();
    Counts x(J, 0);
    table_[x] = 1.0;
    if (J == 0) return;
    for (int n = 1; n <= frontier_; n++) {
        for_each_composition(J, n, x, [&](Counts& v) {
            double acc = 0;
            for (int i = 0; i < J; i++) {
                if (v[i] == 0) continue;
                v[i]--;
                auto it = table_.find(v);
                v[i]++;
                if (it != table_.end()) acc += it->second;
            }
            if (acc == 0) return;
            table_[v] = acc / rate_(spec_, v);
        });
    }
}

double PhiTable::phi(const Counts& x) const {
    int total = 0;
    for (int v : x) total += v;
    if (total > frontier_)
        throw Error(errc::input, "count vector lies beyond the table frontier");
    auto it = table_.find(x);
    return it == table_.end() ? 0.0 : it->second;
}

bool PhiTable::contains(const Counts& x) const { return table_.count(x) > 0; }

std::vector<double> balanced_rates(const PhiTable& table, const Counts& x) {
    std::vector<double> out(x.size(), 0.0);
    double px = table.phi(x);
    if (!(px > 0)) throw Error(errc::input, "balanced rates need Phi(x) > 0");
    Counts y = x;
    for (std::size_t i = 0; i < x.size(); i++) {
        if (x[i] == 0) continue;
        y[i]--;
        out[i] = table.phi(y) / px;
        y[i]++;
    }
    return out;
}

}  // namespace oiq
