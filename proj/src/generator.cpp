#include "oiq/generator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>
#include <unordered_map>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

namespace oiq {

namespace {

int thread_count() {
    if (const char* env = std::getenv("OIQ_THREADS")) {
        int n = std::atoi(env);
        if (n > 0) return n;
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

struct Csr {
    // column-compressed transposed generator: in-edges per state
    std::vector<std::size_t> row_start;
    std::vector<int> col;
    std::vector<double> val;
    std::vector<double> out_rate;
};

}  // namespace

double GeneratorResult::pi_of(const DState& st) const {
    for (std::size_t i = 0; i < states.size(); i++)
        if (states[i] == st) return pi[i];
    throw Error(errc::input, "state not inside the truncated space");
}

GeneratorResult generator_solve(const SystemSpec& spec, int max_jobs,
                                const ActivationTable* table, const OIRate* rate,
                                std::size_t max_states, std::size_t direct_limit) {
    Dynamics dyn(spec, table, rate);
    GeneratorResult res;
    res.truncation = max_jobs;
    res.states = dyn.enumerate(max_jobs, max_states);
    const std::size_t n = res.states.size();

    std::unordered_map<DState, int, DStateHash> index;
    index.reserve(n * 2);
    for (std::size_t i = 0; i < n; i++) index.emplace(res.states[i], static_cast<int>(i));

    // gather transitions; boundary arrivals that leave the space are dropped
    // (loss redirection keeps the product form on the region)
    struct Trip {
        int to, from;
        double rate;
    };
    std::vector<Trip> trips;
    std::vector<double> out_rate(n, 0.0);
    const bool discrete = dyn.discrete();
    {
        std::vector<Transition> ts;
        for (std::size_t i = 0; i < n; i++) {
            dyn.transitions(res.states[i], ts);
            for (const auto& t : ts) {
                auto it = index.find(t.to);
                if (it == index.end()) continue;  // rejected at the truncation boundary
                if (static_cast<std::size_t>(it->second) == i) continue;
                trips.push_back({it->second, static_cast<int>(i), t.rate});
                out_rate[i] += t.rate;
            }
        }
    }
    Csr csr;
    csr.row_start.assign(n + 1, 0);
    for (const auto& t : trips) csr.row_start[t.to + 1]++;
    for (std::size_t i = 0; i < n; i++) csr.row_start[i + 1] += csr.row_start[i];
    csr.col.resize(trips.size());
    csr.val.resize(trips.size());
    {
        std::vector<std::size_t> fill(csr.row_start.begin(), csr.row_start.end() - 1);
        for (const auto& t : trips) {
            std::size_t k = fill[t.to]++;
            csr.col[k] = t.from;
            csr.val[k] = t.rate;
        }
    }
    std::vector<Trip>().swap(trips);
    csr.out_rate = std::move(out_rate);

    res.pi.assign(n, 0.0);
    if (n == 1) {
        res.pi[0] = 1.0;
        return res;
    }

    if (n <= direct_limit) {
        // pi Q = 0 with one equation replaced by the normalization
        Eigen::SparseMatrix<double> A(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(csr.val.size() + 2 * n);
        for (std::size_t i = 1; i < n; i++) {
            for (std::size_t k = csr.row_start[i]; k < csr.row_start[i + 1]; k++)
                trip.emplace_back(static_cast<int>(i), csr.col[k], csr.val[k]);
            trip.emplace_back(static_cast<int>(i), static_cast<int>(i), -csr.out_rate[i]);
        }
        for (std::size_t j = 0; j < n; j++) trip.emplace_back(0, static_cast<int>(j), 1.0);
        A.setFromTriplets(trip.begin(), trip.end());
        A.makeCompressed();
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        lu.analyzePattern(A);
        lu.factorize(A);
        if (lu.info() != Eigen::Success)
            throw Error(errc::construction_failure, "generator factorization failed");
        Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
        b[0] = 1.0;
        Eigen::VectorXd x = lu.solve(b);
        for (std::size_t i = 0; i < n; i++) res.pi[i] = x[static_cast<Eigen::Index>(i)];
    } else {
        // uniformized power sweeps, stopping on componentwise relative change
        double lam = 0;
        for (std::size_t i = 0; i < n; i++) lam = std::max(lam, csr.out_rate[i]);
        lam *= 1.02;
        std::vector<double> cur(n, 1.0 / static_cast<double>(n)), next(n, 0.0);
        int threads = thread_count();
        int iters = 0;
        const int max_iters = 200000;
        double change = 1;
        while (iters < max_iters) {
            iters++;
            auto sweep = [&](std::size_t lo, std::size_t hi, double* chg) {
                double local = 0;
                for (std::size_t i = lo; i < hi; i++) {
                    double acc = 0;
                    for (std::size_t k = csr.row_start[i]; k < csr.row_start[i + 1]; k++)
                        acc += csr.val[k] * cur[csr.col[k]];
                    double v;
                    if (discrete)
                        v = acc + cur[i] * (1.0 - csr.out_rate[i]);
                    else
                        v = cur[i] + (acc - csr.out_rate[i] * cur[i]) / lam;
                    next[i] = v;
                    if (v > 0) {
                        double rel = std::fabs(v - cur[i]) / v;
                        if (rel > local) local = rel;
                    }
                }
                *chg = local;
            };
            std::vector<std::thread> pool;
            std::vector<double> chg(threads, 0.0);
            std::size_t chunk = (n + threads - 1) / threads;
            for (int t = 0; t < threads; t++) {
                std::size_t lo = t * chunk, hi = std::min(n, lo + chunk);
                if (lo >= hi) { chg[t] = 0; continue; }
                pool.emplace_back(sweep, lo, hi, &chg[t]);
            }
            for (auto& th : pool) th.join();
            change = 0;
            for (double c : chg) change = std::max(change, c);
            cur.swap(next);
            if (change < 1e-14 && iters > 10) break;
        }
        res.solver_iterations = iters;
        res.pi = std::move(cur);
    }

    double total = 0;
    for (double v : res.pi) total += v;
    for (double& v : res.pi) v /= total;

    // residual || pi Q ||_inf
    double r = 0;
    for (std::size_t i = 0; i < n; i++) {
        double acc = -csr.out_rate[i] * res.pi[i];
        for (std::size_t k = csr.row_start[i]; k < csr.row_start[i + 1]; k++)
            acc += csr.val[k] * res.pi[csr.col[k]];
        r = std::max(r, std::fabs(acc));
    }
    res.residual = r;
    return res;
}

}  // namespace oiq
