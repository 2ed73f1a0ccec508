#include "oiq/dist.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

namespace oiq {

ResponseDist ResponseDist::zero() { return ResponseDist(); }

ResponseDist ResponseDist::exponential(double rate) {
    if (!(rate > 0)) throw Error(errc::input, "exponential rate must be positive");
    ResponseDist d;
    d.branches_[0].stages.push_back({rate, 1.0});
    return d;
}

ResponseDist ResponseDist::mm1_response(double lambda, double mu) {
    if (!(lambda < mu)) throw Error(errc::instability, "mm1 response needs lambda < mu");
    return exponential(mu - lambda);
}

ResponseDist ResponseDist::mm1_wait(double lambda, double mu) {
    if (!(lambda < mu)) throw Error(errc::instability, "mm1 wait needs lambda < mu");
    ResponseDist d;
    d.branches_[0].stages.push_back({mu - lambda, lambda / mu});
    return d;
}

ResponseDist ResponseDist::mixture(const std::vector<std::pair<double, ResponseDist>>& parts) {
    if (parts.empty()) throw Error(errc::input, "mixture needs at least one part");
    ResponseDist d;
    d.branches_.clear();
    double total = 0;
    for (const auto& [w, part] : parts) {
        if (w < 0) throw Error(errc::input, "mixture weights must be nonnegative");
        total += w;
        for (const auto& b : part.branches_) {
            Branch nb = b;
            nb.weight *= w;
            d.branches_.push_back(std::move(nb));
        }
    }
    if (!(total > 0)) throw Error(errc::input, "mixture weights must not all vanish");
    for (auto& b : d.branches_) b.weight /= total;
    return d;
}

ResponseDist& ResponseDist::then(const ResponseDist& other) {
    std::vector<Branch> combined;
    combined.reserve(branches_.size() * other.branches_.size());
    for (const auto& a : branches_)
        for (const auto& b : other.branches_) {
            Branch nb;
            nb.weight = a.weight * b.weight;
            nb.stages = a.stages;
            nb.stages.insert(nb.stages.end(), b.stages.begin(), b.stages.end());
            combined.push_back(std::move(nb));
        }
    branches_ = std::move(combined);
    return *this;
}

double ResponseDist::mean() const {
    double m = 0;
    for (const auto& b : branches_) {
        double bm = 0;
        for (const auto& s : b.stages) bm += s.p / s.rate;
        m += b.weight * bm;
    }
    return m;
}

double ResponseDist::variance() const {
    // mixture of independent sums: E[X^2] per branch, then combine
    double m = mean(), ex2 = 0;
    for (const auto& b : branches_) {
        double bm = 0, bv = 0;
        for (const auto& s : b.stages) {
            bm += s.p / s.rate;
            bv += s.p * (2.0 - s.p) / (s.rate * s.rate);
        }
        ex2 += b.weight * (bv + bm * bm);
    }
    return ex2 - m * m;
}

double ResponseDist::atom_at_zero() const {
    double a = 0;
    for (const auto& b : branches_) {
        double skip = 1;
        for (const auto& s : b.stages) skip *= (1.0 - s.p);
        a += b.weight * skip;
    }
    return a;
}

namespace {

// absorption probability by t of the stage chain with skip probabilities
double branch_cdf(const ResponseDist::Branch& b, double t) {
    std::vector<ResponseDist::Stage> st;
    for (const auto& s : b.stages)
        if (s.p > 0) st.push_back(s);
    if (st.empty()) return 1.0;
    int k = static_cast<int>(st.size());
    // initial distribution: first stage actually entered
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(k);
    double skip = 1;
    for (int i = 0; i < k; i++) {
        alpha[i] = skip * st[i].p;
        skip *= (1.0 - st[i].p);
    }
    // upper-triangular generator with bypass jumps
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(k, k);
    for (int i = 0; i < k; i++) {
        T(i, i) = -st[i].rate;
        double pass = st[i].rate;
        for (int j = i + 1; j < k; j++) {
            T(i, j) = pass * st[j].p;
            pass *= (1.0 - st[j].p);
        }
    }
    Eigen::MatrixXd E = (T * t).exp();
    double surv = (alpha.transpose() * E).sum();
    return 1.0 - surv;
}

}  // namespace

double ResponseDist::cdf(double t) const {
    if (t < 0) return 0.0;
    double c = 0;
    for (const auto& b : branches_) c += b.weight * branch_cdf(b, t);
    return std::min(1.0, std::max(0.0, c));
}

double ResponseDist::quantile(double prob) const {
    if (!(prob > 0.0) || !(prob < 1.0))
        throw Error(errc::input, "quantile needs a probability in (0, 1)");
    if (prob <= atom_at_zero()) return 0.0;
    double lo = 0, hi = 1;
    while (cdf(hi) < prob && hi < 1e12) hi *= 2;
    for (int it = 0; it < 200 && hi - lo > 1e-13 * std::max(1.0, hi); it++) {
        double mid = 0.5 * (lo + hi);
        (cdf(mid) < prob ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

std::vector<double> ResponseDist::sample(std::uint64_t seed, int count) const {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> cum;
    cum.reserve(branches_.size());
    double acc = 0;
    for (const auto& b : branches_) cum.push_back(acc += b.weight);
    std::vector<double> out;
    out.reserve(count);
    for (int i = 0; i < count; i++) {
        double u = unif(rng) * acc;
        std::size_t bi = std::lower_bound(cum.begin(), cum.end(), u) - cum.begin();
        bi = std::min(bi, branches_.size() - 1);
        double x = 0;
        for (const auto& s : branches_[bi].stages) {
            if (s.p < 1.0 && unif(rng) >= s.p) continue;
            x += -std::log1p(-unif(rng)) / s.rate;
        }
        out.push_back(x);
    }
    return out;
}

double split_geometric(double p, double q_i) {
    if (!(p >= 0) || !(p < 1)) throw Error(errc::input, "failure probability must lie in [0,1)");
    if (q_i < 0 || q_i > p) throw Error(errc::input, "type probability must lie in [0, p]");
    return 1.0 - q_i / (q_i + 1.0 - p);
}

}  // namespace oiq
