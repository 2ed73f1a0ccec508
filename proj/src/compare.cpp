#include "oiq/compare.hpp"

#include <algorithm>
#include <cmath>

namespace oiq {

TvReport tv_distance(const std::map<std::vector<int>, StateStat>& empirical, AnalyticPi pi) {
    TvReport rep;
    double acc = 0;
    for (const auto& [key, stat] : empirical) {
        double p = pi(key);
        acc += std::fabs(stat.mean - p);
        rep.observed_mass += p;
        rep.states++;
    }
    // unobserved analytic mass counts in full
    acc += std::max(0.0, 1.0 - rep.observed_mass);
    rep.tv = 0.5 * acc;
    return rep;
}

ZReport per_state_z(const std::map<std::vector<int>, StateStat>& empirical, AnalyticPi pi,
                    double min_mean) {
    ZReport rep;
    for (const auto& [key, stat] : empirical) {
        if (stat.mean < min_mean || !(stat.se > 0)) continue;
        double z = (stat.mean - pi(key)) / stat.se;
        rep.states++;
        if (std::fabs(z) > std::fabs(rep.max_z)) {
            rep.max_z = z;
            rep.worst_state = key;
        }
    }
    rep.max_z = std::fabs(rep.max_z);
    return rep;
}

KsReport ks_test(std::vector<double> samples, const std::function<double(double)>& cdf,
                 double alpha) {
    KsReport rep;
    rep.n = samples.size();
    if (samples.empty()) return rep;
    std::sort(samples.begin(), samples.end());
    double d = 0;
    const double n = static_cast<double>(samples.size());
    for (std::size_t i = 0; i < samples.size(); i++) {
        double F = cdf(samples[i]);
        d = std::max(d, std::fabs(F - static_cast<double>(i) / n));
        d = std::max(d, std::fabs(static_cast<double>(i + 1) / n - F));
    }
    rep.statistic = d;
    rep.critical = std::sqrt(-std::log(alpha / 2.0) / 2.0) / std::sqrt(n);
    rep.reject = d > rep.critical;
    return rep;
}

double mean_gap(const std::vector<double>& samples, double analytic_mean) {
    if (samples.empty()) return std::fabs(analytic_mean);
    double m = 0;
    for (double x : samples) m += x;
    m /= static_cast<double>(samples.size());
    return std::fabs(m - analytic_mean);
}

double tv_between(const GeneratorResult& a, const GeneratorResult& b) {
    std::map<std::vector<int>, double> pa;
    for (std::size_t i = 0; i < a.states.size(); i++) pa[state_key(a.states[i])] = a.pi[i];
    double acc = 0;
    double matched = 0;
    for (std::size_t i = 0; i < b.states.size(); i++) {
        auto it = pa.find(state_key(b.states[i]));
        double p = it == pa.end() ? 0.0 : it->second;
        if (it != pa.end()) matched += p;
        acc += std::fabs(b.pi[i] - p);
    }
    acc += std::max(0.0, 1.0 - matched);
    return 0.5 * acc;
}

double lag1_autocorrelation(const std::vector<double>& xs) {
    if (xs.size() < 3) return 0;
    double mean = 0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double num = 0, den = 0;
    for (std::size_t i = 0; i < xs.size(); i++) {
        den += (xs[i] - mean) * (xs[i] - mean);
        if (i + 1 < xs.size()) num += (xs[i] - mean) * (xs[i + 1] - mean);
    }
    return den > 0 ? num / den : 0;
}

}  // namespace oiq
