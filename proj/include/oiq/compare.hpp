#pragma once

#include <functional>

#include "oiq/generator.hpp"
#include "oiq/simulate.hpp"

namespace oiq {

struct TvReport {
    double tv = 0;               // total variation over the union support
    double observed_mass = 0;    // analytic mass of the observed states
    int states = 0;
};

struct ZReport {
    double max_z = 0;
    std::vector<int> worst_state;
    int states = 0;
};

struct KsReport {
    double statistic = 0;
    double critical = 0;   // at the requested level
    std::size_t n = 0;
    bool reject = false;
};

// analytic distribution given by a probability function over state keys
using AnalyticPi = std::function<double(const std::vector<int>&)>;

TvReport tv_distance(const std::map<std::vector<int>, StateStat>& empirical, AnalyticPi pi);

// per-state z-scores using the replication standard errors; states below
// min_mean are skipped (their errors are not normal)
ZReport per_state_z(const std::map<std::vector<int>, StateStat>& empirical, AnalyticPi pi,
                    double min_mean = 1e-4);

KsReport ks_test(std::vector<double> samples, const std::function<double(double)>& cdf,
                 double alpha = 0.01);

double mean_gap(const std::vector<double>& samples, double analytic_mean);

// total variation between two exact distributions on the same space
double tv_between(const GeneratorResult& a, const GeneratorResult& b);

// lag-1 autocorrelation, for the Poisson-departure sanity check
double lag1_autocorrelation(const std::vector<double>& xs);

}  // namespace oiq
