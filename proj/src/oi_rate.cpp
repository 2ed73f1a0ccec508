#include "oiq/oi_rate.hpp"

#include <random>
#include <sstream>

namespace oiq {

ClassSet support_of(const Counts& x) {
    ClassSet s = 0;
    for (int i = 0; i < static_cast<int>(x.size()); i++)
        if (x[i] > 0) s |= (1u << i);
    return s;
}

OIRate OIRate::collaborative() {
    return {[](const SystemSpec& spec, const Counts& x) {
        return spec.mu_of(spec.S_of(support_of(x)));
    }};
}

OIRate OIRate::collaborative_abandon() {
    return {[](const SystemSpec& spec, const Counts& x) {
        double g = 0;
        for (int i = 0; i < static_cast<int>(x.size()); i++)
            if (x[i] > 0) g += x[i] * spec.gamma(i);
        return g + spec.mu_of(spec.S_of(support_of(x)));
    }};
}

OIRate OIRate::gm_match() {
    return {[](const SystemSpec& spec, const Counts& x) {
        // probability the next arrival is compatible with a waiting agent
        double t = 0;
        ClassSet nbrs = spec.S_of(support_of(x));
        for (int i : set_bits(nbrs)) t += spec.lambda(i);
        return t;
    }};
}

OIRate OIRate::for_kind(const SystemSpec& spec) {
    switch (spec.kind()) {
        case Kind::Gm: return gm_match();
        default: return spec.has_abandonments() ? collaborative_abandon() : collaborative();
    }
}

OiEval oi_rate_eval(const SystemSpec& spec, const OIRate& rate, const std::vector<int>& seq) {
    OiEval ev;
    Counts x(spec.num_classes(), 0);
    double prev = 0;
    ev.delta.reserve(seq.size());
    for (int c : seq) {
        if (c < 0 || c >= spec.num_classes()) throw Error(errc::input, "sequence names unknown class");
        x[c]++;
        double cur = rate(spec, x);
        double d = cur - prev;
        if (d < -1e-12 * std::max(1.0, cur)) {
            std::ostringstream os;
            os << "rate functional is not order independent: negative marginal " << d;
            throw Error(errc::oi_violation, os.str());
        }
        ev.delta.push_back(d < 0 ? 0.0 : d);
        prev = cur;
    }
    ev.mu_total = prev;
    return ev;
}

OiCheck verify_oi_properties(const SystemSpec& spec, const OIRate& rate, int max_total,
                             std::uint64_t seed, int samples) {
    OiCheck chk;
    int J = spec.num_classes();
    for (int c = 0; c < J; c++) {
        Counts x(J, 0);
        x[c] = 1;
        if (!(rate(spec, x) > 0)) {
            chk.ok = false;
            chk.what = "mu(single " + spec.cls(c).id + ") is not positive";
            return chk;
        }
    }
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick(0, J - 1);
    for (int s = 0; s < samples; s++) {
        Counts x(J, 0);
        int total = static_cast<int>(rng() % (max_total + 1));
        for (int t = 0; t < total; t++) x[pick(rng)]++;
        double base = rate(spec, x);
        for (int c = 0; c < J; c++) {
            Counts y = x;
            y[c]++;
            double up = rate(spec, y);
            if (up < base - 1e-12 * std::max(1.0, base)) {
                chk.ok = false;
                chk.what = "mu decreases when adding class " + spec.cls(c).id;
                return chk;
            }
        }
    }
    return chk;
}

}  // namespace oiq
