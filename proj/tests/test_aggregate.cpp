#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <functional>

#include "fixtures.hpp"
#include "oiq/aggregate.hpp"
#include "oiq/detailed.hpp"

using namespace oiq;
namespace fx = oiq::fixtures;

namespace {

// all count vectors with the given total
void level_vectors(int J, int total, Counts& x, int i, const std::function<void()>& fn) {
    if (i == J - 1) {
        x[i] = total;
        fn();
        x[i] = 0;
        return;
    }
    for (int v = 0; v <= total; v++) {
        x[i] = v;
        level_vectors(J, total - v, x, i + 1, fn);
    }
    x[i] = 0;
}

// all class sequences consistent with counts x
void consistent_sequences(const Counts& x, std::vector<int>& seq,
                          const std::function<void()>& fn) {
    std::vector<int> sorted;
    for (int c = 0; c < static_cast<int>(x.size()); c++)
        for (int k = 0; k < x[c]; k++) sorted.push_back(c);
    std::sort(sorted.begin(), sorted.end());
    do {
        seq = sorted;
        fn();
    } while (std::next_permutation(sorted.begin(), sorted.end()));
}

}  // namespace

TEST_CASE("rais aggregation sums the consistent interleavings") {
    auto spec = fx::n_model();
    auto table = build_activation(spec);
    int s1 = spec.server_index("s1"), s2 = spec.server_index("s2");

    std::vector<int> busy = {s1, s2};
    std::vector<int> gaps = {1, 2};
    PartialState ps{busy, gaps, std::nullopt};
    auto agg = pi_partial_agg(spec, ps, PartialVariant::Rais, &table, false);
    REQUIRE(agg.valid);

    // enumerate z-states with skeleton (b1, g1 jobs, b2, g2 jobs)
    double direct = 0;
    ClassSet r1 = spec.R_of(1u << s1);
    ClassSet r2 = spec.R_of((1u << s1) | (1u << s2));
    std::vector<int> g1 = set_bits(r1), g2 = set_bits(r2);
    std::vector<int> pick1(gaps[0], 0), pick2(gaps[1], 0);
    std::function<void(int)> loop2 = [&](int pos) {
        if (pos == gaps[1]) {
            RaisState st;
            st.entries.push_back(server_entry(busy[0]));
            for (int c : pick1) st.entries.push_back(job_entry(c));
            st.entries.push_back(server_entry(busy[1]));
            for (int c : pick2) st.entries.push_back(job_entry(c));
            auto w = weight_rais(spec, table, st);
            REQUIRE(w.valid);
            direct += w.value;
            return;
        }
        for (int c : g2) {
            pick2[pos] = c;
            loop2(pos + 1);
        }
    };
    std::function<void(int)> loop1 = [&](int pos) {
        if (pos == gaps[0]) {
            loop2(0);
            return;
        }
        for (int c : g1) {
            pick1[pos] = c;
            loop1(pos + 1);
        }
    };
    loop1(0);
    CHECK(agg.value == doctest::Approx(direct).epsilon(1e-13));
}

TEST_CASE("empty partial state has weight one") {
    auto spec = fx::n_model();
    auto table = build_activation(spec);
    PartialState ps{{}, {}, std::nullopt};
    auto agg = pi_partial_agg(spec, ps, PartialVariant::Rais, &table, false);
    REQUIRE(agg.valid);
    CHECK(agg.value == doctest::Approx(1.0));
}

TEST_CASE("collaborative partial aggregation spot value on the W model") {
    auto spec = fx::w_model();
    int c3 = spec.class_index("c3");
    PartialState ps{{c3}, {2}, std::nullopt};
    auto agg = pi_partial_agg(spec, ps, PartialVariant::Collab, nullptr, true, 1e-12);
    REQUIRE(agg.valid);
    // pi(0) (lambda_3/2) (1.1/2)^2 = 0.315 * 0.25 * 0.3025
    CHECK(agg.value == doctest::Approx(0.315 * 0.25 * 0.3025).epsilon(1e-9));

    // cross-check by summing detailed states of the form (c3, a, b)
    auto G = normalizing_constant(spec, 1e-13);
    double direct = 0;
    for (int a = 0; a < 3; a++)
        for (int b = 0; b < 3; b++) {
            JobSequence st{c3, a, b};
            direct += weight_collaborative(spec, st).value;
        }
    CHECK(agg.value == doctest::Approx(direct / G.G).epsilon(1e-10));

    // an in-service list that engages no new server is invalid
    PartialState bad{{spec.class_index("c1"), spec.class_index("c1")}, {0, 0}, std::nullopt};
    CHECK_FALSE(pi_partial_agg(spec, bad, PartialVariant::Collab).valid);
}

TEST_CASE("gap counts are geometric and independent") {
    auto spec = fx::fig4(Kind::NcRais);
    auto table = build_activation(spec);
    int s2 = spec.server_index("s2"), s3 = spec.server_index("s3");
    std::vector<int> busy = {s3, s2};
    for (int g1 = 0; g1 <= 2; g1++)
        for (int g2 = 0; g2 <= 2; g2++) {
            PartialState ps{busy, {g1, g2}, std::nullopt};
            PartialState ps_up1{busy, {g1 + 1, g2}, std::nullopt};
            PartialState ps_up2{busy, {g1, g2 + 1}, std::nullopt};
            double w = pi_partial_agg(spec, ps, PartialVariant::Rais, &table).value;
            double w1 = pi_partial_agg(spec, ps_up1, PartialVariant::Rais, &table).value;
            double w2 = pi_partial_agg(spec, ps_up2, PartialVariant::Rais, &table).value;
            ServerSet b1 = 1u << s3;
            ServerSet b12 = b1 | (1u << s2);
            double alpha1 = spec.lambda_of(spec.R_of(b1)) / spec.mu_of(b1);
            double alpha2 = spec.lambda_of(spec.R_of(b12)) / spec.mu_of(b12);
            CHECK(w1 / w == doctest::Approx(alpha1).epsilon(1e-12));
            CHECK(w2 / w == doctest::Approx(alpha2).epsilon(1e-12));
        }
}

TEST_CASE("alis aggregate summed over idle orders equals rais") {
    auto spec = fx::w_model(Kind::NcAlis);
    auto table = build_activation(fx::w_model(Kind::NcRais));
    int s1 = spec.server_index("s1"), s2 = spec.server_index("s2");

    // all (busy, gaps) with total waiting <= 4
    std::vector<std::vector<int>> busy_lists = {{}, {s1}, {s2}, {s1, s2}, {s2, s1}};
    for (const auto& busy : busy_lists) {
        int l = static_cast<int>(busy.size());
        std::vector<int> gaps(l, 0);
        std::function<void(int, int)> walk = [&](int i, int left) {
            if (i == l) {
                auto chk = alis_rais_marginal_check(spec, busy, gaps, table, 1e-10);
                CHECK(chk.ok);
                return;
            }
            for (int g = 0; g <= left; g++) {
                gaps[i] = g;
                walk(i + 1, left - g);
            }
        };
        walk(0, 4);
    }
}

TEST_CASE("marginal check covers the single-server and all-busy edges") {
    auto spec = SystemSpec::make(Kind::NcAlis, {{"c1", rate_of(1, 2), {}, 0}},
                                 {{"s1", rate_of(1), {}, 0}}, {{"c1", "s1"}});
    auto table = build_activation(SystemSpec::make(
        Kind::NcRais, {{"c1", rate_of(1, 2), {}, 0}}, {{"s1", rate_of(1), {}, 0}},
        {{"c1", "s1"}}));
    auto chk = alis_rais_marginal_check(spec, {0}, {2}, table, 1e-10);
    CHECK(chk.ok);  // one permutation, equality exact
    auto empty = alis_rais_marginal_check(spec, {}, {}, table, 1e-10);
    CHECK(empty.ok);
}

TEST_CASE("conditional queueing times follow the tandem form") {
    auto spec = fx::w_model(Kind::NcRais);
    int s1 = spec.server_index("s1"), s2 = spec.server_index("s2");
    int c1 = spec.class_index("c1"), c3 = spec.class_index("c3");

    // class 3 with both servers busy: one stage at rate mu({1,2}) - lambda(R)
    auto d3 = cond_queue_time(spec, c3, {s1, s2}, false);
    REQUIRE(d3.branches().size() == 1);
    REQUIRE(d3.branches()[0].stages.size() == 1);
    CHECK(d3.branches()[0].stages[0].rate == doctest::Approx(2.0 - 1.1).epsilon(1e-14));
    CHECK(d3.mean() == doctest::Approx(1.0 / 0.9).epsilon(1e-12));

    // class 1 sees both stages: rates 1 - 0.3 and 2 - 1.1
    auto d1 = cond_queue_time(spec, c1, {s1, s2}, false);
    REQUIRE(d1.branches()[0].stages.size() == 2);
    CHECK(d1.branches()[0].stages[0].rate == doctest::Approx(0.7).epsilon(1e-14));
    CHECK(d1.branches()[0].stages[1].rate == doctest::Approx(0.9).epsilon(1e-14));

    // class 1 with only s2 busy starts service immediately
    auto zero = cond_queue_time(spec, c1, {s2}, false);
    CHECK(zero.mean() == doctest::Approx(0.0));
    CHECK(zero.atom_at_zero() == doctest::Approx(1.0));

    // collaborative conditioning on in-service classes
    auto collab = fx::w_model();
    auto dc = cond_queue_time(collab, c3, {c1, spec.class_index("c2")}, true);
    REQUIRE(dc.branches()[0].stages.size() == 1);
    CHECK(dc.branches()[0].stages[0].rate == doctest::Approx(0.9).epsilon(1e-14));
}

TEST_CASE("phi recursion closed forms") {
    auto mm1 = fx::mm1();
    PhiTable t1(mm1, OIRate::for_kind(mm1), 8);
    for (int n = 0; n <= 8; n++) CHECK(t1.phi({n}) == doctest::Approx(std::pow(1.0, -n)));

    auto spec = fx::w_model();
    PhiTable t(spec, OIRate::for_kind(spec), 6);
    CHECK(t.phi({0, 0, 0}) == doctest::Approx(1.0));
    CHECK(t.phi({1, 0, 0}) == doctest::Approx(1.0));
    CHECK(t.phi({0, 0, 1}) == doctest::Approx(0.5));
    CHECK(t.phi({1, 0, 1}) == doctest::Approx(0.75));
    CHECK_THROWS_AS(t.phi({7, 0, 0}), Error);
}

TEST_CASE("aggregate probability equals the detailed sum") {
    auto spec = fx::w_model();
    PhiTable t(spec, OIRate::for_kind(spec), 6);
    auto G = normalizing_constant(spec, 1e-13);

    auto v = pi_aggregate(spec, t, {1, 0, 1}, true, 1e-13);
    CHECK(v.value == doctest::Approx(0.0354375).epsilon(1e-10));

    // aggregation consistency for every x with total <= 5
    Counts x(3, 0);
    for (int total = 0; total <= 5; total++) {
        level_vectors(3, total, x, 0, [&]() {
            double direct = 0;
            std::vector<int> seq;
            consistent_sequences(x, seq, [&]() {
                direct += weight_collaborative(spec, seq).value;
            });
            auto agg = pi_aggregate(spec, t, x, true, 1e-13);
            CHECK(agg.value == doctest::Approx(direct / G.G).epsilon(1e-10));
        });
    }
}

TEST_CASE("balanced fairness rates") {
    auto spec = fx::w_model();
    PhiTable t(spec, OIRate::for_kind(spec), 7);
    auto r = balanced_rates(t, {1, 0, 1});
    CHECK(r[0] == doctest::Approx(2.0 / 3).epsilon(1e-13));
    CHECK(r[1] == doctest::Approx(0.0));
    CHECK(r[2] == doctest::Approx(4.0 / 3).epsilon(1e-13));
    CHECK(r[0] + r[1] + r[2] == doctest::Approx(2.0).epsilon(1e-13));

    auto single = fx::mm1();
    PhiTable ts(single, OIRate::for_kind(single), 4);
    CHECK(balanced_rates(ts, {3})[0] == doctest::Approx(1.0));

    // balance property and the rate-sum identity over all tabled x
    auto rate = OIRate::for_kind(spec);
    Counts x(3, 0);
    for (int total = 1; total <= 6; total++) {
        level_vectors(3, total, x, 0, [&]() {
            auto phis = balanced_rates(t, x);
            double sum = phis[0] + phis[1] + phis[2];
            CHECK(sum == doctest::Approx(rate(spec, x)).epsilon(1e-12));
            Counts y = x;
            for (int i = 0; i < 3; i++) {
                if (x[i] == 0) continue;
                for (int j = 0; j < 3; j++) {
                    if (i == j || x[j] == 0) continue;
                    y[i]--;
                    double lhs = phis[i] * balanced_rates(t, y)[j];
                    y[i]++;
                    y[j]--;
                    double rhs = phis[j] * balanced_rates(t, y)[i];
                    y[j]++;
                    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-11));
                }
            }
        });
    }
}

TEST_CASE("empty probability by the removal recursion") {
    auto spec = fx::w_model();
    auto e = pi_empty_recursive(spec);
    REQUIRE(e.exact);
    CHECK(e.value_exact == Rat(63, 200));
    CHECK(e.value == doctest::Approx(0.315).epsilon(1e-15));
    CHECK(e.psi[0] == doctest::Approx(0.45).epsilon(1e-13));
    CHECK(e.psi[1] == doctest::Approx(0.45).epsilon(1e-13));
    // sum mu_k psi_k = mu - lambda
    double s = 0;
    for (int k = 0; k < 2; k++) s += spec.mu(k) * e.psi[k];
    CHECK(s == doctest::Approx(0.9).epsilon(1e-13));

    auto mm1 = fx::mm1();
    CHECK(pi_empty_recursive(mm1).value == doctest::Approx(0.5));

    // nested: matches the product of per-class idle factors
    auto fig5 = fx::fig5();
    auto dec = nested_decompose(fig5);
    Rat prod = 1;
    auto eff5 = pi_empty_recursive(fig5);
    REQUIRE(eff5.exact);
    for (const auto& n : dec.tree.nodes) {
        Rat mu_hat = fig5.mu_exact(n.servers) - fig5.lambda_exact(n.required) +
                     fig5.cls(n.cls).lambda.q;
        prod *= (1 - fig5.cls(n.cls).lambda.q / mu_hat);
    }
    CHECK(eff5.value_exact == prod);
}

TEST_CASE("psi equals the conditional mass avoiding the server's classes") {
    auto spec = fx::w_model();
    auto e = pi_empty_recursive(spec);
    auto G = normalizing_constant(spec, 1e-13);
    for (int k = 0; k < spec.num_servers(); k++) {
        // states avoiding C_k: support restricted to classes not touching k
        ClassSet keep = 0;
        for (int i = 0; i < spec.num_classes(); i++)
            if (!(spec.S(i) & (1u << k))) keep |= (1u << i);
        auto mass = oi_side_mass(spec, 1e-13, keep);
        CHECK(e.psi[k] == doctest::Approx(mass.G / G.G).epsilon(1e-10));
    }
}

TEST_CASE("mean counts by the removal recursion") {
    auto spec = fx::w_model();
    auto m = mean_counts(spec);
    REQUIRE(m.exact);
    CHECK(m.Li_exact[2] == Rat(5, 9));
    CHECK(m.Li_exact[0] == Rat(23, 42));
    CHECK(m.Li[0] == doctest::Approx(0.547619).epsilon(1e-6));
    CHECK(m.L == doctest::Approx(to_double(Rat(23, 42) + Rat(23, 42) + Rat(5, 9))).epsilon(1e-12));

    auto mm1 = fx::mm1();
    CHECK(mean_counts(mm1).L == doctest::Approx(1.0));  // rho/(1-rho) = 1

    CHECK_THROWS_AS(mean_counts(fx::w_model(Kind::Collaborative, 11)), Error);
    CHECK_THROWS_AS(mean_counts(fx::fig4(Kind::NcAlis)), Error);
}

TEST_CASE("mean counts agree with the aggregate expectation") {
    // independent cross-check: E[x_i] from the normalized Phi masses
    auto spec = fx::ring3();
    auto m = mean_counts(spec);
    auto G = normalizing_constant(spec, 1e-13);
    PhiTable t(spec, OIRate::for_kind(spec), 60);
    std::vector<double> ex(3, 0.0);
    Counts x(3, 0);
    for (int total = 1; total <= 60; total++) {
        level_vectors(3, total, x, 0, [&]() {
            if (!t.contains(x)) return;
            double w = t.phi(x);
            for (int i = 0; i < 3; i++)
                for (int k = 0; k < x[i]; k++) w *= spec.lambda(i);
            for (int i = 0; i < 3; i++) ex[i] += x[i] * w / G.G;
        });
    }
    for (int i = 0; i < 3; i++) CHECK(m.Li[i] == doctest::Approx(ex[i]).epsilon(1e-7));
}
