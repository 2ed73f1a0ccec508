#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <functional>

#include "fixtures.hpp"
#include "oiq/aggregate.hpp"
#include "oiq/detailed.hpp"
#include "oiq/generator.hpp"

using namespace oiq;
namespace fx = oiq::fixtures;

namespace {

std::vector<int> seq(const SystemSpec& spec, std::initializer_list<const char*> ids) {
    std::vector<int> out;
    for (const char* id : ids) out.push_back(spec.class_index(id));
    return out;
}

std::vector<int> srvs(const SystemSpec& spec, std::initializer_list<const char*> ids) {
    std::vector<int> out;
    for (const char* id : ids) out.push_back(spec.server_index(id));
    return out;
}

// every sequence over the classes with length <= n
void all_sequences(int J, int n, std::vector<int>& cur, const std::function<void()>& fn) {
    fn();
    if (static_cast<int>(cur.size()) == n) return;
    for (int c = 0; c < J; c++) {
        cur.push_back(c);
        all_sequences(J, n, cur, fn);
        cur.pop_back();
    }
}

}  // namespace

TEST_CASE("marginal service rates in the running collaborative example") {
    auto spec = fx::fig3();
    auto st = seq(spec, {"c1", "c2", "c3", "c2", "c4", "c1"});
    auto ev = oi_rate_eval(spec, OIRate::for_kind(spec), st);
    double mu1 = spec.mu(spec.server_index("s1"));
    double mu2 = spec.mu(spec.server_index("s2"));
    double mu3 = spec.mu(spec.server_index("s3"));
    double mu4 = spec.mu(spec.server_index("s4"));
    REQUIRE(ev.delta.size() == 6);
    CHECK(ev.delta[0] == doctest::Approx(mu1 + mu2));
    CHECK(ev.delta[1] == doctest::Approx(mu3));
    CHECK(ev.delta[2] == doctest::Approx(0));
    CHECK(ev.delta[3] == doctest::Approx(0));
    CHECK(ev.delta[4] == doctest::Approx(mu4));
    CHECK(ev.delta[5] == doctest::Approx(0));
    CHECK(ev.mu_total == doctest::Approx(mu1 + mu2 + mu3 + mu4));

    auto empty = oi_rate_eval(spec, OIRate::for_kind(spec), {});
    CHECK(empty.mu_total == 0);
    CHECK(empty.delta.empty());

    auto w = fx::w_model();
    auto ev2 = oi_rate_eval(w, OIRate::for_kind(w), seq(w, {"c3", "c1"}));
    CHECK(ev2.delta[0] == doctest::Approx(2.0));
    CHECK(ev2.delta[1] == doctest::Approx(0.0));
}

TEST_CASE("abandonment marginals include the per-job rates") {
    auto spec = fx::w_abandon();
    auto ev = oi_rate_eval(spec, OIRate::for_kind(spec), seq(spec, {"c3", "c1"}));
    CHECK(ev.delta[0] == doctest::Approx(2.0 + 0.1));
    CHECK(ev.delta[1] == doctest::Approx(0.1));
}

TEST_CASE("an order-violating user hook is rejected") {
    OIRate bad{[](const SystemSpec&, const Counts& x) {
        int total = 0;
        for (int v : x) total += v;
        return total == 1 ? 5.0 : 1.0;  // rate drops when a job is added
    }};
    auto spec = fx::mm1();
    CHECK_THROWS_AS(oi_rate_eval(spec, bad, {0, 0}), Error);
    auto chk = verify_oi_properties(spec, bad, 4, 1, 64);
    CHECK_FALSE(chk.ok);
    auto good = verify_oi_properties(spec, OIRate::for_kind(spec), 4, 1, 64);
    CHECK(good.ok);
}

TEST_CASE("collaborative product form matches the printed example") {
    auto spec = fx::fig3();
    auto st = seq(spec, {"c1", "c2", "c3", "c2", "c4", "c1"});
    auto w = weight_collaborative(spec, st);
    REQUIRE(w.valid);
    double l1 = spec.lambda(0), l2 = spec.lambda(1), l3 = spec.lambda(2), l4 = spec.lambda(3);
    double mu2 = 2, mu3 = 1, mu123 = 4, mu = 7;
    double expect = (l1 / (mu2 + mu3)) * (l2 / mu123) * (l3 / mu123) * (l2 / mu123) * (l4 / mu) *
                    (l1 / mu);
    CHECK(w.value == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("normalized collaborative law reduces to M/M/1") {
    auto spec = fx::mm1();
    for (int n = 0; n <= 6; n++) {
        DState st = to_dstate(JobSequence(n, 0));
        auto p = pi_detailed(spec, st, true, 1e-13);
        REQUIRE(p.valid);
        CHECK(p.value == doctest::Approx(0.5 * std::pow(0.5, n)).epsilon(1e-10));
    }
    auto G = normalizing_constant(spec, 1e-13);
    CHECK(G.G == doctest::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("ALIS product of product forms matches the printed example") {
    auto spec = fx::fig4();
    AlisState st;
    st.queue = seq(spec, {"c3", "c2", "c3", "c2"});
    st.idle = srvs(spec, {"s4", "s1"});
    auto w = weight_alis(spec, st);
    REQUIRE(w.valid);
    double l1 = spec.lambda(0), l2 = spec.lambda(1), l3 = spec.lambda(2), l4 = spec.lambda(3);
    double mu = 1.0;
    double expect = (l3 / mu) * (l2 / (mu + mu)) * (l3 / (mu + mu)) * (l2 / (mu + mu)) *
                    (mu / l4) * (mu / (l1 + l4));
    CHECK(w.value == doctest::Approx(expect).epsilon(1e-14));

    AlisState bad;
    bad.queue = seq(spec, {"c2"});
    bad.idle = srvs(spec, {"s2"});
    CHECK_FALSE(weight_alis(spec, bad).valid);
}

TEST_CASE("RAIS detailed product form matches the worked interleaving") {
    auto spec = fx::fig4(Kind::NcRais);
    auto table = build_activation(spec);
    int s2 = spec.server_index("s2"), s3 = spec.server_index("s3");
    int c2 = spec.class_index("c2"), c3 = spec.class_index("c3");
    RaisState st;
    st.entries = {server_entry(s3), job_entry(c3), server_entry(s2),
                  job_entry(c2),    job_entry(c3), job_entry(c2)};
    auto w = weight_rais(spec, table, st);
    REQUIRE(w.valid);
    double mu3 = 1.0, mu23 = 2.0;
    double a3 = table.rate(0, s3);
    double a2 = table.rate(1u << s3, s2);
    double l2 = spec.lambda(c2), l3 = spec.lambda(c3);
    double expect = (a3 / mu3) * (l3 / mu3) * (a2 / mu23) * (l2 / mu23) * (l3 / mu23) * (l2 / mu23);
    CHECK(w.value == doctest::Approx(expect).epsilon(1e-13));

    RaisState bad;
    bad.entries = {job_entry(c3)};  // compatible server s3 is idle
    CHECK_FALSE(weight_rais(spec, table, bad).valid);
}

TEST_CASE("matching weights: buffered, abandoning, equal DBM(0)") {
    // DBM(0) weights equal the collaborative weights state by state
    auto dbm = fx::w_model(Kind::Dbm);
    auto collab = fx::w_model();
    std::vector<int> cur;
    all_sequences(3, 4, cur, [&]() {
        MatchingState m{cur, {}};
        auto wm = weight_matching(dbm, m);
        auto wc = weight_collaborative(collab, cur);
        REQUIRE(wm.valid == wc.valid);
        CHECK(wm.value == doctest::Approx(wc.value).epsilon(1e-14));
    });

    auto dba = fx::dbma2();
    MatchingState empty;
    CHECK(weight_matching(dba, empty).value == doctest::Approx(1.0));

    // single class, single type, buffer one: pi(empty)=1/4, pi(server)=1/2
    auto spec = fx::dbm1();
    auto p_empty = pi_matching(spec, MatchingState{}, true, 1e-13);
    auto p_srv = pi_matching(spec, MatchingState{{}, {0}}, true, 1e-13);
    CHECK(p_empty.value == doctest::Approx(0.25).epsilon(1e-10));
    CHECK(p_srv.value == doctest::Approx(0.5).epsilon(1e-10));
    auto gen = generator_solve(spec, 40);
    CHECK(gen.pi_of(to_dstate(MatchingState{})) == doctest::Approx(0.25).epsilon(1e-9));
    CHECK(gen.pi_of(to_dstate(MatchingState{{}, {0}})) == doctest::Approx(0.5).epsilon(1e-9));

    auto bad = weight_matching(spec, MatchingState{{0}, {0}});
    CHECK_FALSE(bad.valid);
}

TEST_CASE("gm weights live on independent sets") {
    auto spec = fx::gm_triangle();
    CHECK(weight_matching(spec, MatchingState{{0, 1}, {}}).valid == false);
    auto w = weight_matching(spec, MatchingState{{0, 0}, {}});
    REQUIRE(w.valid);
    double mu_bc = spec.lambda(1) + spec.lambda(2);
    CHECK(w.value == doctest::Approx(std::pow(spec.lambda(0) / mu_bc, 2)).epsilon(1e-14));
}

TEST_CASE("pbm states carry equal counts and factor into two chains") {
    auto spec = fx::pbm2();
    CHECK_FALSE(weight_matching(spec, MatchingState{{1}, {}}).valid);
    MatchingState st{{0}, {1}};
    auto w = weight_matching(spec, st);
    REQUIRE(w.valid);
    double job_side = spec.lambda(0) / spec.mu_of(spec.S_of(1u << 0));
    double srv_side = spec.mu(1) / spec.lambda_of(spec.C_of(1u << 1));
    CHECK(w.value == doctest::Approx(job_side * srv_side).epsilon(1e-14));
}

TEST_CASE("closed token weights") {
    auto spec = fx::closed_tokens();
    ClosedTokenState st;
    st.busy = {0};
    st.idle = {1};
    auto w = weight_closed_token(spec, st);
    REQUIRE(w.valid);
    CHECK(w.value == doctest::Approx((1.0 / spec.mu(0)) * (1.0 / spec.lambda(1))).epsilon(1e-14));
    ClosedTokenState bad;
    bad.busy = {0};
    bad.idle = {0};
    CHECK_FALSE(weight_closed_token(spec, bad).valid);
}

TEST_CASE("W model normalizing constant and empty probability") {
    auto spec = fx::w_model();
    auto G = normalizing_constant(spec, 1e-12);
    CHECK(1.0 / G.G == doctest::Approx(0.315).epsilon(1e-9));
    CHECK(G.tail_bound / G.G <= 1e-11);

    auto fig5 = fx::fig5();
    auto dec = nested_decompose(fig5);
    double prod = 1;
    for (const auto& n : dec.tree.nodes) prod *= (1 - n.rho);
    auto G5 = normalizing_constant(fig5, 1e-12);
    CHECK(1.0 / G5.G == doctest::Approx(prod).epsilon(1e-9));
}

TEST_CASE("normalization requires stability") {
    auto bad = fx::w_model(Kind::Collaborative, 11);
    CHECK_THROWS_AS(normalizing_constant(bad, 1e-10), Error);
}

TEST_CASE("truncation regions") {
    auto spec = fx::w_model();
    auto total5 = check_truncation_region(
        spec, [](const Counts& x) { return x[0] + x[1] + x[2] <= 5; }, 8);
    CHECK(total5.ok);

    auto box = check_truncation_region(
        spec, [](const Counts& x) { return x[0] <= 2 && x[1] <= 3; }, 8);
    CHECK(box.ok);

    auto slice = check_truncation_region(
        spec, [](const Counts& x) { return x[0] == 2; }, 6);
    REQUIRE_FALSE(slice.ok);
    CHECK(slice.witness[0] == 2);
}

TEST_CASE("truncated normalization matches the conditional law") {
    auto spec = fx::w_model();
    auto region = [](const Counts& x) { return x[0] + x[1] + x[2] <= 3; };
    NormConstant G = normalizing_constant(spec, 1e-12, nullptr, nullptr, region);
    double direct = 0;
    std::vector<int> cur;
    all_sequences(3, 3, cur, [&]() { direct += weight_collaborative(spec, cur).value; });
    CHECK(G.G == doctest::Approx(direct).epsilon(1e-12));
    auto two = seq(spec, {"c3", "c1"});
    auto pt = pi_detailed(spec, to_dstate(two), true, 1e-12, nullptr, nullptr, region);
    CHECK(pt.value == doctest::Approx(weight_collaborative(spec, two).value / direct));
    auto outside =
        pi_detailed(spec, to_dstate(JobSequence(4, 2)), true, 1e-12, nullptr, nullptr, region);
    CHECK(outside.value == 0);
}

TEST_CASE("conditional reduction: avoiding a class matches the reduced system") {
    auto spec = fx::w_model();
    ClassSet avoid = 1u << spec.class_index("c3");
    ClassSet keep = spec.all_classes() & ~avoid;
    auto keep_mass = oi_side_mass(spec, 1e-13, keep);
    auto red = reduce_without_classes(spec, avoid);
    auto red_mass = normalizing_constant(red, 1e-13);
    CHECK(keep_mass.G == doctest::Approx(red_mass.G).epsilon(1e-11));
    std::vector<int> cur;
    all_sequences(2, 4, cur, [&]() {
        auto w_full = weight_collaborative(spec, cur);  // c1, c2 share indices in both specs
        auto w_red = weight_collaborative(red, cur);
        CHECK(w_full.value / keep_mass.G ==
              doctest::Approx(w_red.value / red_mass.G).epsilon(1e-11));
    });
}

TEST_CASE("permutation invariance of the total rate") {
    auto spec = fx::ring3();
    std::vector<int> base = seq(spec, {"c1", "c2", "c3", "c1", "c2", "c3"});
    std::sort(base.begin(), base.end());
    auto rate = OIRate::for_kind(spec);
    double ref = oi_rate_eval(spec, rate, base).mu_total;
    do {
        CHECK(oi_rate_eval(spec, rate, base).mu_total == doctest::Approx(ref));
    } while (std::next_permutation(base.begin(), base.end()));
}

TEST_CASE("partial balance residuals vanish state by state") {
    auto spec = fx::w_model();
    DState empty;
    for (int c = 0; c < 3; c++)
        CHECK(partial_balance_residual(spec, empty, BalanceFamily::cls(c)) ==
              doctest::Approx(0.0).epsilon(1e-14));
    DState two = to_dstate(seq(spec, {"c3", "c1"}));
    for (int c = 0; c < 3; c++)
        CHECK(std::fabs(partial_balance_residual(spec, two, BalanceFamily::cls(c))) <= 1e-14);

    auto sweep = partial_balance_sweep(spec, 4);
    CHECK(sweep.max_residual <= 1e-13);
    CHECK(sweep.max_global_gap <= 1e-13);
}

TEST_CASE("partial balance across kinds") {
    auto alis = fx::fig4(Kind::NcAlis);
    CHECK(partial_balance_sweep(alis, 3).max_residual <= 1e-13);

    auto rais = fx::n_model(Kind::NcRais);
    auto table = build_activation(rais);
    CHECK(partial_balance_sweep(rais, 4, &table).max_residual <= 1e-13);

    CHECK(partial_balance_sweep(fx::dbm1(), 4).max_residual <= 1e-13);
    CHECK(partial_balance_sweep(fx::dbma2(), 3).max_residual <= 1e-13);
    CHECK(partial_balance_sweep(fx::gm_triangle(), 4).max_residual <= 1e-13);
    CHECK(partial_balance_sweep(fx::w_abandon(), 3).max_residual <= 1e-13);
}

TEST_CASE("rais residuals against exhaustive neighbor enumeration") {
    auto spec = fx::n_model(Kind::NcRais);
    auto table = build_activation(spec);
    Dynamics dyn(spec, &table);
    auto states = dyn.enumerate(5);
    for (const auto& st : states) {
        if (dyn.measure(st) > 4) continue;
        for (int c = 0; c < spec.num_classes(); c++)
            CHECK(std::fabs(partial_balance_residual(spec, st, BalanceFamily::cls(c), &table)) <=
                  1e-13);
        for (int s = 0; s < spec.num_servers(); s++)
            CHECK(std::fabs(partial_balance_residual(spec, st, BalanceFamily::server(s), &table)) <=
                  1e-13);
    }
}
