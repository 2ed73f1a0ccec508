#pragma once

#include "oiq/model.hpp"

namespace oiq::fixtures {

// M/M/1: one class, one server, rho = 1/2
inline SystemSpec mm1(Kind kind = Kind::Collaborative) {
    return SystemSpec::make(kind, {{"c1", rate_of(1, 2), {}, 0}}, {{"s1", rate_of(1), {}, 0}},
                            {{"c1", "s1"}});
}

// W model: two dedicated classes plus a fully flexible one
inline SystemSpec w_model(Kind kind = Kind::Collaborative, long long lam1_num = 3) {
    return SystemSpec::make(kind,
                            {{"c1", rate_of(lam1_num, 10), {}, 0},
                             {"c2", rate_of(3, 10), {}, 0},
                             {"c3", rate_of(1, 2), {}, 0}},
                            {{"s1", rate_of(1), {}, 0}, {"s2", rate_of(1), {}, 0}},
                            {{"c1", "s1"}, {"c2", "s2"}, {"c3", "s1"}, {"c3", "s2"}});
}

// N model: c1 -> s1, c2 -> both
inline SystemSpec n_model(Kind kind = Kind::NcRais) {
    return SystemSpec::make(kind, {{"c1", rate_of(1), {}, 0}, {"c2", rate_of(1), {}, 0}},
                            {{"s1", rate_of(3, 2), {}, 0}, {"s2", rate_of(1), {}, 0}},
                            {{"c1", "s1"}, {"c2", "s1"}, {"c2", "s2"}});
}

// the bipartite example system: S1={s1,s2}, S2={s2,s3}, S3=S4={s3,s4}
inline SystemSpec fig2(Kind kind = Kind::Collaborative) {
    return SystemSpec::make(kind,
                            {{"c1", rate_of(3, 10), {}, 0},
                             {"c2", rate_of(3, 10), {}, 0},
                             {"c3", rate_of(3, 10), {}, 0},
                             {"c4", rate_of(3, 10), {}, 0}},
                            {{"s1", rate_of(1), {}, 0},
                             {"s2", rate_of(1), {}, 0},
                             {"s3", rate_of(1), {}, 0},
                             {"s4", rate_of(1), {}, 0}},
                            {{"c1", "s1"},
                             {"c1", "s2"},
                             {"c2", "s2"},
                             {"c2", "s3"},
                             {"c3", "s3"},
                             {"c3", "s4"},
                             {"c4", "s3"},
                             {"c4", "s4"}});
}

// collaborative example with mu1 = mu3 so the marginal and product forms
// printed in the running example both hold verbatim
inline SystemSpec fig3() {
    return SystemSpec::make(Kind::Collaborative,
                            {{"c1", rate_of(1, 2), {}, 0},
                             {"c2", rate_of(3, 5), {}, 0},
                             {"c3", rate_of(2, 5), {}, 0},
                             {"c4", rate_of(1, 2), {}, 0}},
                            {{"s1", rate_of(1), {}, 0},
                             {"s2", rate_of(2), {}, 0},
                             {"s3", rate_of(1), {}, 0},
                             {"s4", rate_of(3), {}, 0}},
                            {{"c1", "s1"},
                             {"c1", "s2"},
                             {"c2", "s2"},
                             {"c2", "s3"},
                             {"c3", "s1"},
                             {"c3", "s2"},
                             {"c3", "s3"},
                             {"c4", "s1"},
                             {"c4", "s2"},
                             {"c4", "s3"},
                             {"c4", "s4"}});
}

// noncollaborative example: S1={s1}, S2={s2,s3}, S3={s3}, S4={s4}
inline SystemSpec fig4(Kind kind = Kind::NcAlis) {
    return SystemSpec::make(kind,
                            {{"c1", rate_of(3, 10), {}, 0},
                             {"c2", rate_of(1, 2), {}, 0},
                             {"c3", rate_of(2, 5), {}, 0},
                             {"c4", rate_of(1, 5), {}, 0}},
                            {{"s1", rate_of(1), {}, 0},
                             {"s2", rate_of(1), {}, 0},
                             {"s3", rate_of(1), {}, 0},
                             {"s4", rate_of(1), {}, 0}},
                            {{"c1", "s1"},
                             {"c2", "s2"},
                             {"c2", "s3"},
                             {"c3", "s3"},
                             {"c4", "s4"}});
}

// nested example: two blocks {s1,s2} and {s3,s4,s5} under a flexible root
inline SystemSpec fig5(Kind kind = Kind::Collaborative) {
    std::vector<ClassDef> classes;
    for (int i = 1; i <= 5; i++) classes.push_back({"c" + std::to_string(i), rate_of(1, 5), {}, 0});
    classes.push_back({"c6", rate_of(1, 2), {}, 0});
    std::vector<ServerDef> servers;
    for (int j = 1; j <= 5; j++) servers.push_back({"s" + std::to_string(j), rate_of(7, 10), {}, 0});
    std::vector<Edge> edges = {{"c1", "s1"}, {"c2", "s1"}, {"c2", "s2"}, {"c3", "s3"},
                               {"c4", "s3"}, {"c4", "s4"}, {"c5", "s3"}, {"c5", "s4"},
                               {"c5", "s5"}};
    for (int j = 1; j <= 5; j++) edges.push_back({"c6", "s" + std::to_string(j)});
    return SystemSpec::make(kind, std::move(classes), std::move(servers), edges);
}

// non-nested 3x3 ring
inline SystemSpec ring3(Kind kind = Kind::Collaborative) {
    return SystemSpec::make(kind,
                            {{"c1", rate_of(2, 5), {}, 0},
                             {"c2", rate_of(2, 5), {}, 0},
                             {"c3", rate_of(2, 5), {}, 0}},
                            {{"s1", rate_of(1), {}, 0},
                             {"s2", rate_of(1), {}, 0},
                             {"s3", rate_of(1), {}, 0}},
                            {{"c1", "s1"},
                             {"c1", "s2"},
                             {"c2", "s2"},
                             {"c2", "s3"},
                             {"c3", "s1"},
                             {"c3", "s3"}});
}

// two fully flexible classes on three equal servers (symmetric activation)
inline SystemSpec symmetric3(Kind kind = Kind::NcRais) {
    std::vector<Edge> edges;
    for (int c = 1; c <= 2; c++)
        for (int s = 1; s <= 3; s++)
            edges.push_back({"c" + std::to_string(c), "s" + std::to_string(s)});
    return SystemSpec::make(kind, {{"c1", rate_of(1, 2), {}, 0}, {"c2", rate_of(1, 2), {}, 0}},
                            {{"s1", rate_of(1), {}, 0},
                             {"s2", rate_of(1), {}, 0},
                             {"s3", rate_of(1), {}, 0}},
                            edges);
}

// single class, single server type, buffer 1
inline SystemSpec dbm1() {
    return SystemSpec::make(Kind::DbmK, {{"c1", rate_of(1, 2), {}, 0}},
                            {{"t1", rate_of(1), {}, 0}}, {{"c1", "t1"}}, 1);
}

// two-sided matching with abandonments
inline SystemSpec dbma2() {
    return SystemSpec::make(Kind::Dbma,
                            {{"c1", rate_of(1, 2), rate_of(1, 4), 0},
                             {"c2", rate_of(2, 5), rate_of(1, 5), 0}},
                            {{"t1", rate_of(3, 5), rate_of(3, 10), 0},
                             {"t2", rate_of(1, 2), rate_of(1, 5), 0}},
                            {{"c1", "t1"}, {"c2", "t1"}, {"c2", "t2"}});
}

// matching on a triangle (the smallest stable general graph)
inline SystemSpec gm_triangle() {
    return SystemSpec::make(Kind::Gm,
                            {{"a", rate_of(1, 5), {}, 0},
                             {"b", rate_of(1, 4), {}, 0},
                             {"c", rate_of(3, 10), {}, 0}},
                            {}, {{"a", "b"}, {"b", "c"}, {"a", "c"}});
}

// paired arrivals, N-shaped compatibility
inline SystemSpec pbm2() {
    return SystemSpec::make(Kind::Pbm,
                            {{"c1", rate_of(3, 10), {}, 0}, {"c2", rate_of(7, 10), {}, 0}},
                            {{"t1", rate_of(1, 2), {}, 0}, {"t2", rate_of(1, 2), {}, 0}},
                            {{"c1", "t1"}, {"c2", "t1"}, {"c2", "t2"}});
}

// closed token network over the N compatibility
inline SystemSpec closed_tokens() {
    return SystemSpec::make(Kind::ClosedToken,
                            {{"c1", rate_of(1, 2), {}, 0}, {"c2", rate_of(1, 2), {}, 0}},
                            {{"t1", rate_of(1), {}, 0}, {"t2", rate_of(1), {}, 0}},
                            {{"c1", "t1"}, {"c2", "t1"}, {"c2", "t2"}});
}

// collaborative queue with abandonments
inline SystemSpec w_abandon() {
    return SystemSpec::make(Kind::Collaborative,
                            {{"c1", rate_of(3, 10), rate_of(1, 10), 0},
                             {"c2", rate_of(3, 10), rate_of(1, 5), 0},
                             {"c3", rate_of(1, 2), rate_of(1, 10), 0}},
                            {{"s1", rate_of(1), {}, 0}, {"s2", rate_of(1), {}, 0}},
                            {{"c1", "s1"}, {"c2", "s2"}, {"c3", "s1"}, {"c3", "s2"}});
}

}  // namespace oiq::fixtures
