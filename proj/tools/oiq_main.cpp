#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "oiq/compare.hpp"
#include "oiq/config.hpp"
#include "oiq/generator.hpp"
#include "oiq/report.hpp"

using namespace oiq;
using nlohmann::json;

namespace {

std::string set_names_classes(const SystemSpec& spec, ClassSet A) {
    std::string out;
    for (int i : set_bits(A)) {
        if (!out.empty()) out += ",";
        out += spec.cls(i).id;
    }
    return "{" + out + "}";
}

std::string set_names_servers(const SystemSpec& spec, ServerSet B) {
    std::string out;
    for (int j : set_bits(B)) {
        if (!out.empty()) out += ",";
        out += spec.server(j).id;
    }
    return "{" + out + "}";
}

bool needs_activation(const SystemSpec& spec) {
    return spec.kind() == Kind::NcRais || spec.kind() == Kind::TokenRais;
}

void add_dist_records(Report& rep, const std::string& prefix, const ResponseDist& dist,
                      const ConfigDocument& cfg) {
    std::string tag = dist.provenance() == "analytic-exact" ? "analytic-exact"
                                                            : "analytic-" + dist.provenance();
    rep.add({prefix + ".mean", dist.mean(), tag, 0, {}});
    rep.add({prefix + ".variance", dist.variance(), tag, 0, {}});
    rep.add({prefix + ".atom_at_zero", dist.atom_at_zero(), tag, 0, {}});
    for (double t : cfg.cdf_points)
        rep.add({prefix + ".cdf(" + format_double(t, 6) + ")", dist.cdf(t), tag, 0, {}});
    for (double p : cfg.quantiles)
        rep.add({prefix + ".quantile(" + format_double(p, 6) + ")", dist.quantile(p), tag, 0, {}});
    int bi = 0;
    for (const auto& b : dist.branches()) {
        std::ostringstream os;
        for (const auto& s : b.stages) {
            if (os.tellp() > 0) os << " + ";
            if (s.p >= 1.0)
                os << "Exp(" << format_double(s.rate, 6) << ")";
            else
                os << "ZeroOr(p=" << format_double(s.p, 6) << ",Exp(" << format_double(s.rate, 6)
                   << "))";
        }
        std::string stages = os.tellp() > 0 ? os.str() : "0";
        rep.add({prefix + ".branch[" + std::to_string(bi++) + "]", b.weight, tag, 0,
                 {{"stages", stages}}});
    }
}

int cmd_check(const ConfigDocument& cfg, Report& rep) {
    const SystemSpec& spec = cfg.spec;
    int exit_code = 0;
    try {
        auto v = check_stability(spec);
        rep.add({"stable", v.stable, "analytic-exact", 0, {}});
        if (v.vacuous) rep.back().extra["note"] = "always stable (abandonments)";
        if (!v.stable) {
            rep.add({"witness", set_names_classes(spec, v.witness), "analytic-exact", 0, {}});
            exit_code = 2;
        } else if (!v.vacuous && spec.num_classes() <= 12 && spec.kind() != Kind::Pbm) {
            for (ClassSet A = 1; A <= spec.all_classes(); A++) {
                double margin = spec.mu_of_classes(A) - spec.lambda_of(A);
                rep.add({"margin" + set_names_classes(spec, A), margin, "analytic-exact", 0, {}});
            }
        }
    } catch (const Error& e) {
        if (e.code() != errc::unsupported_query) throw;
        rep.add({"stable", std::string("no-stability-notion"), "analytic-exact", 0, {}});
    }
    if (spec.kind() != Kind::Gm) {
        auto dec = nested_decompose(spec);
        rep.add({"nested", dec.nested, "analytic-exact", 0, {}});
        if (!dec.nested) {
            rep.add({"nested.witness",
                     spec.cls(dec.witness.first).id + "," + spec.cls(dec.witness.second).id,
                     "analytic-exact", 0, {}});
        } else {
            for (const auto& n : dec.tree.nodes) {
                Record r{"nested.class." + spec.cls(n.cls).id,
                         n.parent < 0 ? std::string("root") : spec.cls(n.parent).id,
                         "analytic-exact",
                         0,
                         {}};
                r.extra["mu_hat"] = format_double(n.mu_hat, 12);
                r.extra["rho"] = format_double(n.rho, 12);
                rep.add(std::move(r));
            }
        }
    }
    return exit_code;
}

int cmd_means(const ConfigDocument& cfg, Report& rep) {
    auto empty = pi_empty_recursive(cfg.spec);
    Record r{"pi_empty", empty.value, "analytic-exact", 0, {}};
    if (empty.exact) r.extra["exact"] = empty.value_exact.str();
    rep.add(std::move(r));
    for (int k = 0; k < cfg.spec.num_servers(); k++) {
        Record pr{"psi." + cfg.spec.server(k).id, empty.psi[k], "analytic-exact", 0, {}};
        if (empty.exact) pr.extra["exact"] = empty.psi_exact[k].str();
        rep.add(std::move(pr));
    }
    auto means = mean_counts(cfg.spec);
    for (int i = 0; i < cfg.spec.num_classes(); i++) {
        Record lr{"L." + cfg.spec.cls(i).id, means.Li[i], "analytic-exact", 0, {}};
        if (means.exact) lr.extra["exact"] = means.Li_exact[i].str();
        rep.add(std::move(lr));
    }
    Record lr{"L", means.L, "analytic-exact", 0, {}};
    if (means.exact) lr.extra["exact"] = means.L_exact.str();
    rep.add(std::move(lr));
    return 0;
}

int cmd_activation(const ConfigDocument& cfg, Report& rep, const std::string& out_path) {
    const SystemSpec& spec = cfg.spec;
    auto table = build_activation(spec);
    auto verdict = verify_assignment_condition(spec, table, cfg.tolerance);
    rep.add({"assignment_condition", verdict.ok, "analytic-exact", verdict.max_deviation, {}});
    std::size_t n_sets = std::size_t(1) << spec.num_servers();
    for (ServerSet B = 0; B < n_sets; B++)
        for (int s = 0; s < spec.num_servers(); s++) {
            if (B & (1u << s)) continue;
            double rate = table.rate(B, s);
            if (!(rate > 0)) continue;
            Record r{"activation" + set_names_servers(spec, B) + "->" + spec.server(s).id, rate,
                     "analytic-exact", 0, {}};
            for (int c = 0; c < spec.num_classes(); c++) {
                double p = table.routing(B, c, s);
                if (p > 0) r.extra["p." + spec.cls(c).id] = format_double(p, 17);
            }
            rep.add(std::move(r));
        }
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        if (!out) throw Error(errc::input, "cannot write table to " + out_path);
        out << activation_to_json(spec, table);
        rep.add({"table_exported", out_path, "analytic-exact", 0, {}});
    }
    return verdict.ok ? 0 : 3;
}

int cmd_nested(const ConfigDocument& cfg, Report& rep) {
    if (cfg.nested_class.empty()) throw Error(errc::input, "nested command needs analysis.class");
    int cls = cfg.spec.class_index(cfg.nested_class);
    ResponseModel model;
    if (cfg.nested_model == "collab") model = ResponseModel::Collab;
    else if (cfg.nested_model == "nc_all_busy") model = ResponseModel::NcAllBusy;
    else if (cfg.nested_model == "nc_given_busy") model = ResponseModel::NcGivenBusy;
    else if (cfg.nested_model == "nc_equal_rates") model = ResponseModel::NcEqualRates;
    else throw Error(errc::input, "unknown response model: " + cfg.nested_model);
    ServerSet busy = 0;
    for (const auto& id : cfg.condition) busy |= (1u << cfg.spec.server_index(id));
    const BusyWeights* weights = cfg.busy_weights ? &*cfg.busy_weights : nullptr;
    auto eff = effective_rates(cfg.spec);
    for (int i = 0; i < cfg.spec.num_classes(); i++) {
        Record r{"mu_hat." + cfg.spec.cls(i).id, eff.mu_hat[i], "analytic-exact", 0, {}};
        r.extra["rho"] = format_double(eff.rho[i], 17);
        rep.add(std::move(r));
    }
    ResponseDist dist = response_time(cfg.spec, cls, model, busy, weights);
    add_dist_records(rep, "response." + cfg.nested_class + "." + cfg.nested_model, dist, cfg);
    return 0;
}

DState state_from_json(const SystemSpec& spec, const json& q) {
    DState st;
    if (q.contains("queue"))
        for (const auto& id : q.at("queue"))
            st.q.push_back(job_entry(spec.class_index(id.get<std::string>())));
    if (q.contains("jobs"))
        for (const auto& id : q.at("jobs"))
            st.q.push_back(job_entry(spec.class_index(id.get<std::string>())));
    if (q.contains("entries"))
        for (const auto& e : q.at("entries")) {
            if (e.contains("class"))
                st.q.push_back(job_entry(spec.class_index(e.at("class").get<std::string>())));
            else
                st.q.push_back(server_entry(spec.server_index(e.at("server").get<std::string>())));
        }
    if (q.contains("busy"))
        for (const auto& id : q.at("busy"))
            st.q.push_back(server_entry(spec.server_index(id.get<std::string>())));
    if (q.contains("idle"))
        for (const auto& id : q.at("idle")) st.srv.push_back(spec.server_index(id.get<std::string>()));
    if (q.contains("servers"))
        for (const auto& id : q.at("servers"))
            st.srv.push_back(spec.server_index(id.get<std::string>()));
    return st;
}

int cmd_analyze(const ConfigDocument& cfg, Report& rep) {
    const SystemSpec& spec = cfg.spec;
    ActivationTable table;
    if (needs_activation(spec)) table = build_activation(spec);
    const ActivationTable* tbl = needs_activation(spec) ? &table : nullptr;
    json queries = cfg.queries_json.empty() ? json::array({json{{"type", "pi_empty"}}})
                                            : json::parse(cfg.queries_json);
    int qi = 0;
    for (const auto& q : queries) {
        std::string type = q.at("type").get<std::string>();
        std::string name = "q" + std::to_string(qi++) + "." + type;
        if (type == "pi_empty" || type == "normalizing_constant") {
            NormConstant G = normalizing_constant(spec, cfg.tolerance, tbl);
            if (type == "pi_empty")
                rep.add({name, 1.0 / G.G, "analytic-truncated", G.tail_bound / G.G, {}});
            else
                rep.add({name, G.G, "analytic-truncated", G.tail_bound, {}});
        } else if (type == "detailed") {
            bool normalized = q.value("normalized", true);
            DState st = state_from_json(spec, q);
            PiValue v = pi_detailed(spec, st, normalized, cfg.tolerance, tbl);
            Record r{name, v.value, normalized ? "analytic-truncated" : "analytic-exact",
                     v.tail_bound, {}};
            r.extra["valid"] = v.valid ? "true" : "false";
            rep.add(std::move(r));
        } else if (type == "aggregate") {
            Counts x(spec.num_classes(), 0);
            for (auto it = q.at("counts").begin(); it != q.at("counts").end(); ++it)
                x[spec.class_index(it.key())] = it.value().get<int>();
            int total = 0;
            for (int v : x) total += v;
            PhiTable phi(spec, OIRate::for_kind(spec), total);
            bool normalized = q.value("normalized", true);
            auto v = pi_aggregate(spec, phi, x, normalized, cfg.tolerance);
            Record r{name, v.value, normalized ? "analytic-truncated" : "analytic-exact",
                     v.tail_bound, {}};
            r.extra["phi"] = format_double(phi.phi(x), 17);
            rep.add(std::move(r));
        } else if (type == "balanced_rates") {
            Counts x(spec.num_classes(), 0);
            for (auto it = q.at("counts").begin(); it != q.at("counts").end(); ++it)
                x[spec.class_index(it.key())] = it.value().get<int>();
            int total = 0;
            for (int v : x) total += v;
            PhiTable phi(spec, OIRate::for_kind(spec), total);
            auto rates = balanced_rates(phi, x);
            for (int i = 0; i < spec.num_classes(); i++)
                rep.add({name + ".phi." + spec.cls(i).id, rates[i], "analytic-exact", 0, {}});
        } else if (type == "partial") {
            std::string variant = q.value("variant", "collab");
            PartialState ps;
            if (variant == "collab")
                for (const auto& id : q.at("busy"))
                    ps.busy.push_back(spec.class_index(id.get<std::string>()));
            else
                for (const auto& id : q.at("busy"))
                    ps.busy.push_back(spec.server_index(id.get<std::string>()));
            for (const auto& n : q.at("gaps")) ps.gaps.push_back(n.get<int>());
            if (q.contains("idle")) {
                std::vector<int> idle;
                for (const auto& id : q.at("idle"))
                    idle.push_back(spec.server_index(id.get<std::string>()));
                ps.idle = idle;
            }
            PartialVariant pv = variant == "collab"  ? PartialVariant::Collab
                                : variant == "alis" ? PartialVariant::Alis
                                                    : PartialVariant::Rais;
            bool normalized = q.value("normalized", true);
            auto v = pi_partial_agg(spec, ps, pv, tbl, normalized, cfg.tolerance);
            Record r{name, v.value, normalized ? "analytic-truncated" : "analytic-exact", 0, {}};
            r.extra["valid"] = v.valid ? "true" : "false";
            rep.add(std::move(r));
        } else if (type == "cond_queue_time") {
            int cls = spec.class_index(q.at("class").get<std::string>());
            bool on_classes = q.value("on", "servers") == std::string("classes");
            std::vector<int> cond;
            for (const auto& id : q.at("condition"))
                cond.push_back(on_classes ? spec.class_index(id.get<std::string>())
                                          : spec.server_index(id.get<std::string>()));
            ResponseDist d = cond_queue_time(spec, cls, cond, on_classes);
            add_dist_records(rep, name, d, cfg);
        } else {
            throw Error(errc::input, "unknown query type: " + type);
        }
    }
    return 0;
}

std::string render_key(const std::vector<int>& key) {
    std::ostringstream os;
    bool sep_seen = false;
    for (int v : key) {
        if (v == -1 && !sep_seen) {
            os << "|";
            sep_seen = true;
            continue;
        }
        os << (v <= -2 ? "s" + std::to_string(-v - 2) : std::to_string(v)) << " ";
    }
    return os.str();
}

int cmd_simulate(const ConfigDocument& cfg, Report& rep) {
    const SystemSpec& spec = cfg.spec;
    ActivationTable table;
    const ActivationTable* tbl = nullptr;
    if (needs_activation(spec)) {
        table = build_activation(spec);
        tbl = &table;
    }
    SimEstimate est = simulate(spec, cfg.sim, tbl);
    rep.add({"sim.seed", double(est.seed), "simulated", 0, {}});
    rep.add({"sim.replications", double(est.replications), "simulated", 0, {}});
    rep.add({"sim.events", double(est.events), "simulated", 0, {}});
    if (est.aborted > 0)
        rep.add({"sim.aborted_replications", double(est.aborted), "simulated", 0, {}});
    std::vector<std::pair<double, const std::vector<int>*>> top;
    for (const auto& [k, st] : est.occupancy) top.push_back({st.mean, &k});
    std::sort(top.begin(), top.end(), [](const auto& a, const auto& b) {
        return a.first > b.first || (a.first == b.first && *a.second < *b.second);
    });
    int limit = 20;
    for (const auto& [mean, key] : top) {
        if (limit-- == 0) break;
        auto st = est.occupancy.at(*key);
        rep.add({"occupancy[" + render_key(*key) + "]", st.mean, "simulated", st.se, {}});
    }
    for (int c = 0; c < spec.num_classes(); c++) {
        const auto& xs = est.response[c];
        if (xs.empty()) continue;
        double m = 0;
        for (double x : xs) m += x;
        m /= double(xs.size());
        double ss = 0;
        for (double x : xs) ss += (x - m) * (x - m);
        double se = xs.size() > 1 ? std::sqrt(ss / (xs.size() - 1) / xs.size()) : 0;
        Record r{"response_mean." + spec.cls(c).id, m, "simulated", se, {}};
        r.extra["samples"] = std::to_string(xs.size());
        rep.add(std::move(r));
    }
    return 0;
}

int cmd_validate(const ConfigDocument& cfg, Report& rep) {
    const SystemSpec& spec = cfg.spec;
    bool ok = true;
    ActivationTable table;
    const ActivationTable* tbl = nullptr;
    if (needs_activation(spec)) {
        table = build_activation(spec);
        tbl = &table;
        auto verdict = verify_assignment_condition(spec, table, 1e-10);
        rep.add({"validate.assignment_condition", verdict.ok, "analytic-exact",
                 verdict.max_deviation, {}});
        ok = ok && verdict.ok;
    }
    try {
        auto v = check_stability(spec);
        rep.add({"validate.stable", v.stable, "analytic-exact", 0, {}});
        if (!v.stable) {
            rep.add({"validate.witness", set_names_classes(spec, v.witness), "analytic-exact", 0, {}});
            return 2;
        }
    } catch (const Error& e) {
        if (e.code() != errc::unsupported_query) throw;
    }

    auto sweep = partial_balance_sweep(spec, 4, tbl);
    bool bal_ok = sweep.max_residual <= 1e-9;
    Record br{"validate.partial_balance", bal_ok, "analytic-exact", sweep.max_residual, {}};
    br.extra["states"] = std::to_string(sweep.states);
    rep.add(std::move(br));
    ok = ok && bal_ok;

    int trunc = std::min(cfg.truncation, 6);
    auto gen = generator_solve(spec, trunc, tbl);
    double total_weight = 0;
    std::vector<double> weights(gen.states.size());
    for (std::size_t i = 0; i < gen.states.size(); i++) {
        weights[i] = state_weight(spec, gen.states[i], tbl).value;
        total_weight += weights[i];
    }
    double max_rel = 0;
    for (std::size_t i = 0; i < gen.states.size(); i++) {
        double p = weights[i] / total_weight;
        max_rel = std::max(max_rel, std::fabs(p - gen.pi[i]) / std::max(p, 1e-300));
    }
    bool gen_ok = max_rel <= 1e-8;
    Record gr{"validate.generator_agreement", gen_ok, "analytic-exact", max_rel, {}};
    gr.extra["states"] = std::to_string(gen.states.size());
    gr.extra["residual"] = format_double(gen.residual, 3);
    rep.add(std::move(gr));
    ok = ok && gen_ok;

    if (spec.kind() == Kind::Collaborative && !spec.has_abandonments()) {
        auto empty = pi_empty_recursive(spec);
        NormConstant G = normalizing_constant(spec, 1e-12);
        double gap = std::fabs(empty.value - 1.0 / G.G) / empty.value;
        bool pe_ok = gap <= 1e-9;
        rep.add({"validate.pi_empty_agreement", pe_ok, "analytic-truncated", gap, {}});
        ok = ok && pe_ok;
    }

    SimConfig sim = cfg.sim;
    sim.horizon = std::min(sim.horizon, 2e4);
    sim.replications = std::min(sim.replications, 4);
    SimEstimate est = simulate(spec, sim, tbl);
    NormConstant G = normalizing_constant(spec, cfg.tolerance, tbl);
    auto analytic = [&](const std::vector<int>& key) {
        DState st;
        bool in_srv = false;
        for (int v : key) {
            if (v == -1 && !in_srv) {
                in_srv = true;
                continue;
            }
            if (in_srv) st.srv.push_back(v);
            else if (v <= -2) st.q.push_back(server_entry(-v - 2));
            else st.q.push_back(job_entry(v));
        }
        return state_weight(spec, st, tbl).value / G.G;
    };
    auto tv = tv_distance(est.occupancy, analytic);
    bool tv_ok = tv.tv <= 0.05;
    Record tr{"validate.sim_tv", tv_ok, "simulated", tv.tv, {}};
    tr.extra["states"] = std::to_string(tv.states);
    rep.add(std::move(tr));
    ok = ok && tv_ok;

    rep.add({"validate.ok", ok, "analytic-exact", 0, {}});
    return ok ? 0 : 3;
}

int dispatch(const std::string& command, ConfigDocument& cfg, Report& rep,
             const std::string& out_path) {
    if (command == "check") return cmd_check(cfg, rep);
    if (command == "means") return cmd_means(cfg, rep);
    if (command == "activation") return cmd_activation(cfg, rep, out_path);
    if (command == "nested") return cmd_nested(cfg, rep);
    if (command == "analyze") return cmd_analyze(cfg, rep);
    if (command == "simulate") return cmd_simulate(cfg, rep);
    if (command == "validate") return cmd_validate(cfg, rep);
    throw Error(errc::input, "unknown command: " + command);
}

const char* errc_name(errc c) {
    switch (c) {
        case errc::input: return "input";
        case errc::unsupported_query: return "unsupported-query";
        case errc::instability: return "instability";
        case errc::tolerance: return "tolerance";
        case errc::oi_violation: return "oi-violation";
        case errc::construction_failure: return "construction-failure";
        case errc::state_space_overflow: return "state-space-overflow";
    }
    return "unknown";
}

int exit_code_of(errc c) {
    switch (c) {
        case errc::instability: return 2;
        case errc::tolerance: return 3;
        default: return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"exact analysis and simulation for queueing and matching systems with "
                 "bipartite compatibilities"};
    std::string command, config_path, out_path, format_override;
    std::uint64_t seed = 0;
    double horizon = 0, tolerance = 0;
    int replications = 0, truncation = -1;

    app.add_option("cmd", command,
                   "check | analyze | activation | nested | means | simulate | validate");
    app.add_option("--command", command, "command (alternative to the positional form)");
    app.add_option("--config", config_path, "configuration file")->required();
    app.add_option("--out", out_path, "write the report (or activation table) here");
    app.add_option("--format", format_override, "records | human");
    auto* seed_opt = app.add_option("--seed", seed, "simulation seed override");
    app.add_option("--horizon", horizon, "simulation horizon override");
    app.add_option("--replications", replications, "simulation replications override");
    app.add_option("--tolerance", tolerance, "normalization tolerance override");
    app.add_option("--truncation", truncation, "generator truncation override");
    CLI11_PARSE(app, argc, argv);

    Report rep;
    int code = 0;
    std::string format = "records";
    int precision = 17;
    std::string report_out = out_path;
    try {
        if (command.empty()) throw Error(errc::input, "no command given");
        ConfigDocument cfg = load_config(config_path);
        if (seed_opt->count() > 0) cfg.sim.seed = seed;
        if (horizon > 0) cfg.sim.horizon = horizon;
        if (replications > 0) cfg.sim.replications = replications;
        if (tolerance > 0) cfg.tolerance = tolerance;
        if (truncation >= 0) cfg.truncation = truncation;
        if (!format_override.empty()) cfg.format = format_override;
        format = cfg.format;
        precision = cfg.precision;
        if (command == "activation") report_out.clear();  // --out holds the table there
        code = dispatch(command, cfg, rep, command == "activation" ? out_path : "");
    } catch (const Error& e) {
        Record r{"error", std::string(e.what()), "error", 0, {}};
        r.extra["reason"] = errc_name(e.code());
        rep.add(std::move(r));
        code = exit_code_of(e.code());
    } catch (const std::exception& e) {
        Record r{"error", std::string(e.what()), "error", 0, {}};
        r.extra["reason"] = "internal";
        rep.add(std::move(r));
        code = 1;
    }

    std::string text =
        format == "human" ? rep.to_human(std::min(precision, 12)) : rep.to_records(precision);
    if (!report_out.empty()) {
        std::ofstream out(report_out);
        out << text;
    } else {
        std::cout << text;
    }
    return code;
}
