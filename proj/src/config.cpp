#include "oiq/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace oiq {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& allowed,
                    const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw Error(errc::input, "unknown key '" + it.key() + "' in " + where);
}

Rate parse_rate(const json& v, const std::string& where) {
    if (v.is_string()) return rate_parse(v.get<std::string>());
    if (v.is_number_integer()) return rate_of(v.get<long long>());
    if (v.is_number_float()) return Rate(v.get<double>());
    throw Error(errc::input, where + " must be a number or a rate string");
}

SystemSpec parse_system(const json& sys) {
    reject_unknown(sys, {"kind", "classes", "servers", "edges", "buffer"}, "system");
    Kind kind = kind_parse(sys.at("kind").get<std::string>());
    std::vector<ClassDef> classes;
    for (const auto& c : sys.at("classes")) {
        reject_unknown(c, {"id", "lambda", "mu", "gamma"}, "class");
        ClassDef d;
        d.id = c.at("id").get<std::string>();
        // gm agents carry their arrival probability as "mu" in the paper's
        // notation; accept either name
        if (c.contains("lambda"))
            d.lambda = parse_rate(c.at("lambda"), "class lambda");
        else if (c.contains("mu"))
            d.lambda = parse_rate(c.at("mu"), "class mu");
        else
            throw Error(errc::input, "class " + d.id + " needs a rate");
        if (c.contains("gamma")) d.gamma = parse_rate(c.at("gamma"), "class gamma");
        classes.push_back(std::move(d));
    }
    std::vector<ServerDef> servers;
    if (sys.contains("servers"))
        for (const auto& s : sys.at("servers")) {
            reject_unknown(s, {"id", "mu", "nu"}, "server");
            ServerDef d;
            d.id = s.at("id").get<std::string>();
            d.mu = parse_rate(s.at("mu"), "server mu");
            if (s.contains("nu")) d.nu = parse_rate(s.at("nu"), "server nu");
            servers.push_back(std::move(d));
        }
    std::vector<Edge> edges;
    for (const auto& e : sys.at("edges")) {
        if (!e.is_array() || e.size() != 2)
            throw Error(errc::input, "edges must be [class, server] pairs");
        edges.push_back({e[0].get<std::string>(), e[1].get<std::string>()});
    }
    int buffer = sys.contains("buffer") ? sys.at("buffer").get<int>() : 0;
    return SystemSpec::make(kind, std::move(classes), std::move(servers), edges, buffer);
}

}  // namespace

ConfigDocument parse_config(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const std::exception& e) {
        throw Error(errc::input, std::string("config is not valid JSON: ") + e.what());
    }
    reject_unknown(doc, {"version", "system", "analysis", "output"}, "document");
    ConfigDocument cfg;
    if (doc.contains("version")) cfg.version = doc.at("version").get<int>();
    if (cfg.version != 1) throw Error(errc::input, "unsupported config version");
    cfg.spec = parse_system(doc.at("system"));

    if (doc.contains("analysis")) {
        const json& a = doc.at("analysis");
        reject_unknown(a,
                       {"tolerance", "truncation", "sim", "queries", "class", "model",
                        "cdf_points", "quantiles", "condition", "condition_on", "busy_weights"},
                       "analysis");
        if (a.contains("tolerance")) cfg.tolerance = a.at("tolerance").get<double>();
        if (a.contains("truncation")) cfg.truncation = a.at("truncation").get<int>();
        if (a.contains("queries")) cfg.queries_json = a.at("queries").dump();
        if (a.contains("class")) cfg.nested_class = a.at("class").get<std::string>();
        if (a.contains("model")) cfg.nested_model = a.at("model").get<std::string>();
        if (a.contains("cdf_points"))
            for (const auto& t : a.at("cdf_points")) cfg.cdf_points.push_back(t.get<double>());
        if (a.contains("quantiles"))
            for (const auto& p : a.at("quantiles")) cfg.quantiles.push_back(p.get<double>());
        if (a.contains("condition"))
            for (const auto& s : a.at("condition")) cfg.condition.push_back(s.get<std::string>());
        if (a.contains("condition_on"))
            cfg.condition_on_classes = a.at("condition_on").get<std::string>() == "classes";
        if (a.contains("busy_weights")) {
            const json& bw = a.at("busy_weights");
            reject_unknown(bw, {"immediate", "by_class", "provenance"}, "busy_weights");
            BusyWeights w;
            w.p_immediate = bw.at("immediate").get<double>();
            for (auto it = bw.at("by_class").begin(); it != bw.at("by_class").end(); ++it)
                w.by_class[cfg.spec.class_index(it.key())] = it.value().get<double>();
            if (bw.contains("provenance")) w.provenance = bw.at("provenance").get<std::string>();
            cfg.busy_weights = w;
        }
        if (a.contains("sim")) {
            const json& s = a.at("sim");
            reject_unknown(s,
                           {"seed", "horizon", "warmup", "replications", "record", "queue_cap"},
                           "sim");
            if (s.contains("seed")) cfg.sim.seed = s.at("seed").get<std::uint64_t>();
            if (s.contains("horizon")) cfg.sim.horizon = s.at("horizon").get<double>();
            if (s.contains("warmup")) cfg.sim.warmup = s.at("warmup").get<double>();
            if (s.contains("replications")) cfg.sim.replications = s.at("replications").get<int>();
            if (s.contains("queue_cap")) cfg.sim.queue_cap = s.at("queue_cap").get<std::size_t>();
            if (s.contains("record")) {
                const json& r = s.at("record");
                reject_unknown(r,
                               {"state_occupancy", "response_samples", "queue_waits",
                                "departure_gaps", "busy_set_occupancy", "queue_given_all_busy",
                                "wait_condition", "response_cap_per_class"},
                               "sim record");
                auto flag = [&](const char* k, bool cur) {
                    return r.contains(k) ? r.at(k).get<bool>() : cur;
                };
                auto& rec = cfg.sim.record;
                rec.state_occupancy = flag("state_occupancy", rec.state_occupancy);
                rec.response_samples = flag("response_samples", rec.response_samples);
                rec.queue_waits = flag("queue_waits", rec.queue_waits);
                rec.departure_gaps = flag("departure_gaps", rec.departure_gaps);
                rec.busy_set_occupancy = flag("busy_set_occupancy", rec.busy_set_occupancy);
                rec.queue_given_all_busy =
                    flag("queue_given_all_busy", rec.queue_given_all_busy);
                if (r.contains("response_cap_per_class"))
                    rec.response_cap_per_class = r.at("response_cap_per_class").get<int>();
                if (r.contains("wait_condition"))
                    for (const auto& id : r.at("wait_condition"))
                        rec.wait_condition.push_back(
                            cfg.spec.server_index(id.get<std::string>()));
            }
        }
    }
    if (doc.contains("output")) {
        const json& o = doc.at("output");
        reject_unknown(o, {"format", "precision"}, "output");
        if (o.contains("format")) {
            cfg.format = o.at("format").get<std::string>();
            if (cfg.format != "records" && cfg.format != "human")
                throw Error(errc::input, "output format must be 'records' or 'human'");
        }
        if (o.contains("precision")) cfg.precision = o.at("precision").get<int>();
    }
    return cfg;
}

ConfigDocument load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(errc::input, "cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

}  // namespace oiq
