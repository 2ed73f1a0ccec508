#include "oiq/model.hpp"

#include <algorithm>
#include <bit>
#include <map>
#include <sstream>

namespace oiq {

double to_double(const Rat& q) { return q.convert_to<double>(); }

Rate rate_of(long long num, long long den) {
    if (den == 0) throw Error(errc::input, "rate with zero denominator");
    return Rate(Rat(num, den));
}

Rate rate_parse(const std::string& text) {
    std::string s = text;
    s.erase(std::remove_if(s.begin(), s.end(), [](char c) { return c == ' '; }), s.end());
    if (s.empty()) throw Error(errc::input, "empty rate literal");
    auto slash = s.find('/');
    try {
        if (slash != std::string::npos) {
            Rat num(s.substr(0, slash));
            Rat den(s.substr(slash + 1));
            if (den == 0) throw Error(errc::input, "rate with zero denominator: " + text);
            return Rate(Rat(num / den));
        }
        auto dot = s.find('.');
        if (dot == std::string::npos) return Rate(Rat(s));
        std::string digits = s.substr(0, dot) + s.substr(dot + 1);
        int frac = static_cast<int>(s.size() - dot - 1);
        Rat den = 1;
        for (int i = 0; i < frac; i++) den *= 10;
        return Rate(Rat(Rat(digits) / den));
    } catch (const Error&) {
        throw;
    } catch (const std::exception&) {
        throw Error(errc::input, "cannot parse rate literal: " + text);
    }
}

std::string kind_name(Kind k) {
    switch (k) {
        case Kind::Collaborative: return "collaborative";
        case Kind::NcAlis: return "nc_alis";
        case Kind::NcRais: return "nc_rais";
        case Kind::TokenRais: return "token_rais";
        case Kind::ClosedToken: return "closed_token";
        case Kind::Dbm: return "dbm";
        case Kind::DbmK: return "dbm_k";
        case Kind::Dbma: return "dbma";
        case Kind::Gm: return "gm";
        case Kind::Pbm: return "pbm";
    }
    return "?";
}

Kind kind_parse(const std::string& name) {
    static const std::map<std::string, Kind> table = {
        {"collaborative", Kind::Collaborative}, {"nc_alis", Kind::NcAlis},
        {"nc_rais", Kind::NcRais},             {"token_rais", Kind::TokenRais},
        {"closed_token", Kind::ClosedToken},   {"dbm", Kind::Dbm},
        {"dbm_k", Kind::DbmK},                 {"dbma", Kind::Dbma},
        {"gm", Kind::Gm},                      {"pbm", Kind::Pbm},
    };
    auto it = table.find(name);
    if (it == table.end()) throw Error(errc::input, "unknown model kind: " + name);
    return it->second;
}

int popcount(std::uint32_t s) { return std::popcount(s); }

std::vector<int> set_bits(std::uint32_t s) {
    std::vector<int> out;
    while (s) {
        int b = std::countr_zero(s);
        out.push_back(b);
        s &= s - 1;
    }
    return out;
}

SystemSpec SystemSpec::make(Kind kind, std::vector<ClassDef> classes,
                            std::vector<ServerDef> servers,
                            const std::vector<Edge>& edges, int buffer_k,
                            Options opts) {
    SystemSpec spec;
    spec.kind_ = kind;
    spec.buffer_k_ = buffer_k;
    const bool graph_on_classes = (kind == Kind::Gm);

    if (static_cast<int>(classes.size()) > kMaxEntities)
        throw Error(errc::input, "too many classes (max 24)");
    if (static_cast<int>(servers.size()) > kMaxEntities)
        throw Error(errc::input, "too many servers (max 24)");
    if (graph_on_classes && !servers.empty())
        throw Error(errc::input, "gm systems have no servers");
    if (kind == Kind::DbmK && buffer_k < 0)
        throw Error(errc::input, "dbm_k requires K >= 0");

    std::map<std::string, int> cidx, sidx;
    for (int i = 0; i < static_cast<int>(classes.size()); i++) {
        if (!cidx.emplace(classes[i].id, i).second)
            throw Error(errc::input, "duplicate class id: " + classes[i].id);
        if (!(classes[i].lambda.value > 0))
            throw Error(errc::input, "class " + classes[i].id + " needs a positive rate");
        if (classes[i].gamma && !(classes[i].gamma->value > 0))
            throw Error(errc::input, "class " + classes[i].id + " has a nonpositive abandonment rate");
        classes[i].servers = 0;
    }
    for (int j = 0; j < static_cast<int>(servers.size()); j++) {
        if (!sidx.emplace(servers[j].id, j).second)
            throw Error(errc::input, "duplicate server id: " + servers[j].id);
        if (!(servers[j].mu.value > 0))
            throw Error(errc::input, "server " + servers[j].id + " needs a positive rate");
        servers[j].classes = 0;
    }

    for (const auto& e : edges) {
        auto ci = cidx.find(e.cls);
        if (ci == cidx.end()) throw Error(errc::input, "edge names unknown class: " + e.cls);
        if (graph_on_classes) {
            auto cj = cidx.find(e.server);
            if (cj == cidx.end()) throw Error(errc::input, "edge names unknown class: " + e.server);
            if (ci->second == cj->second)
                throw Error(errc::input, "gm graph has a self loop at " + e.cls);
            classes[ci->second].servers |= (1u << cj->second);
            classes[cj->second].servers |= (1u << ci->second);
        } else {
            auto sj = sidx.find(e.server);
            if (sj == sidx.end()) throw Error(errc::input, "edge names unknown server: " + e.server);
            classes[ci->second].servers |= (1u << sj->second);
            servers[sj->second].classes |= (1u << ci->second);
        }
    }

    for (const auto& c : classes)
        if (c.servers == 0 && !(graph_on_classes && classes.size() == 1))
            throw Error(errc::input, "class " + c.id + " has no compatible " +
                                         (graph_on_classes ? "class" : "server"));
    if (opts.require_nonempty_server_classes)
        for (const auto& s : servers)
            if (s.classes == 0)
                throw Error(errc::input, "server " + s.id + " has no compatible class");

    if (kind == Kind::Gm) {
        double total = 0;
        for (const auto& c : classes) total += c.lambda.value;
        // The remainder of the slot is a no-event; probabilities must fit.
        if (total > 1.0 + 1e-12)
            throw Error(errc::input, "gm arrival probabilities sum to more than 1");
    }

    if (kind == Kind::Collaborative && opts.merge_collaborative_twins) {
        std::vector<ServerDef> merged;
        std::vector<int> remap(servers.size(), -1);
        for (int j = 0; j < static_cast<int>(servers.size()); j++) {
            int hit = -1;
            for (int m = 0; m < static_cast<int>(merged.size()); m++)
                if (merged[m].classes == servers[j].classes) { hit = m; break; }
            if (hit < 0) {
                remap[j] = static_cast<int>(merged.size());
                merged.push_back(servers[j]);
            } else {
                remap[j] = hit;
                merged[hit].mu.value += servers[j].mu.value;
                if (merged[hit].mu.exact && servers[j].mu.exact)
                    merged[hit].mu.q += servers[j].mu.q;
                else
                    merged[hit].mu.exact = false;
                merged[hit].id += "+" + servers[j].id;
            }
        }
        if (merged.size() != servers.size()) {
            for (auto& c : classes) {
                ServerSet ns = 0;
                for (int b : set_bits(c.servers)) ns |= (1u << remap[b]);
                c.servers = ns;
            }
            servers = std::move(merged);
        }
    }

    spec.classes_ = std::move(classes);
    spec.servers_ = std::move(servers);
    return spec;
}

int SystemSpec::class_index(const std::string& id) const {
    for (int i = 0; i < num_classes(); i++)
        if (classes_[i].id == id) return i;
    throw Error(errc::input, "unknown class id: " + id);
}

int SystemSpec::server_index(const std::string& id) const {
    for (int j = 0; j < num_servers(); j++)
        if (servers_[j].id == id) return j;
    throw Error(errc::input, "unknown server id: " + id);
}

bool SystemSpec::has_abandonments() const {
    for (const auto& c : classes_)
        if (c.gamma) return true;
    return false;
}

ClassSet SystemSpec::all_classes() const {
    return num_classes() == 0 ? 0 : ((1u << num_classes()) - 1);
}

ServerSet SystemSpec::all_servers() const {
    return num_servers() == 0 ? 0 : ((1u << num_servers()) - 1);
}

ServerSet SystemSpec::S_of(ClassSet A) const {
    ServerSet s = 0;
    for (int i : set_bits(A)) s |= classes_[i].servers;
    return s;
}

ClassSet SystemSpec::C_of(ServerSet B) const {
    if (kind_ == Kind::Gm) {
        // the graph is on classes: C and S coincide
        ClassSet c = 0;
        for (int i : set_bits(B)) c |= classes_[i].servers;
        return c;
    }
    ClassSet c = 0;
    for (int j : set_bits(B)) c |= servers_[j].classes;
    return c;
}

ClassSet SystemSpec::R_of(ServerSet B) const {
    ClassSet r = 0;
    for (int i = 0; i < num_classes(); i++)
        if (classes_[i].servers != 0 && (classes_[i].servers & ~B) == 0) r |= (1u << i);
    return r;
}

double SystemSpec::lambda_of(ClassSet A) const {
    double t = 0;
    for (int i : set_bits(A)) t += classes_[i].lambda.value;
    return t;
}

double SystemSpec::mu_of(ServerSet B) const {
    if (kind_ == Kind::Gm) {
        double t = 0;
        for (int i : set_bits(B)) t += classes_[i].lambda.value;
        return t;
    }
    double t = 0;
    for (int j : set_bits(B)) t += servers_[j].mu.value;
    return t;
}

double SystemSpec::gamma_of(ClassSet A) const {
    double t = 0;
    for (int i : set_bits(A)) t += gamma(i);
    return t;
}

double SystemSpec::nu_of(ServerSet B) const {
    double t = 0;
    for (int j : set_bits(B)) t += nu(j);
    return t;
}

bool SystemSpec::rates_exact() const {
    for (const auto& c : classes_) {
        if (!c.lambda.exact) return false;
        if (c.gamma && !c.gamma->exact) return false;
    }
    for (const auto& s : servers_) {
        if (!s.mu.exact) return false;
        if (s.nu && !s.nu->exact) return false;
    }
    return true;
}

Rat SystemSpec::lambda_exact(ClassSet A) const {
    Rat t = 0;
    for (int i : set_bits(A)) t += classes_[i].lambda.q;
    return t;
}

Rat SystemSpec::mu_exact(ServerSet B) const {
    Rat t = 0;
    for (int j : set_bits(B)) t += servers_[j].mu.q;
    return t;
}

SubsetRates subset_rates_classes(const SystemSpec& spec, ClassSet A) {
    if ((A & ~spec.all_classes()) != 0) throw Error(errc::input, "subset names unknown classes");
    SubsetRates r;
    r.S = spec.S_of(A);
    r.C = spec.C_of(r.S);
    r.lambda = spec.lambda_of(A);
    r.mu = spec.mu_of(r.S);
    r.R = spec.R_of(r.S);
    return r;
}

SubsetRates subset_rates_servers(const SystemSpec& spec, ServerSet B) {
    if ((B & ~spec.all_servers()) != 0) throw Error(errc::input, "subset names unknown servers");
    SubsetRates r;
    r.C = spec.C_of(B);
    r.S = spec.S_of(r.C);
    r.mu = spec.mu_of(B);
    r.lambda = spec.lambda_of(r.C);
    r.R = spec.R_of(B);
    return r;
}

namespace {

// PBM stability (complete resource pooling): strict drift on every subset
// whose pooled servers are a proper subset, both sides normalized.
StabilityVerdict pbm_stability(const SystemSpec& spec) {
    StabilityVerdict v;
    v.stable = true;
    v.slack = 1e300;
    double lam = spec.total_lambda(), mu = spec.total_mu();
    ClassSet all = spec.all_classes();
    for (ClassSet A = 1; A <= all; A++) {
        if ((A & ~all) != 0) continue;
        ServerSet S = spec.S_of(A);
        if (S == spec.all_servers()) continue;
        double margin = spec.mu_of(S) / mu - spec.lambda_of(A) / lam;
        if (margin < v.slack) v.slack = margin;
        if (margin <= 0) {
            v.stable = false;
            v.witness = A;
            return v;
        }
    }
    return v;
}

}  // namespace

StabilityVerdict check_stability(const SystemSpec& spec) {
    switch (spec.kind()) {
        case Kind::Dbma: {
            StabilityVerdict v;
            v.stable = true;
            v.vacuous = true;  // abandonments keep both queues tight
            return v;
        }
        case Kind::Gm:
        case Kind::ClosedToken:
            throw Error(errc::unsupported_query,
                        "no stability condition for kind " + kind_name(spec.kind()));
        case Kind::Pbm:
            return pbm_stability(spec);
        default:
            break;
    }
    if (spec.num_classes() > 20)
        throw Error(errc::input, "stability enumeration capped at 20 classes");
    StabilityVerdict v;
    v.stable = true;
    v.slack = 1e300;
    if (spec.has_abandonments()) {
        bool all = true;
        for (int i = 0; i < spec.num_classes(); i++)
            if (!spec.cls(i).gamma) all = false;
        if (all) {
            v.vacuous = true;
            return v;
        }
    }
    ClassSet allc = spec.all_classes();
    for (ClassSet A = 1; A <= allc && allc != 0; A++) {
        double margin = spec.mu_of_classes(A) - spec.lambda_of(A);
        if (margin < v.slack) v.slack = margin;
        if (margin <= 0) {
            v.stable = false;
            v.witness = A;
            return v;
        }
    }
    return v;
}

NestedResult nested_decompose(const SystemSpec& spec) {
    if (spec.kind() == Kind::Gm)
        throw Error(errc::unsupported_query, "nested decomposition needs a bipartite kind");
    NestedResult res;
    int J = spec.num_classes();
    for (int i = 0; i < J; i++)
        for (int j = i + 1; j < J; j++) {
            ServerSet a = spec.S(i), b = spec.S(j);
            ServerSet inter = a & b;
            bool ok = inter == 0 || (a != b && ((inter == a) || (inter == b)));
            if (!ok) {
                res.nested = false;
                res.witness = {i, j};
                return res;
            }
        }
    res.nested = true;
    res.tree.nodes.resize(J);
    for (int i = 0; i < J; i++) {
        auto& n = res.tree.nodes[i];
        n.cls = i;
        n.servers = spec.S(i);
        n.required = spec.R_of(n.servers);
        n.mu_hat = spec.mu_of(n.servers) - spec.lambda_of(n.required) + spec.lambda(i);
        n.rho = n.mu_hat > 0 ? spec.lambda(i) / n.mu_hat : 1e300;
        // parent: the smallest strict superset
        int best = -1;
        for (int j = 0; j < J; j++) {
            if (j == i) continue;
            ServerSet sj = spec.S(j);
            if ((spec.S(i) & ~sj) == 0 && sj != spec.S(i)) {
                if (best < 0 || popcount(sj) < popcount(spec.S(best))) best = j;
            }
        }
        n.parent = best;
    }
    for (int i = 0; i < J; i++) {
        int p = res.tree.nodes[i].parent;
        if (p < 0)
            res.tree.roots.push_back(i);
        else
            res.tree.nodes[p].children.push_back(i);
    }
    return res;
}

namespace {

SystemSpec rebuild(const SystemSpec& spec, ClassSet keep_classes, ServerSet keep_servers) {
    std::vector<ClassDef> classes;
    std::vector<ServerDef> servers;
    std::vector<Edge> edges;
    std::vector<int> smap(spec.num_servers(), -1);
    for (int j : set_bits(keep_servers)) {
        smap[j] = static_cast<int>(servers.size());
        ServerDef d = spec.server(j);
        d.classes = 0;
        servers.push_back(d);
    }
    for (int i : set_bits(keep_classes)) {
        ClassDef d = spec.cls(i);
        ServerSet s = d.servers & keep_servers;
        d.servers = 0;
        classes.push_back(d);
        for (int j : set_bits(s)) edges.push_back({spec.cls(i).id, spec.server(j).id});
    }
    SystemSpec::Options opts;
    opts.require_nonempty_server_classes = false;  // reductions may orphan servers
    return SystemSpec::make(spec.kind(), std::move(classes), std::move(servers), edges,
                            spec.buffer_k(), opts);
}

}  // namespace

SystemSpec reduce_without_classes(const SystemSpec& spec, ClassSet A) {
    if ((A & ~spec.all_classes()) != 0) throw Error(errc::input, "subset names unknown classes");
    if (spec.kind() == Kind::Gm) {
        // drop the classes and their graph edges
        std::vector<ClassDef> classes;
        std::vector<Edge> edges;
        for (int i : set_bits(spec.all_classes() & ~A)) {
            ClassDef d = spec.cls(i);
            for (int j : set_bits(d.servers & ~A))
                if (j > i) edges.push_back({spec.cls(i).id, spec.cls(j).id});
            d.servers = 0;
            classes.push_back(d);
        }
        return SystemSpec::make(Kind::Gm, std::move(classes), {}, edges);
    }
    return rebuild(spec, spec.all_classes() & ~A, spec.all_servers());
}

SystemSpec reduce_without_servers(const SystemSpec& spec, ServerSet B) {
    if ((B & ~spec.all_servers()) != 0) throw Error(errc::input, "subset names unknown servers");
    if (spec.kind() == Kind::Gm)
        throw Error(errc::unsupported_query, "server reduction undefined for gm");
    ClassSet keep = 0;
    for (int i = 0; i < spec.num_classes(); i++)
        if ((spec.S(i) & B) == 0) keep |= (1u << i);
    return rebuild(spec, keep, spec.all_servers() & ~B);
}

}  // namespace oiq
