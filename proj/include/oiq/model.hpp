#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace oiq {

// Exact rational used whenever the input rates were given as rationals;
// analyzers fall back to double otherwise.
using Rat = boost::multiprecision::cpp_rational;

double to_double(const Rat& q);

// A rate (or probability) carrying an exact rational alongside the double
// whenever one is known.
struct Rate {
    double value = 0.0;
    bool exact = false;
    Rat q;

    Rate() = default;
    Rate(double v) : value(v) {}                       // inexact
    Rate(const Rat& r) : value(to_double(r)), exact(true), q(r) {}
};

Rate rate_of(long long num, long long den = 1);
// Accepts "2", "0.315", "63/200".
Rate rate_parse(const std::string& text);

enum class errc {
    input,
    unsupported_query,
    instability,
    tolerance,
    oi_violation,
    construction_failure,
    state_space_overflow,
};

class Error : public std::runtime_error {
public:
    Error(errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    errc code() const { return code_; }

private:
    errc code_;
};

// Class and server subsets are bitmasks; the stability enumeration is capped
// at J <= 20 so 32 bits are plenty.
using ClassSet = std::uint32_t;
using ServerSet = std::uint32_t;

constexpr int kMaxEntities = 24;

enum class Kind {
    Collaborative,  // pooled service, cancel-on-completion redundancy
    NcAlis,         // noncollaborative, assign longest idle server
    NcRais,         // noncollaborative, random assignment to idle servers
    TokenRais,      // jobs wait for tokens, OI service over busy tokens
    ClosedToken,    // token loss network (no job queue), closed two-queue form
    Dbm,            // directed bipartite matching, servers never wait
    DbmK,           // directed bipartite matching, server buffer K
    Dbma,           // directed bipartite matching with abandonments
    Gm,             // discrete-time matching on a general (class) graph
    Pbm,            // discrete-time paired bipartite matching
};

std::string kind_name(Kind k);
Kind kind_parse(const std::string& name);

struct ClassDef {
    std::string id;
    Rate lambda;                  // arrival rate; for Gm the arrival probability
    std::optional<Rate> gamma;    // abandonment rate
    ServerSet servers = 0;        // S_i; for Gm the neighbor classes
};

struct ServerDef {
    std::string id;
    Rate mu;                      // service rate; Dbm*/Pbm server arrival rate
    std::optional<Rate> nu;       // server abandonment rate (Dbma)
    ClassSet classes = 0;         // C_j
};

struct Edge {
    std::string cls;
    std::string server;  // for Gm this is the second class id
};

// Immutable description of the bipartite system.  Collaborative specs merge
// servers with identical compatibility sets at construction (their pooled
// rate is all the product form can see).
struct SpecOptions {
    bool require_nonempty_server_classes = true;  // C_j != 0 (user input rule)
    bool merge_collaborative_twins = true;
};

class SystemSpec {
public:
    using Options = SpecOptions;

    SystemSpec() = default;  // the empty system

    static SystemSpec make(Kind kind,
                           std::vector<ClassDef> classes,
                           std::vector<ServerDef> servers,
                           const std::vector<Edge>& edges,
                           int buffer_k = 0,
                           Options opts = Options());

    Kind kind() const { return kind_; }
    int num_classes() const { return static_cast<int>(classes_.size()); }
    int num_servers() const { return static_cast<int>(servers_.size()); }
    int buffer_k() const { return buffer_k_; }

    const ClassDef& cls(int i) const { return classes_[i]; }
    const ServerDef& server(int j) const { return servers_[j]; }
    const std::vector<ClassDef>& classes() const { return classes_; }
    const std::vector<ServerDef>& servers() const { return servers_; }

    int class_index(const std::string& id) const;   // throws errc::input if unknown
    int server_index(const std::string& id) const;

    double lambda(int i) const { return classes_[i].lambda.value; }
    double mu(int j) const { return servers_[j].mu.value; }
    double gamma(int i) const { return classes_[i].gamma ? classes_[i].gamma->value : 0.0; }
    double nu(int j) const { return servers_[j].nu ? servers_[j].nu->value : 0.0; }
    bool has_abandonments() const;

    ServerSet S(int i) const { return classes_[i].servers; }
    ClassSet C(int j) const { return servers_[j].classes; }
    ClassSet all_classes() const;
    ServerSet all_servers() const;

    ServerSet S_of(ClassSet A) const;
    ClassSet C_of(ServerSet B) const;
    // Classes whose entire compatible set lies inside B.
    ClassSet R_of(ServerSet B) const;

    double lambda_of(ClassSet A) const;
    double mu_of(ServerSet B) const;
    double mu_of_classes(ClassSet A) const { return mu_of(S_of(A)); }
    double lambda_of_servers(ServerSet B) const { return lambda_of(C_of(B)); }
    double gamma_of(ClassSet A) const;
    double nu_of(ServerSet B) const;
    double total_lambda() const { return lambda_of(all_classes()); }
    double total_mu() const { return mu_of(all_servers()); }

    // Exact-rational variants; valid only when rates_exact().
    bool rates_exact() const;
    Rat lambda_exact(ClassSet A) const;
    Rat mu_exact(ServerSet B) const;

    bool empty() const { return classes_.empty(); }

private:
    Kind kind_ = Kind::Collaborative;
    int buffer_k_ = 0;
    std::vector<ClassDef> classes_;
    std::vector<ServerDef> servers_;
};

// ---- subset_rates -----------------------------------------------------------

struct SubsetRates {
    ServerSet S = 0;     // S(A) when queried by classes
    ClassSet C = 0;      // C(B) when queried by servers
    double lambda = 0;   // lambda(A) resp. lambda(C(B))
    double mu = 0;       // mu(S(A)) resp. mu(B)
    ClassSet R = 0;      // R(S(A)) resp. R(B)
};

SubsetRates subset_rates_classes(const SystemSpec& spec, ClassSet A);
SubsetRates subset_rates_servers(const SystemSpec& spec, ServerSet B);

// ---- stability --------------------------------------------------------------

struct StabilityVerdict {
    bool stable = false;
    bool vacuous = false;        // kinds that are always stable (abandonments)
    ClassSet witness = 0;        // violating subset when unstable
    double slack = 0;            // min over subsets of mu(A) - lambda(A)
};

// lambda(A) < mu(A) for every nonempty class subset; kinds without a
// stability notion raise errc::unsupported_query.  Enumeration is capped at
// J <= 20.
StabilityVerdict check_stability(const SystemSpec& spec);

// ---- nested decomposition ---------------------------------------------------

struct NestedTree {
    struct Node {
        int cls = -1;
        int parent = -1;             // -1 for roots
        std::vector<int> children;   // class indices
        ServerSet servers = 0;       // S_i
        ClassSet required = 0;       // R(S_i)
        double mu_hat = 0;           // mu(S_i) - lambda(R(S_i)) + lambda_i
        double rho = 0;              // lambda_i / mu_hat
    };
    std::vector<Node> nodes;         // indexed by class
    std::vector<int> roots;
};

struct NestedResult {
    bool nested = false;
    NestedTree tree;
    std::pair<int, int> witness{-1, -1};  // classes violating the trichotomy
};

NestedResult nested_decompose(const SystemSpec& spec);

// ---- reductions -------------------------------------------------------------

// without_classes(A): drop the classes in A, keep all servers.
// without_servers(B): drop the servers in B and every class with S_i
// intersecting B.  Collaborative twins are re-merged afterwards.
SystemSpec reduce_without_classes(const SystemSpec& spec, ClassSet A);
SystemSpec reduce_without_servers(const SystemSpec& spec, ServerSet B);

int popcount(std::uint32_t s);
std::vector<int> set_bits(std::uint32_t s);

}  // namespace oiq
