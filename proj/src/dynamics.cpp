#include "oiq/dynamics.hpp"

#include <algorithm>
#include <deque>
#include <sstream>
#include <unordered_set>

namespace oiq {

Dynamics::Dynamics(const SystemSpec& spec, const ActivationTable* table, const OIRate* rate)
    : spec_(spec), table_(table), rate_(rate) {
    if ((spec.kind() == Kind::NcRais || spec.kind() == Kind::TokenRais) && !table_)
        throw Error(errc::input, "rais dynamics need an activation table");
    svc_rate_ = rate_ ? *rate_ : OIRate::collaborative();
}

bool Dynamics::discrete() const {
    return spec_.kind() == Kind::Gm || spec_.kind() == Kind::Pbm;
}

DState Dynamics::initial() const {
    DState st;
    if (spec_.kind() == Kind::ClosedToken)
        for (int j = 0; j < spec_.num_servers(); j++) st.srv.push_back(j);
    return st;
}

int Dynamics::measure(const DState& st) const {
    switch (spec_.kind()) {
        case Kind::NcAlis:
            return static_cast<int>(st.q.size()) + spec_.num_servers() -
                   static_cast<int>(st.srv.size());
        case Kind::Dbma:
            return static_cast<int>(st.q.size() + st.srv.size());
        default:
            return static_cast<int>(st.q.size());
    }
}

namespace {

ServerSet busy_set_of(const DState& st) {
    ServerSet b = 0;
    for (const auto& e : st.q)
        if (e.is_server) b |= (1u << e.id);
    return b;
}

// marginal OI service rate of the k'th busy token given the ordered busy list
std::vector<double> busy_deltas(const SystemSpec& spec, const std::vector<int>& busy,
                                const OIRate* rate) {
    std::vector<double> d(busy.size(), 0.0);
    if (!rate) {
        for (std::size_t k = 0; k < busy.size(); k++) d[k] = spec.mu(busy[k]);
        return d;
    }
    Counts x(spec.num_servers(), 0);
    double prev = 0;
    for (std::size_t k = 0; k < busy.size(); k++) {
        x[busy[k]] = 1;
        double cur = rate->mu(spec, x);
        d[k] = std::max(0.0, cur - prev);
        prev = cur;
    }
    return d;
}

}  // namespace

void Dynamics::transitions(const DState& st, std::vector<Transition>& out) const {
    out.clear();
    const int J = spec_.num_classes();
    const int M = spec_.num_servers();
    switch (spec_.kind()) {
        case Kind::Collaborative: {
            for (int c = 0; c < J; c++) {
                Transition t;
                t.to = st;
                t.to.q.push_back(job_entry(c));
                t.rate = spec_.lambda(c);
                t.ev.trigger = Ev::JobArrive;
                t.ev.cls = c;
                t.ev.enter_pos = static_cast<int>(st.q.size());
                out.push_back(std::move(t));
            }
            // pooled service: marginal rate per position (abandonments are
            // separate transitions, not folded into the marginals)
            Counts x(J, 0);
            const OIRate& r = svc_rate_;
            double prev = 0;
            for (int j = 0; j < static_cast<int>(st.q.size()); j++) {
                int c = st.q[j].id;
                x[c]++;
                double cur = r(spec_, x);
                double delta = cur - prev;
                prev = cur;
                if (delta > 0) {
                    Transition t;
                    t.to = st;
                    t.to.q.erase(t.to.q.begin() + j);
                    t.rate = delta;
                    t.ev.trigger = Ev::Complete;
                    t.ev.depart_cls = c;
                    t.ev.depart_pos = j;
                    out.push_back(std::move(t));
                }
                if (spec_.gamma(c) > 0) {
                    Transition t;
                    t.to = st;
                    t.to.q.erase(t.to.q.begin() + j);
                    t.rate = spec_.gamma(c);
                    t.ev.trigger = Ev::JobAbandon;
                    t.ev.cls = c;
                    t.ev.depart_cls = c;
                    t.ev.depart_pos = j;
                    out.push_back(std::move(t));
                }
            }
            break;
        }

        case Kind::NcAlis: {
            ServerSet idle = 0;
            for (int s : st.srv) idle |= (1u << s);
            for (int c = 0; c < J; c++) {
                Transition t;
                t.ev.trigger = Ev::JobArrive;
                t.ev.cls = c;
                t.rate = spec_.lambda(c);
                int take = -1;
                for (std::size_t k = 0; k < st.srv.size(); k++)
                    if (spec_.S(c) & (1u << st.srv[k])) { take = static_cast<int>(k); break; }
                t.to = st;
                if (take >= 0) {
                    t.ev.srv_left = st.srv[take];
                    t.ev.server = st.srv[take];
                    t.to.srv.erase(t.to.srv.begin() + take);
                } else {
                    t.to.q.push_back(job_entry(c));
                    t.ev.enter_pos = static_cast<int>(st.q.size());
                }
                out.push_back(std::move(t));
            }
            ServerSet busy = spec_.all_servers() & ~idle;
            for (int s : set_bits(busy)) {
                Transition t;
                t.ev.trigger = Ev::Complete;
                t.ev.server = s;
                t.rate = spec_.mu(s);
                t.to = st;
                int take = -1;
                for (std::size_t j = 0; j < st.q.size(); j++)
                    if (spec_.S(st.q[j].id) & (1u << s)) { take = static_cast<int>(j); break; }
                if (take >= 0) {
                    t.ev.depart_cls = st.q[take].id;
                    t.ev.depart_pos = take;
                    t.to.q.erase(t.to.q.begin() + take);
                } else {
                    t.ev.srv_joined = s;
                    t.to.srv.push_back(s);
                }
                out.push_back(std::move(t));
            }
            break;
        }

        case Kind::NcRais:
        case Kind::TokenRais: {
            ServerSet busy = busy_set_of(st);
            for (int c = 0; c < J; c++) {
                if ((spec_.S(c) & ~busy) == 0) {
                    Transition t;
                    t.to = st;
                    t.to.q.push_back(job_entry(c));
                    t.rate = spec_.lambda(c);
                    t.ev.trigger = Ev::JobArrive;
                    t.ev.cls = c;
                    t.ev.enter_pos = static_cast<int>(st.q.size());
                    out.push_back(std::move(t));
                } else {
                    for (int s : set_bits(spec_.S(c) & ~busy)) {
                        double p = table_->routing(busy, c, s);
                        if (!(p > 0)) continue;
                        Transition t;
                        t.to = st;
                        t.to.q.push_back(server_entry(s));
                        t.rate = spec_.lambda(c) * p;
                        t.ev.trigger = Ev::JobArrive;
                        t.ev.cls = c;
                        t.ev.busy_joined = s;
                        t.ev.enter_pos = static_cast<int>(st.q.size());
                        out.push_back(std::move(t));
                    }
                }
            }
            // completion at the k'th busy server/token
            std::vector<int> busy_order;
            std::vector<int> busy_pos;
            for (int i = 0; i < static_cast<int>(st.q.size()); i++)
                if (st.q[i].is_server) {
                    busy_order.push_back(st.q[i].id);
                    busy_pos.push_back(i);
                }
            auto deltas = busy_deltas(spec_, busy_order, rate_);
            for (std::size_t k = 0; k < busy_order.size(); k++) {
                if (!(deltas[k] > 0)) continue;
                int b = busy_order[k];
                int i = busy_pos[k];
                Transition t;
                t.rate = deltas[k];
                t.ev.trigger = Ev::Complete;
                t.ev.server = b;
                t.ev.depart_pos = i;
                int take = -1;
                for (int j = i + 1; j < static_cast<int>(st.q.size()); j++)
                    if (!st.q[j].is_server && (spec_.S(st.q[j].id) & (1u << b))) { take = j; break; }
                t.to = st;
                if (take >= 0) {
                    t.ev.depart_cls = st.q[take].id;
                    t.ev.moved_pos = take;
                    t.to.q[take] = server_entry(b);
                    t.to.q.erase(t.to.q.begin() + i);
                } else {
                    t.ev.busy_left = b;
                    t.to.q.erase(t.to.q.begin() + i);
                }
                out.push_back(std::move(t));
            }
            break;
        }

        case Kind::ClosedToken: {
            for (int c = 0; c < J; c++) {
                int take = -1;
                for (std::size_t k = 0; k < st.srv.size(); k++)
                    if (spec_.S(c) & (1u << st.srv[k])) { take = static_cast<int>(k); break; }
                if (take < 0) continue;  // lost job
                Transition t;
                t.to = st;
                t.rate = spec_.lambda(c);
                t.ev.trigger = Ev::JobArrive;
                t.ev.cls = c;
                t.ev.srv_left = st.srv[take];
                t.ev.busy_joined = st.srv[take];
                t.to.q.push_back(server_entry(st.srv[take]));
                t.to.srv.erase(t.to.srv.begin() + take);
                out.push_back(std::move(t));
            }
            std::vector<int> busy_order;
            for (const auto& e : st.q) busy_order.push_back(e.id);
            auto deltas = busy_deltas(spec_, busy_order, rate_);
            for (std::size_t k = 0; k < busy_order.size(); k++) {
                if (!(deltas[k] > 0)) continue;
                Transition t;
                t.to = st;
                t.rate = deltas[k];
                t.ev.trigger = Ev::Complete;
                t.ev.server = busy_order[k];
                t.ev.busy_left = busy_order[k];
                t.ev.srv_joined = busy_order[k];
                t.ev.depart_pos = static_cast<int>(k);
                t.to.q.erase(t.to.q.begin() + k);
                t.to.srv.push_back(busy_order[k]);
                out.push_back(std::move(t));
            }
            break;
        }

        case Kind::Dbm:
        case Kind::DbmK:
        case Kind::Dbma: {
            const bool abandon = spec_.kind() == Kind::Dbma;
            const int K = spec_.kind() == Kind::Dbm ? 0
                          : spec_.kind() == Kind::DbmK ? spec_.buffer_k()
                                                       : -1;  // -1: unbounded
            for (int c = 0; c < J; c++) {
                Transition t;
                t.rate = spec_.lambda(c);
                t.ev.trigger = Ev::JobArrive;
                t.ev.cls = c;
                int take = -1;
                for (std::size_t k = 0; k < st.srv.size(); k++)
                    if (spec_.S(c) & (1u << st.srv[k])) { take = static_cast<int>(k); break; }
                t.to = st;
                if (take >= 0) {
                    t.ev.srv_left = st.srv[take];
                    t.ev.server = st.srv[take];
                    t.to.srv.erase(t.to.srv.begin() + take);
                } else {
                    t.to.q.push_back(job_entry(c));
                    t.ev.enter_pos = static_cast<int>(st.q.size());
                }
                out.push_back(std::move(t));
            }
            for (int s = 0; s < M; s++) {
                Transition t;
                t.rate = spec_.mu(s);
                t.ev.trigger = Ev::ServerArrive;
                t.ev.server = s;
                int take = -1;
                for (std::size_t j = 0; j < st.q.size(); j++)
                    if (spec_.S(st.q[j].id) & (1u << s)) { take = static_cast<int>(j); break; }
                t.to = st;
                if (take >= 0) {
                    t.ev.depart_cls = st.q[take].id;
                    t.ev.depart_pos = take;
                    t.to.q.erase(t.to.q.begin() + take);
                } else if (K < 0 || static_cast<int>(st.srv.size()) < K) {
                    t.ev.srv_joined = s;
                    t.to.srv.push_back(s);
                } else {
                    continue;  // lost server
                }
                out.push_back(std::move(t));
            }
            if (abandon) {
                for (std::size_t j = 0; j < st.q.size(); j++) {
                    int c = st.q[j].id;
                    if (!(spec_.gamma(c) > 0)) continue;
                    Transition t;
                    t.to = st;
                    t.to.q.erase(t.to.q.begin() + j);
                    t.rate = spec_.gamma(c);
                    t.ev.trigger = Ev::JobAbandon;
                    t.ev.cls = c;
                    t.ev.depart_cls = c;
                    t.ev.depart_pos = static_cast<int>(j);
                    out.push_back(std::move(t));
                }
                for (std::size_t k = 0; k < st.srv.size(); k++) {
                    int s = st.srv[k];
                    if (!(spec_.nu(s) > 0)) continue;
                    Transition t;
                    t.to = st;
                    t.to.srv.erase(t.to.srv.begin() + k);
                    t.rate = spec_.nu(s);
                    t.ev.trigger = Ev::ServerAbandon;
                    t.ev.server = s;
                    t.ev.srv_left = s;
                    out.push_back(std::move(t));
                }
            }
            break;
        }

        case Kind::Gm: {
            for (int c = 0; c < J; c++) {
                Transition t;
                t.rate = spec_.lambda(c);  // slot probability
                t.ev.trigger = Ev::JobArrive;
                t.ev.cls = c;
                int take = -1;
                for (std::size_t j = 0; j < st.q.size(); j++)
                    if (spec_.S(c) & (1u << st.q[j].id)) { take = static_cast<int>(j); break; }
                t.to = st;
                if (take >= 0) {
                    t.ev.depart_cls = st.q[take].id;
                    t.ev.depart_pos = take;
                    t.to.q.erase(t.to.q.begin() + take);
                } else {
                    t.to.q.push_back(job_entry(c));
                    t.ev.enter_pos = static_cast<int>(st.q.size());
                }
                out.push_back(std::move(t));
            }
            break;
        }

        case Kind::Pbm: {
            double lam = spec_.total_lambda(), mu = spec_.total_mu();
            for (int c = 0; c < J; c++)
                for (int s = 0; s < M; s++) {
                    Transition t;
                    t.rate = (spec_.lambda(c) / lam) * (spec_.mu(s) / mu);
                    t.ev.trigger = Ev::PairArrive;
                    t.ev.cls = c;
                    t.ev.server = s;
                    t.to = st;
                    int jtake = -1;  // waiting server matched by the arriving job
                    for (std::size_t k = 0; k < st.srv.size(); k++)
                        if (spec_.S(c) & (1u << st.srv[k])) { jtake = static_cast<int>(k); break; }
                    int stake = -1;  // waiting job matched by the arriving server
                    for (std::size_t j = 0; j < st.q.size(); j++)
                        if (spec_.S(st.q[j].id) & (1u << s)) { stake = static_cast<int>(j); break; }
                    if (jtake >= 0) {
                        t.ev.srv_left = st.srv[jtake];
                        t.to.srv.erase(t.to.srv.begin() + jtake);
                    }
                    if (stake >= 0) {
                        t.ev.depart_cls = st.q[stake].id;
                        t.ev.depart_pos = stake;
                        t.to.q.erase(t.to.q.begin() + stake);
                    }
                    if (jtake < 0 && stake < 0) {
                        if (spec_.S(c) & (1u << s)) continue;  // the pair matches itself
                        t.to.q.push_back(job_entry(c));
                        t.to.srv.push_back(s);
                        t.ev.enter_pos = static_cast<int>(st.q.size());
                        t.ev.srv_joined = s;
                    } else if (jtake < 0) {
                        t.to.q.push_back(job_entry(c));
                        t.ev.enter_pos = static_cast<int>(st.q.size()) - 1;
                    } else if (stake < 0) {
                        t.to.srv.push_back(s);
                        t.ev.srv_joined = s;
                    }
                    out.push_back(std::move(t));
                }
            break;
        }
    }
}

std::vector<DState> Dynamics::enumerate(int bound, std::size_t max_states) const {
    std::vector<DState> states;
    std::unordered_set<DState, DStateHash> seen;
    std::deque<DState> frontier;
    DState init = initial();
    seen.insert(init);
    frontier.push_back(init);
    std::vector<Transition> ts;
    while (!frontier.empty()) {
        DState cur = std::move(frontier.front());
        frontier.pop_front();
        states.push_back(cur);
        transitions(cur, ts);
        for (auto& t : ts) {
            if (measure(t.to) > bound) continue;
            if (spec_.kind() == Kind::DbmK &&
                static_cast<int>(t.to.srv.size()) > spec_.buffer_k())
                continue;
            if (seen.insert(t.to).second) {
                if (seen.size() > max_states) {
                    std::ostringstream os;
                    os << "state enumeration exceeds " << max_states << " states";
                    throw Error(errc::state_space_overflow, os.str());
                }
                frontier.push_back(t.to);
            }
        }
    }
    return states;
}

}  // namespace oiq
