#include "oiq/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "oiq/rng.hpp"

namespace oiq {

std::vector<int> state_key(const DState& st) {
    std::vector<int> key;
    key.reserve(st.q.size() + st.srv.size() + 1);
    for (const auto& e : st.q) key.push_back(e.is_server ? -(e.id + 2) : e.id);
    key.push_back(-1);
    for (int s : st.srv) key.push_back(s);
    return key;
}

namespace {

int env_threads() {
    if (const char* env = std::getenv("OIQ_THREADS")) {
        int n = std::atoi(env);
        if (n > 0) return n;
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

struct RepResult {
    std::map<std::vector<int>, double> occupancy;
    std::map<std::vector<int>, double> all_busy;
    std::map<ServerSet, double> busy_sets;
    std::vector<std::vector<double>> response, queue_wait, wait_cond;
    std::vector<double> gaps;
    long long events = 0;
    bool aborted = false;
};

class RepRunner {
public:
    RepRunner(const SystemSpec& spec, const SimConfig& cfg, const Dynamics& dyn, int rep)
        : spec_(spec), cfg_(cfg), dyn_(dyn), rng_(cfg.seed, std::uint64_t(rep) + 1) {
        res_.response.resize(spec.num_classes());
        res_.queue_wait.resize(spec.num_classes());
        res_.wait_cond.resize(spec.num_classes());
        for (int c = 0; c < spec.num_classes(); c++) {
            double expected = spec.lambda(c) * cfg.horizon;
            stride_.push_back(std::max(1, static_cast<int>(expected /
                                              std::max(1, cfg.record.response_cap_per_class))));
        }
        counters_.assign(spec.num_classes(), 0);
    }

    RepResult run() {
        DState st = dyn_.initial();
        const double warm_end = cfg_.warmup_time();
        const double end = warm_end + cfg_.horizon;
        double now = 0;
        double busy_window_time = 0;
        std::vector<Transition> ts;
        const bool discrete = dyn_.discrete();
        while (now < end) {
            dyn_.transitions(st, ts);
            double total = 0;
            for (const auto& t : ts) total += t.rate;
            double dt;
            int choice = -1;
            if (discrete) {
                dt = 1.0;
                double u = rng_.next_unit();
                if (u < total) choice = pick(ts, u);
            } else {
                if (!(total > 0)) break;  // absorbing (cannot happen in these models)
                dt = rng_.exponential(total);
                choice = pick(ts, rng_.next_unit() * total);
            }
            double stat_lo = std::max(now, warm_end);
            double stat_hi = std::min(now + dt, end);
            if (stat_hi > stat_lo) {
                double span = stat_hi - stat_lo;
                if (cfg_.record.state_occupancy) res_.occupancy[state_key(st)] += span;
                if (cfg_.record.busy_set_occupancy) res_.busy_sets[busy_mask(st)] += span;
                if (cfg_.record.queue_given_all_busy && all_busy(st)) {
                    res_.all_busy[queue_key(st)] += span;
                    busy_window_time += span;
                }
            }
            now += dt;
            if (now >= end || choice < 0) {
                if (now >= end) break;
                res_.events++;
                continue;  // discrete no-event slot
            }
            res_.events++;
            apply(st, ts[choice], now, warm_end);
            st = std::move(ts[choice].to);
            if (st.q.size() + st.srv.size() > cfg_.queue_cap) {
                res_.aborted = true;
                break;
            }
        }
        // normalize occupancies to fractions
        for (auto& [k, v] : res_.occupancy) v /= cfg_.horizon;
        for (auto& [k, v] : res_.busy_sets) v /= cfg_.horizon;
        if (busy_window_time > 0)
            for (auto& [k, v] : res_.all_busy) v /= busy_window_time;
        return std::move(res_);
    }

private:
    static int pick(const std::vector<Transition>& ts, double u) {
        double acc = 0;
        for (std::size_t i = 0; i < ts.size(); i++) {
            acc += ts[i].rate;
            if (u < acc) return static_cast<int>(i);
        }
        return static_cast<int>(ts.size()) - 1;
    }

    ServerSet busy_mask(const DState& st) const {
        switch (spec_.kind()) {
            case Kind::Collaborative: {
                ClassSet sup = 0;
                for (const auto& e : st.q) sup |= (1u << e.id);
                return spec_.S_of(sup);
            }
            case Kind::NcAlis: {
                ServerSet idle = 0;
                for (int s : st.srv) idle |= (1u << s);
                return spec_.all_servers() & ~idle;
            }
            case Kind::NcRais:
            case Kind::TokenRais:
            case Kind::ClosedToken: {
                ServerSet b = 0;
                for (const auto& e : st.q)
                    if (e.is_server) b |= (1u << e.id);
                return b;
            }
            default:
                return 0;
        }
    }

    bool all_busy(const DState& st) const {
        if (spec_.kind() == Kind::NcAlis) return st.srv.empty();
        if (spec_.kind() == Kind::NcRais || spec_.kind() == Kind::TokenRais)
            return popcount(busy_mask(st)) == spec_.num_servers();
        return false;
    }

    static std::vector<int> queue_key(const DState& st) {
        std::vector<int> key;
        for (const auto& e : st.q)
            if (!e.is_server) key.push_back(e.id);
        return key;
    }

    std::vector<int> busy_list(const DState& st) const {
        std::vector<int> b;
        if (spec_.kind() == Kind::NcAlis) {
            for (const auto& [t, s] : busy_order_) b.push_back(s);
        } else {
            for (const auto& e : st.q)
                if (e.is_server) b.push_back(e.id);
        }
        return b;
    }

    void sample_response(int cls, double value, double arr_time, double warm_end) {
        if (!cfg_.record.response_samples || arr_time < warm_end) return;
        if (counters_[cls]++ % stride_[cls] != 0) return;
        res_.response[cls].push_back(value);
    }

    void sample_wait(int cls, double value, double arr_time, double warm_end, bool cond) {
        if (arr_time >= warm_end && cfg_.record.queue_waits) res_.queue_wait[cls].push_back(value);
        if (cond && arr_time >= warm_end) res_.wait_cond[cls].push_back(value);
    }

    void record_gap(double now, double warm_end) {
        if (!cfg_.record.departure_gaps) return;
        if (last_departure_ >= warm_end &&
            static_cast<int>(res_.gaps.size()) < cfg_.record.gap_cap)
            res_.gaps.push_back(now - last_departure_);
        last_departure_ = now;
    }

    void erase_pos(int pos) {
        arr_.erase(arr_.begin() + pos);
        cls_.erase(cls_.begin() + pos);
        cond_.erase(cond_.begin() + pos);
    }

    void push_entry(double now, int cls, bool cond) {
        arr_.push_back(now);
        cls_.push_back(cls);
        cond_.push_back(cond);
    }

    void apply(const DState& st, const Transition& t, double now, double warm_end) {
        const Event& ev = t.ev;
        const bool want_cond = !cfg_.record.wait_condition.empty();
        switch (spec_.kind()) {
            case Kind::Collaborative: {
                if (ev.trigger == Ev::JobArrive) {
                    push_entry(now, ev.cls, false);
                } else {
                    if (ev.trigger == Ev::Complete) {
                        sample_response(cls_[ev.depart_pos], now - arr_[ev.depart_pos],
                                        arr_[ev.depart_pos], warm_end);
                        record_gap(now, warm_end);
                    }
                    erase_pos(ev.depart_pos);
                }
                break;
            }
            case Kind::NcAlis: {
                bool cond_hit = want_cond && busy_list(st) == cfg_.record.wait_condition;
                if (ev.trigger == Ev::JobArrive) {
                    if (ev.srv_left >= 0) {
                        busy_map_[ev.srv_left] = {now, ev.cls};
                        busy_order_.insert(
                            std::upper_bound(busy_order_.begin(), busy_order_.end(),
                                             std::make_pair(now, ev.srv_left)),
                            {now, ev.srv_left});
                        sample_wait(ev.cls, 0.0, now, warm_end, cond_hit);
                    } else {
                        push_entry(now, ev.cls, cond_hit);
                    }
                } else {  // completion at server s
                    int s = ev.server;
                    auto info = busy_map_[s];
                    sample_response(info.second, now - info.first, info.first, warm_end);
                    record_gap(now, warm_end);
                    remove_busy(s);
                    if (ev.depart_pos >= 0) {
                        int j = ev.depart_pos;
                        sample_wait(cls_[j], now - arr_[j], arr_[j], warm_end, cond_[j]);
                        busy_map_[s] = {arr_[j], cls_[j]};
                        busy_order_.insert(
                            std::upper_bound(busy_order_.begin(), busy_order_.end(),
                                             std::make_pair(arr_[j], s)),
                            {arr_[j], s});
                        erase_pos(j);
                    } else {
                        busy_map_.erase(s);
                    }
                }
                break;
            }
            case Kind::NcRais:
            case Kind::TokenRais: {
                bool cond_hit = want_cond && busy_list(st) == cfg_.record.wait_condition;
                if (ev.trigger == Ev::JobArrive) {
                    push_entry(now, ev.cls, cond_hit);
                    if (ev.busy_joined >= 0) sample_wait(ev.cls, 0.0, now, warm_end, cond_hit);
                } else {  // completion at busy entry depart_pos
                    int i = ev.depart_pos;
                    sample_response(cls_[i], now - arr_[i], arr_[i], warm_end);
                    record_gap(now, warm_end);
                    if (ev.moved_pos >= 0) {
                        int j = ev.moved_pos;
                        sample_wait(cls_[j], now - arr_[j], arr_[j], warm_end, cond_[j]);
                    }
                    erase_pos(i);
                }
                break;
            }
            case Kind::ClosedToken: {
                if (ev.trigger == Ev::JobArrive) {
                    push_entry(now, ev.cls, false);
                } else {
                    sample_response(cls_[ev.depart_pos], now - arr_[ev.depart_pos],
                                    arr_[ev.depart_pos], warm_end);
                    record_gap(now, warm_end);
                    erase_pos(ev.depart_pos);
                }
                break;
            }
            case Kind::Dbm:
            case Kind::DbmK:
            case Kind::Dbma: {
                if (ev.trigger == Ev::JobArrive) {
                    if (ev.srv_left >= 0)
                        sample_response(ev.cls, 0.0, now, warm_end);
                    else
                        push_entry(now, ev.cls, false);
                } else if (ev.trigger == Ev::ServerArrive) {
                    if (ev.depart_pos >= 0) {
                        sample_response(cls_[ev.depart_pos], now - arr_[ev.depart_pos],
                                        arr_[ev.depart_pos], warm_end);
                        record_gap(now, warm_end);
                        erase_pos(ev.depart_pos);
                    }
                } else if (ev.trigger == Ev::JobAbandon) {
                    erase_pos(ev.depart_pos);
                }
                break;
            }
            case Kind::Gm: {
                if (ev.depart_pos >= 0) {
                    sample_response(cls_[ev.depart_pos], now - arr_[ev.depart_pos],
                                    arr_[ev.depart_pos], warm_end);
                    erase_pos(ev.depart_pos);
                } else {
                    push_entry(now, ev.cls, false);
                }
                break;
            }
            case Kind::Pbm: {
                if (ev.depart_pos >= 0) {
                    sample_response(cls_[ev.depart_pos], now - arr_[ev.depart_pos],
                                    arr_[ev.depart_pos], warm_end);
                    erase_pos(ev.depart_pos);
                }
                if (ev.enter_pos >= 0) push_entry(now, ev.cls, false);
                break;
            }
        }
    }

    void remove_busy(int s) {
        for (std::size_t i = 0; i < busy_order_.size(); i++)
            if (busy_order_[i].second == s) {
                busy_order_.erase(busy_order_.begin() + i);
                return;
            }
    }

    const SystemSpec& spec_;
    const SimConfig& cfg_;
    const Dynamics& dyn_;
    Philox rng_;
    RepResult res_;
    std::vector<double> arr_;
    std::vector<int> cls_;
    std::vector<char> cond_;
    std::map<int, std::pair<double, int>> busy_map_;         // alis: server -> (arr, cls)
    std::vector<std::pair<double, int>> busy_order_;         // alis ordered busy list
    std::vector<int> stride_;
    std::vector<long long> counters_;
    double last_departure_ = -1;
};

template <typename Key>
void merge_maps(const std::vector<std::map<Key, double>*>& reps, std::map<Key, StateStat>& out) {
    std::map<Key, std::vector<double>> gather;
    for (const auto* m : reps)
        for (const auto& [k, v] : *m) gather[k];  // union of keys
    int R = static_cast<int>(reps.size());
    for (auto& [k, vals] : gather) {
        vals.assign(R, 0.0);
        for (int r = 0; r < R; r++) {
            auto it = reps[r]->find(k);
            if (it != reps[r]->end()) vals[r] = it->second;
        }
        StateStat st;
        for (double v : vals) st.mean += v;
        st.mean /= R;
        if (R > 1) {
            double ss = 0;
            for (double v : vals) ss += (v - st.mean) * (v - st.mean);
            st.se = std::sqrt(ss / (R - 1)) / std::sqrt(double(R));
        }
        out[k] = st;
    }
}

}  // namespace

SimEstimate simulate(const SystemSpec& spec, const SimConfig& cfg, const ActivationTable* table,
                     const OIRate* rate) {
    if (cfg.replications < 1) throw Error(errc::input, "need at least one replication");
    if (!(cfg.horizon > 0)) throw Error(errc::input, "horizon must be positive");
    Dynamics dyn(spec, table, rate);

    std::vector<RepResult> reps(cfg.replications);
    int threads = std::min(env_threads(), cfg.replications);
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    auto worker = [&]() {
        while (true) {
            int r = next.fetch_add(1);
            if (r >= cfg.replications) return;
            RepRunner runner(spec, cfg, dyn, r);
            reps[r] = runner.run();
        }
    };
    for (int t = 0; t < threads; t++) pool.emplace_back(worker);
    for (auto& th : pool) th.join();

    SimEstimate est;
    est.seed = cfg.seed;
    est.replications = cfg.replications;
    est.time_per_rep = cfg.horizon;
    est.response.resize(spec.num_classes());
    est.queue_wait.resize(spec.num_classes());
    est.wait_conditioned.resize(spec.num_classes());
    std::vector<std::map<std::vector<int>, double>*> occ, busy_q;
    std::vector<std::map<ServerSet, double>*> masks;
    for (auto& r : reps) {
        est.events += r.events;
        if (r.aborted) {
            est.aborted++;
            continue;
        }
        occ.push_back(&r.occupancy);
        busy_q.push_back(&r.all_busy);
        masks.push_back(&r.busy_sets);
        for (int c = 0; c < spec.num_classes(); c++) {
            auto& dst = est.response[c];
            dst.insert(dst.end(), r.response[c].begin(), r.response[c].end());
            auto& dw = est.queue_wait[c];
            dw.insert(dw.end(), r.queue_wait[c].begin(), r.queue_wait[c].end());
            auto& dc = est.wait_conditioned[c];
            dc.insert(dc.end(), r.wait_cond[c].begin(), r.wait_cond[c].end());
        }
        est.departure_gaps.insert(est.departure_gaps.end(), r.gaps.begin(), r.gaps.end());
    }
    if (!occ.empty()) {
        merge_maps(occ, est.occupancy);
        merge_maps(busy_q, est.queue_all_busy);
        merge_maps(masks, est.busy_sets);
    }
    return est;
}

CouplingTrace coupled_all_busy_trace(const SystemSpec& spec, std::uint64_t seed,
                                     long long max_events) {
    CouplingTrace tr;
    Philox rng(seed, 0);
    double lam = spec.total_lambda(), mu = spec.total_mu();
    // start from all busy with a seeded backlog so the window has length
    std::vector<int> nc_queue, collab;
    for (int k = 0; k < 4 * spec.num_classes(); k++) nc_queue.push_back(k % spec.num_classes());
    collab = nc_queue;
    ServerSet busy = spec.all_servers();
    for (long long e = 0; e < max_events; e++) {
        tr.events_checked = e + 1;
        double u = rng.next_unit() * (lam + mu);
        if (u < lam) {
            int c = 0;
            double acc = 0;
            for (; c < spec.num_classes(); c++) {
                acc += spec.lambda(c);
                if (u < acc) break;
            }
            c = std::min(c, spec.num_classes() - 1);
            nc_queue.push_back(c);
            collab.push_back(c);
        } else {
            double v = u - lam;
            int s = 0;
            double acc = 0;
            for (; s < spec.num_servers(); s++) {
                acc += spec.mu(s);
                if (v < acc) break;
            }
            s = std::min(s, spec.num_servers() - 1);
            if (!(busy & (1u << s))) continue;
            int take_nc = -1, take_c = -1;
            for (std::size_t j = 0; j < nc_queue.size(); j++)
                if (spec.S(nc_queue[j]) & (1u << s)) { take_nc = static_cast<int>(j); break; }
            for (std::size_t j = 0; j < collab.size(); j++)
                if (spec.S(collab[j]) & (1u << s)) { take_c = static_cast<int>(j); break; }
            if (take_nc >= 0) nc_queue.erase(nc_queue.begin() + take_nc);
            if (take_c >= 0) collab.erase(collab.begin() + take_c);
            if (take_nc < 0) break;  // the nc server idles; the window ends
        }
        if (nc_queue != collab) {
            tr.identical = false;
            tr.diverged_at = e;
            return tr;
        }
    }
    return tr;
}

}  // namespace oiq
