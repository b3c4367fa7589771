#pragma once

// Primal network simplex for the balanced, uncapacitated transportation
// problem between n sources and m sinks on the complete bipartite graph.
//
// The spanning-tree bookkeeping (parent / thread / succ_num / last_succ) and
// block-search pricing follow the classical LEMON design. Costs are supplied by
// a callable cost(i, j) and evaluated on demand, so memory is one state byte
// per arc. Arcs outside the tree always carry zero flow, which lets the flow
// of every tree arc live on the node it hangs from.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "rproj/error.hpp"

namespace rproj {

struct TransportSolution {
    double cost = 0.0;
    /// Value of the dual solution read from the final tree potentials.
    double dual = 0.0;
    /// Certified upper bound on cost - optimum.
    double gap = 0.0;
    std::int64_t pivots = 0;
};

template <class Cost>
class TransportSimplex {
  public:
    /// cost_bound must dominate every cost(i, j); it sizes the artificial arcs.
    TransportSimplex(const Eigen::VectorXd& supply, const Eigen::VectorXd& demand, Cost cost, double cost_bound)
        : n_(supply.size()), m_(demand.size()), nodes_(n_ + m_), root_(n_ + m_), arcs_(n_ * m_), cost_(std::move(cost)),
          supply_(supply), demand_(demand) {
        detail::require(n_ >= 1 && m_ >= 1, ErrorKind::invalid_input, "transport: empty side");
        art_cost_ = (std::max(cost_bound, 0.0) + 1.0) * static_cast<double>(nodes_);
        block_size_ = std::max<std::int64_t>(10, static_cast<std::int64_t>(std::sqrt(static_cast<double>(arcs_))));
    }

    TransportSolution solve(std::int64_t max_pivots = 2'000'000'000) {
        init();
        std::int64_t pivots = 0;
        for (int round = 0; round < 8; ++round) {
            while (find_entering_arc()) {
                find_join_node();
                find_leaving_arc();
                change_flow();
                update_tree_structure();
                update_potential();
                if (++pivots > max_pivots) {
                    detail::fail(ErrorKind::numerical, "transport: pivot limit exceeded");
                }
            }
            // Incremental potential updates drift; rebuild them from the tree and
            // resume pricing only if the fresh potentials expose a violation.
            recompute_potentials();
            if (!has_violation()) {
                break;
            }
        }
        return finish(pivots);
    }

    /// Flow on every tree arc, as (source, sink, amount) with real arcs only.
    template <class Fn>
    void for_each_flow(Fn&& fn) const {
        for (std::int64_t u = 0; u < nodes_; ++u) {
            if (pred_[u] < arcs_ && flow_[u] > 0.0) {
                fn(pred_[u] / m_, pred_[u] % m_, flow_[u]);
            }
        }
    }

  private:
    static constexpr int kUp = 1;
    static constexpr int kDown = -1;
    static constexpr std::int8_t kLower = 1;
    static constexpr std::int8_t kTree = 0;
    static constexpr double kRelTol = 1e-14;

    std::int64_t source(std::int64_t e) const {
        if (e < arcs_) {
            return e / m_;
        }
        const std::int64_t u = e - arcs_;
        return art_up_[u] ? u : root_;
    }

    std::int64_t target(std::int64_t e) const {
        if (e < arcs_) {
            return n_ + e % m_;
        }
        const std::int64_t u = e - arcs_;
        return art_up_[u] ? root_ : u;
    }

    double arc_cost(std::int64_t e) const {
        if (e < arcs_) {
            return cost_(e / m_, e % m_);
        }
        return art_up_[e - arcs_] ? 0.0 : art_cost_;
    }

    double node_supply(std::int64_t u) const { return u < n_ ? supply_(u) : -demand_(u - n_); }

    void init() {
        const std::size_t total = static_cast<std::size_t>(nodes_ + 1);
        parent_.assign(total, -1);
        pred_.assign(total, -1);
        dir_.assign(total, kUp);
        thread_.assign(total, 0);
        rev_thread_.assign(total, 0);
        succ_num_.assign(total, 1);
        last_succ_.assign(total, 0);
        flow_.assign(total, 0.0);
        pi_.assign(total, 0.0);
        art_up_.assign(static_cast<std::size_t>(nodes_), 1);
        state_.assign(static_cast<std::size_t>(arcs_), kLower);

        thread_[root_] = 0;
        rev_thread_[0] = root_;
        succ_num_[root_] = nodes_ + 1;
        last_succ_[root_] = root_ - 1;
        for (std::int64_t u = 0; u < nodes_; ++u) {
            parent_[u] = root_;
            pred_[u] = arcs_ + u;
            thread_[u] = u + 1;
            rev_thread_[u + 1] = u;
            succ_num_[u] = 1;
            last_succ_[u] = u;
            const double s = node_supply(u);
            if (s >= 0.0) {
                art_up_[u] = 1;
                dir_[u] = kUp;
                pi_[u] = 0.0;
                flow_[u] = s;
            } else {
                art_up_[u] = 0;
                dir_[u] = kDown;
                pi_[u] = art_cost_;
                flow_[u] = -s;
            }
        }
        next_arc_ = 0;
    }

    double reduced_cost(std::int64_t i, std::int64_t j, double& scale) const {
        const double c = cost_(i, j);
        const double pi_s = pi_[i];
        const double pi_t = pi_[n_ + j];
        scale = std::abs(c) + std::abs(pi_s) + std::abs(pi_t);
        return c + pi_s - pi_t;
    }

    bool find_entering_arc() {
        double best = 0.0;
        std::int64_t best_arc = -1;
        std::int64_t cnt = block_size_;
        std::int64_t e = next_arc_;
        std::int64_t i = e / m_;
        std::int64_t j = e % m_;
        for (std::int64_t visited = 0; visited < arcs_; ++visited) {
            if (state_[e] == kLower) {
                double scale;
                const double rc = reduced_cost(i, j, scale);
                if (rc < best && rc < -kRelTol * scale) {
                    best = rc;
                    best_arc = e;
                }
            }
            ++e;
            if (++j == m_) {
                j = 0;
                ++i;
                if (e == arcs_) {
                    e = 0;
                    i = 0;
                }
            }
            if (--cnt == 0) {
                if (best_arc >= 0) {
                    break;
                }
                cnt = block_size_;
            }
        }
        if (best_arc < 0) {
            return false;
        }
        in_arc_ = best_arc;
        next_arc_ = e;
        return true;
    }

    void find_join_node() {
        std::int64_t u = source(in_arc_);
        std::int64_t v = target(in_arc_);
        while (u != v) {
            if (succ_num_[u] < succ_num_[v]) {
                u = parent_[u];
            } else {
                v = parent_[v];
            }
        }
        join_ = u;
    }

    // Flow is pushed from source(in) to target(in) and back to source through
    // the join; only arcs whose flow decreases can block the cycle.
    void find_leaving_arc() {
        const std::int64_t first = source(in_arc_);
        const std::int64_t second = target(in_arc_);
        delta_ = std::numeric_limits<double>::infinity();
        int result = 0;
        for (std::int64_t u = first; u != join_; u = parent_[u]) {
            if (dir_[u] == kUp && flow_[u] < delta_) {
                delta_ = flow_[u];
                u_out_ = u;
                result = 1;
            }
        }
        for (std::int64_t u = second; u != join_; u = parent_[u]) {
            if (dir_[u] == kDown && flow_[u] <= delta_) {
                delta_ = flow_[u];
                u_out_ = u;
                result = 2;
            }
        }
        if (result == 0) {
            detail::fail(ErrorKind::numerical, "transport: unbounded pivot cycle");
        }
        if (result == 1) {
            u_in_ = first;
            v_in_ = second;
        } else {
            u_in_ = second;
            v_in_ = first;
        }
    }

    void change_flow() {
        if (delta_ > 0.0) {
            for (std::int64_t u = source(in_arc_); u != join_; u = parent_[u]) {
                flow_[u] -= dir_[u] * delta_;
            }
            for (std::int64_t u = target(in_arc_); u != join_; u = parent_[u]) {
                flow_[u] += dir_[u] * delta_;
            }
        }
        flow_[u_out_] = 0.0;
        state_out_ = pred_[u_out_];
        if (state_out_ < arcs_) {
            state_[state_out_] = kLower;
        }
        state_[in_arc_] = kTree;
    }

    void update_tree_structure() {
        const std::int64_t old_rev_thread = rev_thread_[u_out_];
        const std::int64_t old_succ_num = succ_num_[u_out_];
        const std::int64_t old_last_succ = last_succ_[u_out_];
        v_out_ = parent_[u_out_];

        if (u_in_ == u_out_) {
            parent_[u_in_] = v_in_;
            pred_[u_in_] = in_arc_;
            dir_[u_in_] = (u_in_ == source(in_arc_)) ? kUp : kDown;
            flow_[u_in_] = delta_;

            if (thread_[v_in_] != u_out_) {
                std::int64_t after = thread_[old_last_succ];
                thread_[old_rev_thread] = after;
                rev_thread_[after] = old_rev_thread;
                after = thread_[v_in_];
                thread_[v_in_] = u_out_;
                rev_thread_[u_out_] = v_in_;
                thread_[old_last_succ] = after;
                rev_thread_[after] = old_last_succ;
            }
        } else {
            const std::int64_t thread_continue = (old_rev_thread == v_in_) ? thread_[old_last_succ] : thread_[v_in_];

            // Re-hang the stem nodes between u_in and u_out and splice their
            // subtrees into the thread after v_in.
            std::int64_t stem = u_in_;
            std::int64_t par_stem = v_in_;
            std::int64_t last = last_succ_[u_in_];
            std::int64_t after = thread_[last];
            thread_[v_in_] = u_in_;
            dirty_revs_.clear();
            dirty_revs_.push_back(v_in_);
            while (stem != u_out_) {
                const std::int64_t next_stem = parent_[stem];
                thread_[last] = next_stem;
                dirty_revs_.push_back(last);

                const std::int64_t before = rev_thread_[stem];
                thread_[before] = after;
                rev_thread_[after] = before;

                parent_[stem] = par_stem;
                par_stem = stem;
                stem = next_stem;

                last = (last_succ_[stem] == last_succ_[par_stem]) ? rev_thread_[par_stem] : last_succ_[stem];
                after = thread_[last];
            }
            parent_[u_out_] = par_stem;
            thread_[last] = thread_continue;
            rev_thread_[thread_continue] = last;
            last_succ_[u_out_] = last;

            if (old_rev_thread != v_in_) {
                thread_[old_rev_thread] = after;
                rev_thread_[after] = old_rev_thread;
            }
            for (std::int64_t u : dirty_revs_) {
                rev_thread_[thread_[u]] = u;
            }

            // Shift pred arcs (with their flows) one step along the reversed stem.
            std::int64_t tmp_sc = 0;
            const std::int64_t tmp_ls = last_succ_[u_out_];
            for (std::int64_t u = u_out_, p = parent_[u]; u != u_in_; u = p, p = parent_[u]) {
                pred_[u] = pred_[p];
                dir_[u] = -dir_[p];
                flow_[u] = flow_[p];
                tmp_sc += succ_num_[u] - succ_num_[p];
                succ_num_[u] = tmp_sc;
                last_succ_[p] = tmp_ls;
            }
            pred_[u_in_] = in_arc_;
            dir_[u_in_] = (u_in_ == source(in_arc_)) ? kUp : kDown;
            flow_[u_in_] = delta_;
            succ_num_[u_in_] = old_succ_num;
        }

        const std::int64_t up_limit_out = (last_succ_[join_] == v_in_) ? join_ : -1;
        const std::int64_t last_succ_out = last_succ_[u_out_];
        for (std::int64_t u = v_in_; u != -1 && last_succ_[u] == v_in_; u = parent_[u]) {
            last_succ_[u] = last_succ_out;
        }
        if (join_ != old_rev_thread && v_in_ != old_rev_thread) {
            for (std::int64_t u = v_out_; u != up_limit_out && last_succ_[u] == old_last_succ; u = parent_[u]) {
                last_succ_[u] = old_rev_thread;
            }
        } else if (last_succ_out != old_last_succ) {
            for (std::int64_t u = v_out_; u != up_limit_out && last_succ_[u] == old_last_succ; u = parent_[u]) {
                last_succ_[u] = last_succ_out;
            }
        }

        for (std::int64_t u = v_in_; u != join_; u = parent_[u]) {
            succ_num_[u] += old_succ_num;
        }
        for (std::int64_t u = v_out_; u != join_; u = parent_[u]) {
            succ_num_[u] -= old_succ_num;
        }
    }

    void update_potential() {
        const double sigma = pi_[v_in_] - pi_[u_in_] - dir_[u_in_] * arc_cost(in_arc_);
        const std::int64_t end = thread_[last_succ_[u_in_]];
        for (std::int64_t u = u_in_; u != end; u = thread_[u]) {
            pi_[u] += sigma;
        }
    }

    void recompute_potentials() {
        pi_[root_] = 0.0;
        for (std::int64_t u = thread_[root_]; u != root_; u = thread_[u]) {
            pi_[u] = pi_[parent_[u]] - dir_[u] * arc_cost(pred_[u]);
        }
    }

    // Largest dual infeasibility over the real arcs, and whether any arc is
    // still eligible for pricing.
    double max_violation(bool& eligible) const {
        double worst = 0.0;
        eligible = false;
        for (std::int64_t i = 0; i < n_; ++i) {
            for (std::int64_t j = 0; j < m_; ++j) {
                double scale;
                const double rc = reduced_cost(i, j, scale);
                worst = std::min(worst, rc);
                if (state_[i * m_ + j] == kLower && rc < -kRelTol * scale) {
                    eligible = true;
                }
            }
        }
        return -worst;
    }

    bool has_violation() const {
        bool eligible = false;
        max_violation(eligible);
        return eligible;
    }

    TransportSolution finish(std::int64_t pivots) const {
        double mass = 0.0;
        double stranded = 0.0;
        TransportSolution out;
        out.pivots = pivots;
        for (std::int64_t u = 0; u < nodes_; ++u) {
            if (pred_[u] < arcs_) {
                out.cost += flow_[u] * cost_(pred_[u] / m_, pred_[u] % m_);
            } else {
                stranded += flow_[u];
            }
        }
        for (std::int64_t i = 0; i < n_; ++i) {
            out.dual -= supply_(i) * pi_[i];
            mass += supply_(i);
        }
        for (std::int64_t j = 0; j < m_; ++j) {
            out.dual += demand_(j) * pi_[n_ + j];
        }
        detail::require(stranded <= 1e-12 * std::max(1.0, mass), ErrorKind::numerical,
                        "transport: mass left on artificial arcs");
        bool eligible = false;
        const double eta = max_violation(eligible);
        out.gap = std::max(0.0, out.cost - out.dual + eta * mass);
        return out;
    }

    std::int64_t n_, m_, nodes_, root_, arcs_;
    Cost cost_;
    Eigen::VectorXd supply_, demand_;
    double art_cost_ = 0.0;
    std::int64_t block_size_ = 10;

    std::vector<std::int64_t> parent_, pred_, thread_, rev_thread_, succ_num_, last_succ_, dirty_revs_;
    std::vector<int> dir_;
    std::vector<double> flow_, pi_;
    std::vector<std::int8_t> art_up_, state_;

    std::int64_t next_arc_ = 0;
    std::int64_t in_arc_ = 0, join_ = 0, u_in_ = 0, v_in_ = 0, u_out_ = 0, v_out_ = 0, state_out_ = 0;
    double delta_ = 0.0;
};

/// Solves min sum cost(i,j) f_ij over couplings of supply and demand.
template <class Cost>
TransportSolution solve_transport(const Eigen::VectorXd& supply, const Eigen::VectorXd& demand, Cost cost,
                                  double cost_bound) {
    TransportSimplex<Cost> simplex(supply, demand, std::move(cost), cost_bound);
    return simplex.solve();
}

} // namespace rproj
