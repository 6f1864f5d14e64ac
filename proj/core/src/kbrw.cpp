#include "pptree/kbrw.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <stdexcept>

namespace pptree {

namespace {

template <class... Ts>
struct overloaded : Ts...
{
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void bump(std::vector<std::uint64_t>& by_generation, std::uint32_t g)
{
    if (by_generation.size() <= g)
        by_generation.resize(g + 1, 0);
    ++by_generation[g];
}

} // namespace

// --- killed walk -------------------------------------------------------------------

KbrwEngine::KbrwEngine(PointProcess proc, TreeCaps caps) : proc_(std::move(proc)), caps_(caps)
{
    const double lambda = std::visit([](const auto& p) { return p.lambda; }, proc_);
    if (!(lambda > 0.0))
        throw std::invalid_argument("lambda must be positive");
    if (caps_.max_nodes == 0)
        throw std::invalid_argument("max_nodes must be positive");
}

template <bool Record>
KbrwTotals KbrwEngine::walk(const RngStream& rng, double start, KbrwRealization* out)
{
    if (!(start >= 0.0))
        throw std::invalid_argument("killed walk must start at x >= 0");

    KbrwTotals totals;
    std::vector<std::uint64_t> scratch_generations;
    auto& by_generation = Record ? out->z_by_generation : scratch_generations;
    auto cap = [&](CapHit hit) {
        if (totals.cap == CapHit::None || hit == CapHit::Nodes)
            totals.cap = hit;
        totals.censored = true;
    };

    queue_.clear();
    queue_.push_back({kRootKey, start, 0, 0});
    totals.z = 1;
    if constexpr (Record) {
        out->nodes.clear();
        out->nodes.push_back(KbrwNode{kRootKey, 0, 0, start, true});
        bump(by_generation, 0);
    }

    // Returns false once the node cap is exhausted.
    auto admit = [&](NodeKey key, double position, std::uint32_t generation, std::uint32_t parent_index) {
        if (totals.z + 1 > caps_.max_nodes) {
            cap(CapHit::Nodes);
            return false;
        }
        ++totals.z;
        totals.max_generation = std::max(totals.max_generation, generation);
        std::uint32_t index = 0;
        if constexpr (Record) {
            index = static_cast<std::uint32_t>(out->nodes.size());
            out->nodes.push_back(KbrwNode{key, parent_index, generation, position, true});
            bump(by_generation, generation);
        }
        queue_.push_back({key, position, generation, index});
        return true;
    };
    auto record_killed = [&](NodeKey key, double position, std::uint32_t generation, std::uint32_t parent_index) {
        if constexpr (Record)
            out->nodes.push_back(KbrwNode{key, parent_index, generation, position, false});
    };

    std::visit(
        overloaded{
            [&](const CePointProcess& p) {
                const CeSchedule draws(rng, p);
                for (std::size_t head = 0; head < queue_.size(); ++head) {
                    const Pending u = queue_[head];
                    const std::uint32_t count = draws.offspring(u.key);
                    if (count == 0)
                        continue;
                    if (u.generation >= caps_.max_generation) {
                        cap(CapHit::Generation);
                        continue;
                    }
                    const double shared = u.position + draws.recovery_increment(u.key);
                    for (std::uint32_t i = 0; i < count; ++i) {
                        const NodeKey ck = child_key(u.key, i);
                        const double v = shared - draws.infection_increment(ck);
                        if (v < 0.0) {
                            record_killed(ck, v, u.generation + 1, u.index);
                            continue;
                        }
                        if (!admit(ck, v, u.generation + 1, u.index))
                            return;
                    }
                }
            },
            [&](const BaPointProcess& p) {
                const BaSchedule draws(rng, p);
                for (std::size_t head = 0; head < queue_.size(); ++head) {
                    const Pending u = queue_[head];
                    const double top = u.position + draws.timer(u.key);
                    double arrival = 0.0;
                    for (std::uint64_t j = 0;; ++j) {
                        const NodeKey ck = child_key(u.key, j);
                        arrival += draws.birth_gap(ck);
                        const double v = top - arrival;
                        if (v < 0.0) {
                            record_killed(ck, v, u.generation + 1, u.index);
                            break;
                        }
                        if (u.generation >= caps_.max_generation) {
                            cap(CapHit::Generation);
                            break;
                        }
                        if (!admit(ck, v, u.generation + 1, u.index))
                            return;
                    }
                }
            },
        },
        proc_);
    return totals;
}

KbrwRealization KbrwEngine::run(const RngStream& rng, double start, bool record_nodes)
{
    KbrwRealization out;
    out.start = start;
    KbrwTotals t;
    if (record_nodes) {
        t = walk<true>(rng, start, &out);
    } else {
        // Generation profile without node records.
        KbrwRealization profile;
        t = walk<true>(rng, start, &profile);
        out.z_by_generation = std::move(profile.z_by_generation);
    }
    if (!record_nodes)
        out.nodes.clear();
    out.z = t.z;
    out.censored = t.censored;
    out.cap = t.cap;
    return out;
}

KbrwTotals KbrwEngine::run_totals(const RngStream& rng, double start)
{
    return walk<false>(rng, start, nullptr);
}

KbrwRealization simulate_kbrw(const PointProcess& proc, double start, TreeCaps caps, const RngStream& rng,
                              bool record_nodes)
{
    KbrwEngine engine(proc, caps);
    return engine.run(rng, start, record_nodes);
}

// --- coupling ---------------------------------------------------------------------------

CouplingRealization::CouplingRealization(TreeStore& tree, double lambda, double delay) : tree_(&tree)
{
    if (!(lambda > 0.0))
        throw std::invalid_argument("lambda must be positive");
    if (!(delay >= 0.0))
        throw std::invalid_argument("delay must be nonnegative");
    const CePointProcess proc{lambda, tree.law()};
    const CeSchedule draws(tree.stream(), proc);

    auto grow = [&] {
        const std::size_t n = tree_->size();
        infect_.resize(n, 0.0);
        recover_.resize(n, 0.0);
        w_.resize(n, 0.0);
        alive_.resize(n, 0);
        computed_.resize(n, 0);
    };
    grow();

    // R(parent of root) = x, I(root) = 0, R(root) = x + Exp(1).
    infect_[kRootNode] = 0.0;
    recover_[kRootNode] = delay + draws.recovery_increment(tree.key(kRootNode));
    w_[kRootNode] = delay;
    alive_[kRootNode] = 1;
    computed_[kRootNode] = 1;
    z_ = 1;
    bump(z_by_generation_, 0);

    std::vector<NodeId> queue{kRootNode};
    for (std::size_t head = 0; head < queue.size(); ++head) {
        const NodeId u = queue[head];
        const auto kids = tree.children(u);
        if (tree.cap_hit() == CapHit::Nodes)
            break;
        grow();
        for (const NodeId c : kids) {
            const NodeKey key = tree.key(c);
            infect_[c] = infect_[u] + draws.infection_increment(key);
            recover_[c] = recover_[u] + draws.recovery_increment(key);
            w_[c] = recover_[u] - infect_[c];
            computed_[c] = 1;
            if (w_[c] >= 0.0) {
                alive_[c] = 1;
                ++z_;
                bump(z_by_generation_, tree.generation(c));
                queue.push_back(c);
            }
        }
    }
}

CeStatus CouplingRealization::status_at(double t, NodeId node) const
{
    if (!ever_infected(node))
        return CeStatus::S;
    if (recover_[node] <= t)
        return CeStatus::R;
    if (infect_[node] <= t)
        return CeStatus::I;
    return CeStatus::S;
}

CouplingRealization coupling_realization(TreeStore& tree, double lambda, double delay)
{
    return CouplingRealization(tree, lambda, delay);
}

// --- Biggins martingale -------------------------------------------------------------

BigginsTrace biggins_martingale(const PointProcess& proc, double rho, const BigginsOptions& options,
                                const RngStream& rng)
{
    struct Particle
    {
        NodeKey key;
        double position;
    };

    const double prune = options.prune_level;
    double growth = 0.0; // exp(psi(rho)), the per-generation mean factor
    std::visit(overloaded{
                   [&](const CePointProcess& p) {
                       if (!(rho > 0.0 && rho < 1.0))
                           throw std::invalid_argument("rho must lie in (0, 1)");
                       growth = p.offspring.mean() * p.lambda / ((1.0 - rho) * (p.lambda + rho));
                   },
                   [&](const BaPointProcess& p) {
                       if (!(rho > 0.0 && rho < p.timer.mgf_domain_upper()))
                           throw std::invalid_argument("rho must lie inside the timer mgf domain");
                       if (!std::isfinite(prune))
                           throw std::invalid_argument("the BA walk has infinitely many children; set a prune level");
                       growth = p.lambda * p.timer.mgf(rho) / rho;
                   },
               },
               proc);

    BigginsTrace trace;
    std::vector<Particle> current{{kRootKey, 0.0}};
    std::vector<Particle> next;
    double pending_pruned = 0.0;

    auto record = [&](const std::vector<Particle>& gen, double pruned) {
        double w = 0.0;
        double top = -std::numeric_limits<double>::infinity();
        for (const auto& p : gen) {
            w += std::exp(rho * p.position);
            top = std::max(top, p.position);
        }
        trace.w.push_back(w);
        trace.pruned.push_back(pruned);
        trace.max_position.push_back(top);
        trace.particles.push_back(gen.size());
    };
    record(current, 0.0);

    for (std::uint32_t n = 1; n <= options.n_max; ++n) {
        next.clear();
        double fresh_pruned = 0.0;
        bool over = false;
        std::visit(overloaded{
                       [&](const CePointProcess& p) {
                           const CeSchedule draws(rng, p);
                           for (const auto& u : current) {
                               const std::uint32_t count = draws.offspring(u.key);
                               if (count == 0)
                                   continue;
                               const double shared = u.position + draws.recovery_increment(u.key);
                               for (std::uint32_t i = 0; i < count; ++i) {
                                   const NodeKey ck = child_key(u.key, i);
                                   const double v = shared - draws.infection_increment(ck);
                                   if (v < prune) {
                                       fresh_pruned += std::exp(rho * v);
                                       continue;
                                   }
                                   next.push_back({ck, v});
                               }
                               if (next.size() > options.max_particles) {
                                   over = true;
                                   return;
                               }
                           }
                       },
                       [&](const BaPointProcess& p) {
                           const BaSchedule draws(rng, p);
                           // Siblings after the first pruned one are replaced by their
                           // conditional mean: sum_{i>=1} (lambda/(lambda+rho))^i = lambda/rho.
                           const double tail_factor = 1.0 + p.lambda / rho;
                           for (const auto& u : current) {
                               const double top = u.position + draws.timer(u.key);
                               double arrival = 0.0;
                               for (std::uint64_t j = 0;; ++j) {
                                   const NodeKey ck = child_key(u.key, j);
                                   arrival += draws.birth_gap(ck);
                                   const double v = top - arrival;
                                   if (v < prune) {
                                       fresh_pruned += std::exp(rho * v) * tail_factor;
                                       break;
                                   }
                                   next.push_back({ck, v});
                               }
                               if (next.size() > options.max_particles) {
                                   over = true;
                                   return;
                               }
                           }
                       },
                   },
                   proc);
        if (over) {
            trace.truncated = true;
            break;
        }
        pending_pruned = pending_pruned * growth + fresh_pruned;
        current.swap(next);
        record(current, pending_pruned);
    }
    return trace;
}

// --- tilted walk --------------------------------------------------------------------------

QWalk::QWalk(const analytics::ModelParams& params)
    : law_(analytics::tilted_step_law(params)),
      regime_(analytics::spectral(params).regime),
      p_positive_(law_.prob_positive()),
      kappa_(std::sqrt(analytics::spectral(params).delta))
{
}

QWalkSample QWalk::sample(double start, RngStream& stream, const QWalkOptions& options) const
{
    if (!(start >= 0.0))
        throw std::invalid_argument("tilted walk must start at x >= 0");
    double escape = options.escape_height;
    if (std::isnan(escape))
        escape = regime_ == analytics::Regime::Subcritical && kappa_ > 0.0
                     ? 40.0 / kappa_
                     : std::numeric_limits<double>::infinity();

    QWalkSample s;
    double pos = start;
    if (options.record_trajectory)
        s.trajectory.push_back(pos);
    std::uint64_t j = 0;
    while (pos >= 0.0) {
        if (j >= options.step_cap) {
            s.censored = true;
            break;
        }
        if (pos > start + escape) {
            s.escaped = true;
            break;
        }
        pos += step(stream);
        ++j;
        if (options.record_trajectory)
            s.trajectory.push_back(pos);
    }
    s.first_passage_index = j;
    if (!s.censored && !s.escaped)
        s.overshoot = -pos;

    // Renewal statistic: the walk from 0 up to its first strict return to [0, inf).
    std::vector<double> levels = options.renewal_levels;
    s.renewal_counts.assign(levels.size(), 1); // S_0 = 0 >= -x
    double below = 0.0;
    std::uint64_t k = 0;
    for (;;) {
        if (k >= options.step_cap) {
            s.renewal_censored = true;
            break;
        }
        below += step(stream);
        ++k;
        if (below >= 0.0)
            break;
        for (std::size_t l = 0; l < levels.size(); ++l)
            if (below >= -levels[l])
                ++s.renewal_counts[l];
    }
    s.ladder_index = k;
    return s;
}

QWalkSample qwalk_first_passage(const analytics::ModelParams& params, double start, RngStream& stream,
                                const QWalkOptions& options)
{
    return QWalk(params).sample(start, stream, options);
}

} // namespace pptree
