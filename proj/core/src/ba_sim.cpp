#include "pptree/ba_sim.hpp"

#include "pptree/parallel.hpp"
#include "pptree/point_process.hpp"

#include <algorithm>
#include <cassert>
#include <stdexcept>

namespace pptree {

namespace {

struct Live
{
    NodeKey key;
    double birth;
    double removal;
    std::uint32_t generation;
    std::uint32_t index;
};

} // namespace

BaOutcome simulate_ba(double lambda, const TimerLaw& timer, TreeCaps caps, const RngStream& rng,
                      bool record_individuals)
{
    if (!(lambda > 0.0))
        throw std::invalid_argument("lambda must be positive");
    if (caps.max_nodes == 0)
        throw std::invalid_argument("max_nodes must be positive");
    const BaPointProcess proc{lambda, timer};
    const BaSchedule draws(rng, proc);

    BaOutcome out;
    out.seed = rng.master_seed();
    out.replicate = rng.stream_index();

    auto censor = [&](CapHit hit) {
        if (out.cap == CapHit::None || hit == CapHit::Nodes)
            out.cap = hit;
        out.censored = true;
    };

    // Breadth-first over individuals. Each one's window [birth, removal] is
    // known as soon as its parent is removed, so births can be listed at once.
    std::vector<Live> queue;
    queue.push_back({kRootKey, 0.0, draws.timer(kRootKey), 0, 0});
    out.n = 1;
    if (record_individuals)
        out.individuals.push_back({kRootKey, 0, 0, 0.0, 0.0, queue.front().removal});
    double last_removal = queue.front().removal;

    for (std::size_t head = 0; head < queue.size(); ++head) {
        const Live u = queue[head];
        last_removal = std::max(last_removal, u.removal);
        double t = u.birth;
        for (std::uint64_t j = 0;; ++j) {
            const NodeKey ck = child_key(u.key, j);
            t += draws.birth_gap(ck);
            if (t > u.removal)
                break;
            if (u.generation >= caps.max_generation) {
                censor(CapHit::Generation);
                break;
            }
            if (out.n + 1 > caps.max_nodes) {
                censor(CapHit::Nodes);
                break;
            }
            ++out.n;
            const double removal = u.removal + draws.timer(ck);
            assert(t <= u.removal && removal > u.removal);
            Live c{ck, t, removal, u.generation + 1, 0};
            out.max_generation = std::max(out.max_generation, c.generation);
            if (record_individuals) {
                c.index = static_cast<std::uint32_t>(out.individuals.size());
                out.individuals.push_back({ck, u.index, c.generation, t, u.removal, removal});
            }
            queue.push_back(c);
        }
        if (out.cap == CapHit::Nodes)
            break;
    }

    out.stable_run = !out.censored;
    if (out.stable_run)
        out.last_removal_time = last_removal;
    return out;
}

BaEstimate estimate_ba(double lambda, const TimerLaw& timer, std::uint64_t replicates, TreeCaps caps,
                       std::uint64_t master_seed, unsigned workers)
{
    if (replicates == 0)
        throw std::invalid_argument("replicates must be >= 1");
    BaEstimate est;
    est.outcomes = run_replicates(replicates, workers, [&](std::uint64_t r) {
        return simulate_ba(lambda, timer, caps, make_stream(master_seed, r));
    });
    for (const auto& o : est.outcomes) {
        est.stable += o.stable_run ? 1 : 0;
        est.censored += o.censored ? 1 : 0;
    }
    est.stable_fraction = static_cast<double>(est.stable) / static_cast<double>(replicates);
    est.ci = stats::binomial_ci(est.stable, replicates, 0.95);
    return est;
}

} // namespace pptree
