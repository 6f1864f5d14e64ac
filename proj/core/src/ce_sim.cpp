#include "pptree/ce_sim.hpp"

#include "pptree/parallel.hpp"
#include "pptree/point_process.hpp"
#include "pptree/stats.hpp"

#include <cassert>
#include <queue>
#include <stdexcept>

namespace pptree {

namespace {

enum class EventKind : std::uint8_t { Infect, Recover };

struct Event
{
    double time;
    NodeId node;
    EventKind kind;

    friend bool operator>(const Event& a, const Event& b) noexcept { return a.time > b.time; }
};

} // namespace

CeSimulation::CeSimulation(TreeStore& tree, InitialSet initial, double lambda)
    : tree_(&tree),
      initial_(std::move(initial)),
      lambda_(lambda)
{
    if (!(lambda > 0.0))
        throw std::invalid_argument("lambda must be positive");
    if (!(initial_.delay >= 0.0))
        throw std::invalid_argument("delay must be nonnegative");
    const auto check = validate_initial_set(tree, initial_);
    if (check != InitialSetStatus::Ok)
        throw std::invalid_argument(std::string("invalid initial set: ") + std::string(to_string(check)));
}

std::optional<double> CeSimulation::infection_time(NodeId id) const
{
    if (status(id) == CeStatus::S)
        return std::nullopt;
    return infected_at_[id];
}

std::optional<double> CeSimulation::recovery_time(NodeId id) const
{
    if (status(id) != CeStatus::R)
        return std::nullopt;
    return recovered_at_[id];
}

void CeSimulation::grow()
{
    const std::size_t n = tree_->size();
    if (status_.size() < n) {
        status_.resize(n, CeStatus::S);
        infected_at_.resize(n, 0.0);
        recovered_at_.resize(n, 0.0);
    }
}

CeOutcome CeSimulation::run()
{
    const CePointProcess proc{lambda_, tree_->law()};
    const CeSchedule draws(tree_->stream(), proc);

    CeOutcome out;
    out.seed = tree_->stream().master_seed();
    out.replicate = tree_->stream().stream_index();

    std::priority_queue<Event, std::vector<Event>, std::greater<>> queue;
    grow();

    auto count_infection = [&](NodeId id) {
        const std::uint32_t g = tree_->generation(id);
        if (out.z_by_generation.size() <= g)
            out.z_by_generation.resize(g + 1, 0);
        ++out.z_by_generation[g];
        ++out.z;
        out.max_generation = std::max(out.max_generation, g);
    };
    auto node_cap_hit = [&] { return tree_->cap_hit() == CapHit::Nodes; };

    for (const NodeId a : initial_.nodes) {
        if (status_[a] != CeStatus::S)
            continue;
        status_[a] = CeStatus::I;
        infected_at_[a] = 0.0;
        count_infection(a);
    }
    for (const NodeId a : initial_.nodes) {
        for (const NodeId c : tree_->children(a)) {
            grow();
            if (status_[c] == CeStatus::S)
                queue.push({draws.infection_increment(tree_->key(c)), c, EventKind::Infect});
        }
        if (node_cap_hit())
            break;
    }
    queue.push({initial_.delay + draws.recovery_increment(tree_->key(kRootNode)), kRootNode, EventKind::Recover});

    double clock = 0.0;
    double last_recovery = 0.0;
    while (!queue.empty() && !node_cap_hit()) {
        const Event ev = queue.top();
        queue.pop();
        assert(ev.time >= clock);
        clock = ev.time;

        if (ev.kind == EventKind::Infect) {
            const NodeId parent = tree_->parent(ev.node);
            // Stale clock: the parent recovered first.
            if (status_[ev.node] != CeStatus::S || status_[parent] != CeStatus::I)
                continue;
            status_[ev.node] = CeStatus::I;
            infected_at_[ev.node] = clock;
            count_infection(ev.node);
            for (const NodeId c : tree_->children(ev.node))
                queue.push({clock + draws.infection_increment(tree_->key(c)), c, EventKind::Infect});
            grow();
        } else {
            assert(status_[ev.node] == CeStatus::I);
            assert(ev.node == kRootNode || status_[tree_->parent(ev.node)] == CeStatus::R);
            status_[ev.node] = CeStatus::R;
            recovered_at_[ev.node] = clock;
            last_recovery = clock;
            // Children infected before this instant start their recovery clock
            // now; S children can no longer be infected.
            for (const NodeId c : tree_->children(ev.node)) {
                if (c < status_.size() && status_[c] == CeStatus::I)
                    queue.push({clock + draws.recovery_increment(tree_->key(c)), c, EventKind::Recover});
            }
            grow();
        }
    }

    out.cap = tree_->cap_hit();
    out.censored = tree_->censored();
    out.extinct = !out.censored;
    if (out.extinct)
        out.extinction_time = last_recovery;
    return out;
}

CeOutcome simulate_ce(TreeStore& tree, const InitialSet& initial, double lambda)
{
    CeSimulation sim(tree, initial, lambda);
    return sim.run();
}

CeEstimate estimate_ce(double lambda, const OffspringLaw& law, const InitialSetSpec& initial,
                       std::uint64_t replicates, TreeCaps caps, std::uint64_t master_seed, unsigned workers)
{
    if (replicates == 0)
        throw std::invalid_argument("replicates must be >= 1");
    CeEstimate est;
    est.outcomes = run_replicates(replicates, workers, [&](std::uint64_t r) {
        const RngStream stream = make_stream(master_seed, r);
        TreeStore tree(law, caps, stream);
        InitialSet a;
        a.delay = initial.delay;
        for (const auto& label : initial.labels)
            a.nodes.push_back(tree.node_at(label));
        return simulate_ce(tree, a, lambda);
    });

    std::vector<std::uint64_t> zn_sum;
    for (const auto& o : est.outcomes) {
        est.extinct += o.extinct ? 1 : 0;
        est.censored += o.censored ? 1 : 0;
        if (zn_sum.size() < o.z_by_generation.size())
            zn_sum.resize(o.z_by_generation.size(), 0);
        for (std::size_t g = 0; g < o.z_by_generation.size(); ++g)
            zn_sum[g] += o.z_by_generation[g];
    }
    est.extinction_probability = static_cast<double>(est.extinct) / static_cast<double>(replicates);
    const auto ci = stats::binomial_ci(est.extinct, replicates, 0.95);
    est.ci_low = ci.low;
    est.ci_high = ci.high;
    for (const auto s : zn_sum)
        est.mean_z_by_generation.push_back(static_cast<double>(s) / static_cast<double>(replicates));
    return est;
}

} // namespace pptree
