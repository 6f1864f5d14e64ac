#pragma once

#include "pptree/analytics.hpp"
#include "pptree/ce_sim.hpp"
#include "pptree/point_process.hpp"
#include "pptree/rng.hpp"
#include "pptree/tree.hpp"

#include <cstdint>
#include <cmath>
#include <limits>
#include <optional>
#include <variant>
#include <vector>

namespace pptree {

using PointProcess = std::variant<CePointProcess, BaPointProcess>;

// --- killed branching random walk ---------------------------------------------

struct KbrwNode
{
    NodeKey key = kRootKey;
    std::uint32_t parent = 0; // index into KbrwRealization::nodes; the root points at itself
    std::uint32_t generation = 0;
    double position = 0.0;
    bool alive = true; // every position on the root path, this one included, is >= 0
};

struct KbrwRealization
{
    double start = 0.0;
    std::uint64_t z = 0;
    std::vector<std::uint64_t> z_by_generation;
    bool censored = false;
    CapHit cap = CapHit::None;
    /// Alive nodes and their killed children; filled only when recording.
    std::vector<KbrwNode> nodes;
};

/// Counts only; the hot path for large replicate batches.
struct KbrwTotals
{
    std::uint64_t z = 0;
    std::uint32_t max_generation = 0;
    bool censored = false;
    CapHit cap = CapHit::None;
};

/// Breadth-first killed walk. `caps.max_nodes` bounds the number of alive
/// individuals; a node at `caps.max_generation` is not expanded and censors the
/// run if it would have children. Buffers are reused across runs, so one engine
/// per worker thread.
class KbrwEngine
{
public:
    KbrwEngine(PointProcess proc, TreeCaps caps);

    KbrwRealization run(const RngStream& rng, double start, bool record_nodes = false);
    KbrwTotals run_totals(const RngStream& rng, double start);

    const PointProcess& process() const noexcept { return proc_; }

private:
    struct Pending
    {
        NodeKey key;
        double position;
        std::uint32_t generation;
        std::uint32_t index;
    };

    template <bool Record>
    KbrwTotals walk(const RngStream& rng, double start, KbrwRealization* out);

    PointProcess proc_;
    TreeCaps caps_;
    std::vector<Pending> queue_;
};

KbrwRealization simulate_kbrw(const PointProcess& proc, double start, TreeCaps caps, const RngStream& rng,
                              bool record_nodes = false);

// --- coupling with two independent branching random walks ----------------------

/// R(u): Exp(1) walk started at x + Exp(1); I(u): Exp(lambda) walk started at 0;
/// W(u) = R(parent of u) - I(u) with R(parent of root) = x. A node is ever
/// infected iff W >= 0 along its whole root path.
class CouplingRealization
{
public:
    CouplingRealization(TreeStore& tree, double lambda, double delay = 0.0);

    /// Chase-escape state of a node at time t. Nodes that were never
    /// materialized are susceptible forever.
    CeStatus status_at(double t, NodeId node) const;

    bool computed(NodeId node) const noexcept { return node < computed_.size() && computed_[node]; }
    double infection_time(NodeId node) const { return infect_.at(node); }
    double recovery_time(NodeId node) const { return recover_.at(node); }
    double w(NodeId node) const { return w_.at(node); }
    bool ever_infected(NodeId node) const { return node < alive_.size() && alive_[node]; }

    std::uint64_t z() const noexcept { return z_; }
    const std::vector<std::uint64_t>& z_by_generation() const noexcept { return z_by_generation_; }
    bool censored() const noexcept { return tree_->censored(); }
    CapHit cap() const noexcept { return tree_->cap_hit(); }
    const TreeStore& tree() const noexcept { return *tree_; }

private:
    TreeStore* tree_;
    std::vector<double> infect_;
    std::vector<double> recover_;
    std::vector<double> w_;
    std::vector<std::uint8_t> alive_;
    std::vector<std::uint8_t> computed_;
    std::uint64_t z_ = 0;
    std::vector<std::uint64_t> z_by_generation_;
};

CouplingRealization coupling_realization(TreeStore& tree, double lambda, double delay = 0.0);

// --- Biggins martingale ---------------------------------------------------------

struct BigginsTrace
{
    /// W_n = sum over kept particles of generation n of exp(rho V(u)), n = 0..completed.
    std::vector<double> w;
    /// Expected generation-n contribution of particles pruned below the prune
    /// level (their exp(rho V) at pruning times exp(psi(rho)) per later generation).
    std::vector<double> pruned;
    /// max V(u) over kept particles of generation n; -inf when none remain.
    std::vector<double> max_position;
    std::vector<std::uint64_t> particles;
    bool truncated = false;

    double compensated(std::size_t n) const { return w.at(n) + pruned.at(n); }
};

struct BigginsOptions
{
    std::uint32_t n_max = 50;
    std::uint64_t max_particles = 1'000'000;
    /// Particles below this level are dropped; -inf keeps the walk exact.
    double prune_level = -std::numeric_limits<double>::infinity();
};

/// Martingale of the unkilled walk started at 0, with parameter rho.
BigginsTrace biggins_martingale(const PointProcess& proc, double rho, const BigginsOptions& options,
                                const RngStream& rng);

// --- tilted random walk -------------------------------------------------------------

struct QWalkOptions
{
    std::uint64_t step_cap = 10'000'000;
    /// Stop the first-passage phase once S exceeds start + escape_height; NaN
    /// selects 40/kappa in the subcritical regime and no escape when critical.
    double escape_height = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> renewal_levels{0.0, 1.0, 2.0};
    bool record_trajectory = false;
};

struct QWalkSample
{
    /// S_0 = x, ..., S_{tau}; only when recording.
    std::vector<double> trajectory;
    std::uint64_t first_passage_index = 0;
    double overshoot = 0.0; // -S at the first passage below 0
    bool censored = false;
    bool escaped = false;
    /// sum_{j < tau*} 1{S_j >= -x} for the walk started at 0, one entry per level x.
    std::vector<std::uint64_t> renewal_counts;
    std::uint64_t ladder_index = 0;
    bool renewal_censored = false;
};

class QWalk
{
public:
    explicit QWalk(const analytics::ModelParams& params);

    double step(RngStream& stream) const noexcept
    {
        const double side = stream.uniform();
        const double magnitude = -std::log(stream.uniform());
        return side < p_positive_ ? magnitude / law_.rate_positive : -magnitude / law_.rate_negative;
    }

    const analytics::TiltedStepLaw& law() const noexcept { return law_; }
    analytics::Regime regime() const noexcept { return regime_; }
    double kappa() const noexcept { return kappa_; }

    QWalkSample sample(double start, RngStream& stream, const QWalkOptions& options = {}) const;

private:
    analytics::TiltedStepLaw law_;
    analytics::Regime regime_;
    double p_positive_;
    double kappa_;
};

QWalkSample qwalk_first_passage(const analytics::ModelParams& params, double start, RngStream& stream,
                                const QWalkOptions& options = {});

} // namespace pptree
