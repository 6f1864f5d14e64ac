#pragma once

#include "pptree/laws.hpp"
#include "pptree/rng.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace pptree {

/// Chase-escape offspring displacements: sum_{i<=U} delta(E - G_i), with one
/// E ~ Exp(1) shared by the siblings and G_i ~ Exp(lambda) i.i.d.
struct CePointProcess
{
    double lambda = 1.0;
    OffspringLaw offspring;
};

/// Birth-and-assassination displacements: K - S_i with S_i partial sums of Exp(lambda).
struct BaPointProcess
{
    double lambda = 1.0;
    TimerLaw timer;
};

/// Draws U, then E, then the U values E - G_i from a sequential stream.
std::vector<double> ce_children(RngStream& stream, const CePointProcess& proc);

/// Draws K, then emits K - S_1, K - S_2, ... stopping at the first value below
/// `floor`. The floor must be finite.
std::vector<double> ba_children(RngStream& stream, const BaPointProcess& proc, double floor);

/// Same emission rule with K and the arrival increments supplied by the caller.
/// Throws if the increments run out before the floor is crossed.
std::vector<double> ba_children_given(double k, const std::vector<double>& increments, double floor);

// Node-addressed draw schedule. Every simulator that walks the tree takes its
// randomness from these slots, so the coupling, the killed walk and the direct
// simulations see identical draws for identical nodes.
inline constexpr std::uint64_t kOffspringSlot = 0; // U of the node
inline constexpr std::uint64_t kNodeDrawSlot = 1;  // E (recovery increment) or K (timer) of the node
inline constexpr std::uint64_t kEdgeSlot = 2;      // G (infection increment) or birth gap of the node

class CeSchedule
{
public:
    CeSchedule(const RngStream& rng, const CePointProcess& proc) noexcept : rng_(&rng), proc_(&proc) {}

    std::uint32_t offspring(NodeKey node) const noexcept
    {
        return proc_->offspring.sample(rng_->uniform_at(node, kOffspringSlot));
    }
    /// R(u) - R(parent of u); the shared E of u's children.
    double recovery_increment(NodeKey node) const noexcept
    {
        return exponential_from_uniform(rng_->uniform_at(node, kNodeDrawSlot), 1.0);
    }
    /// I(u) - I(parent of u).
    double infection_increment(NodeKey node) const noexcept
    {
        return exponential_from_uniform(rng_->uniform_at(node, kEdgeSlot), proc_->lambda);
    }
    double lambda() const noexcept { return proc_->lambda; }
    const OffspringLaw& law() const noexcept { return proc_->offspring; }
    const RngStream& rng() const noexcept { return *rng_; }

private:
    const RngStream* rng_;
    const CePointProcess* proc_;
};

class BaSchedule
{
public:
    BaSchedule(const RngStream& rng, const BaPointProcess& proc) noexcept : rng_(&rng), proc_(&proc) {}

    double timer(NodeKey node) const noexcept { return proc_->timer.sample(rng_->uniform_at(node, kNodeDrawSlot)); }
    /// Gap between the birth of the previous sibling (or the parent's birth) and this node's birth.
    double birth_gap(NodeKey node) const noexcept
    {
        return exponential_from_uniform(rng_->uniform_at(node, kEdgeSlot), proc_->lambda);
    }
    double lambda() const noexcept { return proc_->lambda; }

private:
    const RngStream* rng_;
    const BaPointProcess* proc_;
};

} // namespace pptree
