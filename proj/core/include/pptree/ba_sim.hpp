#pragma once

#include "pptree/laws.hpp"
#include "pptree/rng.hpp"
#include "pptree/stats.hpp"
#include "pptree/tree.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace pptree {

struct BaIndividual
{
    NodeKey key = kRootKey;
    std::uint32_t parent = 0; // index into the record; the root points at itself
    std::uint32_t generation = 0;
    double birth_time = 0.0;
    /// Removal time of the parent; the individual's own timer starts here.
    double at_risk_from = 0.0;
    double removal_time = 0.0;
};

struct BaOutcome
{
    std::uint64_t replicate = 0;
    std::uint64_t seed = 0;
    std::uint64_t n = 0; // ever-born individuals, root included
    bool stable_run = false;
    bool censored = false;
    CapHit cap = CapHit::None;
    std::optional<double> last_removal_time;
    std::uint32_t max_generation = 0;
    /// Filled only when requested.
    std::vector<BaIndividual> individuals;
};

/// Direct simulation. The root is born at 0 and removed at K; an individual born
/// at b whose parent is removed at t_p is removed at t_p + K and gives birth at
/// the Poisson(lambda) arrivals in [b, t_p + K]. `caps.max_nodes` bounds births,
/// `caps.max_generation` bounds depth; either censors the run.
BaOutcome simulate_ba(double lambda, const TimerLaw& timer, TreeCaps caps, const RngStream& rng,
                      bool record_individuals = false);

struct BaEstimate
{
    std::vector<BaOutcome> outcomes;
    std::uint64_t stable = 0;
    std::uint64_t censored = 0;
    double stable_fraction = 0.0;
    stats::Interval ci;
};

BaEstimate estimate_ba(double lambda, const TimerLaw& timer, std::uint64_t replicates, TreeCaps caps,
                       std::uint64_t master_seed, unsigned workers = 1);

} // namespace pptree
