#pragma once

#include "pptree/laws.hpp"
#include "pptree/tree.hpp"

#include <cstdint>
#include <optional>
#include <vector>

// Event-driven simulation of the chase-escape process C(T, A, x): infected
// vertices infect susceptible children at rate lambda, recovered vertices
// recover infected children at rate 1, and a phantom recovered parent of the
// root becomes active at time x.
namespace pptree {

enum class CeStatus : std::uint8_t { S = 0, I = 1, R = 2 };

struct CeOutcome
{
    std::uint64_t replicate = 0;
    std::uint64_t seed = 0;
    std::uint64_t z = 0;
    std::vector<std::uint64_t> z_by_generation;
    bool extinct = false;
    bool censored = false;
    CapHit cap = CapHit::None;
    std::optional<double> extinction_time;
    std::uint32_t max_generation = 0;
};

/// Full trajectory state of one run, for inspection after `run()`.
class CeSimulation
{
public:
    CeSimulation(TreeStore& tree, InitialSet initial, double lambda);

    CeOutcome run();

    CeStatus status(NodeId id) const { return id < status_.size() ? status_[id] : CeStatus::S; }
    std::optional<double> infection_time(NodeId id) const;
    std::optional<double> recovery_time(NodeId id) const;
    const TreeStore& tree() const noexcept { return *tree_; }

private:
    void grow();

    TreeStore* tree_;
    InitialSet initial_;
    double lambda_;
    std::vector<CeStatus> status_;
    std::vector<double> infected_at_;
    std::vector<double> recovered_at_;
};

/// One replicate. Cap exhaustion yields a censored outcome, never an exception.
CeOutcome simulate_ce(TreeStore& tree, const InitialSet& initial, double lambda);

/// Initial set given as child-index labels from the root, resolved per replicate.
struct InitialSetSpec
{
    std::vector<std::vector<std::uint32_t>> labels{{}};
    double delay = 0.0;
};

struct CeEstimate
{
    std::vector<CeOutcome> outcomes;
    std::uint64_t extinct = 0;
    std::uint64_t censored = 0;
    double extinction_probability = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    /// Mean number of infected vertices per generation.
    std::vector<double> mean_z_by_generation;
};

CeEstimate estimate_ce(double lambda, const OffspringLaw& law, const InitialSetSpec& initial,
                       std::uint64_t replicates, TreeCaps caps, std::uint64_t master_seed,
                       unsigned workers = 1);

} // namespace pptree
