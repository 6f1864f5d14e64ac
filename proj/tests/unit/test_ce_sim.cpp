#include "pptree/ce_sim.hpp"
#include "pptree/kbrw.hpp"

#include <doctest.h>

#include <cmath>

using namespace pptree;

namespace {

double three_sigma(double p, double n) { return 3.0 * std::sqrt(p * (1 - p) / n); }

} // namespace

TEST_CASE("lone root")
{
    const auto rng = make_stream(1, 0);
    auto t = new_tree(OffspringLaw::table({{0, 1.0}}), {}, rng);
    const auto out = simulate_ce(t, {{kRootNode}, 0.0}, 0.15);
    CHECK(out.z == 1);
    REQUIRE(out.z_by_generation.size() >= 1);
    CHECK(out.z_by_generation[0] == 1);
    CHECK(out.extinct);
    CHECK_FALSE(out.censored);
}

TEST_CASE("first infection race")
{
    const double lambda = 0.15;
    const int n = 100'000;
    const auto est = estimate_ce(lambda, OffspringLaw::d_ary(2), {}, n, {}, 77);
    int two = 0;
    for (const auto& o : est.outcomes)
        two += o.z >= 2;
    const double p = 2 * lambda / (1 + 2 * lambda);
    CHECK(std::abs(two / double(n) - p) < three_sigma(p, n));
    CHECK(est.extinct == static_cast<std::uint64_t>(n));
}

TEST_CASE("trajectories respect the dynamics")
{
    for (const double lambda : {0.1, 0.3}) {
        for (std::uint64_t r = 0; r < 2000; ++r) {
            const auto rng = make_stream(12, r);
            auto t = new_tree(OffspringLaw::d_ary(2), {100'000, 30}, rng);
            CeSimulation sim(t, {{kRootNode}, 0.5}, lambda);
            const auto out = sim.run();
            std::uint64_t infected = 0;
            for (NodeId u = 0; u < t.size(); ++u) {
                const auto it = sim.infection_time(u);
                const auto rt = sim.recovery_time(u);
                if (!it) {
                    REQUIRE_FALSE(rt);
                    REQUIRE(sim.status(u) == CeStatus::S);
                    continue;
                }
                ++infected;
                if (!out.censored)
                    REQUIRE(sim.status(u) == CeStatus::R);
                if (rt)
                    REQUIRE(*rt >= *it);
                if (u == kRootNode) {
                    if (rt)
                        REQUIRE(*rt >= 0.5);
                    continue;
                }
                const NodeId p = t.parent(u);
                const auto pit = sim.infection_time(p);
                REQUIRE(pit);
                REQUIRE(*it >= *pit);
                const auto prt = sim.recovery_time(p);
                // Infection must beat the parent's recovery.
                if (prt)
                    REQUIRE(*it <= *prt);
                if (rt) {
                    REQUIRE(prt);
                    REQUIRE(*rt >= *prt);
                }
            }
            REQUIRE(infected == out.z);
        }
    }
}

TEST_CASE("direct simulation agrees with the coupling on shared draws")
{
    int mismatches = 0;
    for (std::uint64_t r = 0; r < 3000; ++r) {
        const auto rng = make_stream(99, r);
        auto a = new_tree(OffspringLaw::d_ary(2), {100'000, 40}, rng);
        const auto direct = simulate_ce(a, {{kRootNode}, 0.0}, 0.2);
        auto b = new_tree(OffspringLaw::d_ary(2), {100'000, 40}, rng);
        const auto coupled = coupling_realization(b, 0.2);
        mismatches += direct.z != coupled.z();
    }
    CHECK(mismatches == 0);
}

TEST_CASE("supercritical runs survive to the cap")
{
    // Node cap 1e5 keeps the surviving runs cheap; generation cap as in the model description.
    const auto est = estimate_ce(0.5, OffspringLaw::d_ary(2), {}, 2000, {100'000, 200}, 5);
    CHECK(est.censored > 0);
    CHECK(est.extinction_probability < 1.0);
}

TEST_CASE("estimates are reproducible")
{
    const auto a = estimate_ce(0.08, OffspringLaw::d_ary(3), {}, 500, {100'000, 200}, 123, 1);
    const auto b = estimate_ce(0.08, OffspringLaw::d_ary(3), {}, 500, {100'000, 200}, 123, 3);
    REQUIRE(a.outcomes.size() == b.outcomes.size());
    for (std::size_t i = 0; i < a.outcomes.size(); ++i) {
        CHECK(a.outcomes[i].z == b.outcomes[i].z);
        CHECK(a.outcomes[i].extinction_time == b.outcomes[i].extinction_time);
    }
    CHECK(a.mean_z_by_generation == b.mean_z_by_generation);

    const auto one = estimate_ce(0.08, OffspringLaw::d_ary(3), {}, 1, {}, 9);
    REQUIRE(one.outcomes.size() == 1);
    CHECK(one.extinct == (one.outcomes[0].extinct ? 1u : 0u));
    CHECK(one.mean_z_by_generation[0] == 1.0);
}

TEST_CASE("larger initial sets")
{
    InitialSetSpec spec;
    spec.labels = {{}, {0}, {1}};
    spec.delay = 1.0;
    const auto est = estimate_ce(0.1, OffspringLaw::d_ary(2), spec, 200, {}, 4);
    for (const auto& o : est.outcomes)
        CHECK(o.z >= 3);

    InitialSetSpec bad;
    bad.labels = {{0}};
    CHECK_THROWS(estimate_ce(0.1, OffspringLaw::d_ary(2), bad, 10, {}, 4));
}
