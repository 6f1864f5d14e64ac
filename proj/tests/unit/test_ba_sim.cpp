#include "pptree/ba_sim.hpp"
#include "pptree/kbrw.hpp"
#include "pptree/stats.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace pptree;

namespace {

double three_sigma(double p, double n) { return 3.0 * std::sqrt(p * (1 - p) / n); }

} // namespace

TEST_CASE("removal before the first birth")
{
    // A timer that always rings after 1e-9 almost never sees a birth.
    const TimerLaw tiny(TableTimer{{1e-9}, {1.0}});
    for (std::uint64_t r = 0; r < 100; ++r) {
        const auto o = simulate_ba(0.25, tiny, {}, make_stream(50, r));
        CHECK(o.n == 1);
        CHECK(o.stable_run);
        REQUIRE(o.last_removal_time);
        CHECK(*o.last_removal_time == doctest::Approx(1e-9));
    }
}

TEST_CASE("critical rate: lone root probability and mean size")
{
    const int n = 100'000;
    const auto est = estimate_ba(0.25, TimerLaw::exponential(1.0), n, {1'000'000, 10'000}, 51);
    int single = 0;
    double sum = 0;
    for (const auto& o : est.outcomes) {
        single += o.n == 1;
        sum += static_cast<double>(o.n);
    }
    const double p = 1 / 1.25;
    CHECK(std::abs(single / double(n) - p) < three_sigma(p, n));
    CHECK(sum / n == doctest::Approx(2.0).epsilon(0.15));
}

TEST_CASE("stability depends on the rate")
{
    const TreeCaps caps{1'000'000, 200};
    const auto stable = estimate_ba(0.1, TimerLaw::exponential(1.0), 10'000, caps, 52);
    CHECK(stable.stable_fraction >= 0.999);
    CHECK(stable.ci.low <= stable.stable_fraction);
    CHECK(stable.stable_fraction <= stable.ci.high);

    const auto unstable = estimate_ba(0.4, TimerLaw::exponential(1.0), 2'000, {100'000, 200}, 53);
    CHECK(unstable.censored > 0);
}

TEST_CASE("recorded individuals are consistent")
{
    for (std::uint64_t r = 0; r < 2000; ++r) {
        const auto o = simulate_ba(0.2, TimerLaw::exponential(1.0), {100'000, 10'000}, make_stream(54, r), true);
        REQUIRE(o.individuals.size() == o.n);
        double last = 0;
        for (std::size_t i = 0; i < o.individuals.size(); ++i) {
            const auto& x = o.individuals[i];
            last = std::max(last, x.removal_time);
            REQUIRE(x.birth_time <= x.at_risk_from);
            REQUIRE(x.at_risk_from <= x.removal_time);
            if (i == 0)
                continue;
            const auto& p = o.individuals[x.parent];
            REQUIRE(x.generation == p.generation + 1);
            REQUIRE(x.birth_time >= p.birth_time);
            REQUIRE(x.birth_time <= p.removal_time);
            REQUIRE(x.at_risk_from == p.removal_time);
            REQUIRE(x.removal_time >= p.removal_time);
        }
        REQUIRE(o.last_removal_time);
        REQUIRE(*o.last_removal_time == last);
    }
}

TEST_CASE("direct simulation matches the killed walk")
{
    const BaPointProcess proc{0.2, TimerLaw::exponential(1.0)};
    KbrwEngine engine(proc, {1'000'000, 10'000});
    int mismatches = 0;
    for (std::uint64_t r = 0; r < 20'000; ++r) {
        const auto rng = make_stream(55, r);
        mismatches += simulate_ba(0.2, proc.timer, {1'000'000, 10'000}, rng).n != engine.run_totals(rng, 0.0).z;
    }
    CHECK(mismatches == 0);
}

TEST_CASE("time rescaling leaves the size law unchanged")
{
    const int n = 50'000;
    const TreeCaps caps{1'000'000, 10'000};
    const auto a = estimate_ba(0.2, TimerLaw::exponential(1.0), n, caps, 56);
    const auto b = estimate_ba(0.1, TimerLaw::exponential(1.0).scaled(2.0), n, caps, 57);
    std::vector<double> na, nb;
    for (const auto& o : a.outcomes)
        na.push_back(static_cast<double>(o.n));
    for (const auto& o : b.outcomes)
        nb.push_back(static_cast<double>(o.n));
    CHECK(stats::ks_two_sample(na, nb).p_value > 0.01);
}

TEST_CASE("reproducible across worker counts")
{
    const auto a = estimate_ba(0.22, TimerLaw::exponential(1.0), 1000, {}, 58, 1);
    const auto b = estimate_ba(0.22, TimerLaw::exponential(1.0), 1000, {}, 58, 4);
    REQUIRE(a.outcomes.size() == b.outcomes.size());
    for (std::size_t i = 0; i < a.outcomes.size(); ++i) {
        CHECK(a.outcomes[i].n == b.outcomes[i].n);
        CHECK(a.outcomes[i].last_removal_time == b.outcomes[i].last_removal_time);
    }
    CHECK_THROWS(estimate_ba(0.0, TimerLaw::exponential(1.0), 10, {}, 1));
}
