#include "pptree/rng.hpp"
#include "pptree/stats.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

using namespace pptree;
using namespace pptree::stats;

namespace {

// Integer Pareto sample with P(Z > n) = (n / xm)^(-alpha) for integer n >= xm.
std::vector<std::uint64_t> pareto(std::size_t count, double alpha, double xm, std::uint64_t seed)
{
    auto s = make_stream(seed, 0);
    std::vector<std::uint64_t> out(count);
    for (auto& v : out)
        v = static_cast<std::uint64_t>(std::ceil(xm * std::pow(s.uniform(), -1 / alpha)));
    return out;
}

} // namespace

TEST_CASE("tail fit recovers a Pareto exponent")
{
    // x_m = 10 puts about 4000 of 10^6 draws above 10^2.
    const auto z = pareto(1'000'000, 2.4, 10, 60);
    const auto fit = tail_fit(z, {}, 1e2, 1e4);
    CHECK(std::abs(fit.slope + 2.4) < 0.1);
    CHECK(fit.slope_se > 0);
    CHECK(fit.slope_se < 0.1);
    CHECK(fit.points_used > 10);
    CHECK(fit.censor_mass_in_range == 0.0);
}

TEST_CASE("bootstrap standard error is calibrated")
{
    int covered = 0;
    const int reps = 100;
    for (int r = 0; r < reps; ++r) {
        const auto z = pareto(100'000, 2.4, 30, 1000 + r);
        const auto fit = tail_fit(z, {}, 1e2, 1e4);
        covered += std::abs(fit.slope + 2.4) <= 2 * fit.slope_se;
    }
    CHECK(covered >= 90);
}

TEST_CASE("tail fit refusals")
{
    const std::vector<std::uint64_t> flat(100'000, 7);
    try {
        tail_fit(flat, {}, 1e2, 1e4);
        FAIL("expected a refusal");
    } catch (const TailFitError& e) {
        CHECK(e.kind() == TailFitErrorKind::InsufficientTail);
    }

    auto z = pareto(1'000'000, 2.4, 10, 61);
    std::vector<std::uint8_t> censored(z.size(), 0);
    // Mark a quarter of the tail as censored.
    std::size_t marked = 0;
    for (std::size_t i = 0; i < z.size(); ++i)
        if (z[i] > 100 && marked++ % 4 == 0)
            censored[i] = 1;
    try {
        tail_fit(z, censored, 1e2, 1e4);
        FAIL("expected a refusal");
    } catch (const TailFitError& e) {
        CHECK(e.kind() == TailFitErrorKind::CensorDominated);
    }

    CHECK_THROWS_AS(tail_fit(z, {}, 1e4, 1e2), std::invalid_argument);
    CHECK_THROWS_AS(tail_fit(z, std::vector<std::uint8_t>(3, 0), 1e2, 1e4), std::invalid_argument);
}

TEST_CASE("thinned fit equals the full fit")
{
    const auto z = pareto(300'000, 2.0, 10, 62);
    std::vector<std::uint64_t> tail;
    std::copy_if(z.begin(), z.end(), std::back_inserter(tail), [](std::uint64_t v) { return v > 50; });
    const std::vector<std::uint8_t> none(tail.size(), 0);
    const auto full = tail_fit(z, {}, 50, 5000);
    const auto thin = tail_fit_thinned(tail, none, z.size(), 50, 5000);
    CHECK(thin.slope == doctest::Approx(full.slope).epsilon(1e-12));
    CHECK_THROWS(tail_fit_thinned(tail, none, tail.size() - 1, 50, 5000));
}

TEST_CASE("fit does not depend on sample order")
{
    auto z = pareto(200'000, 2.4, 20, 63);
    const auto a = tail_fit(z, {}, 1e2, 1e4);
    std::reverse(z.begin(), z.end());
    const auto b = tail_fit(z, {}, 1e2, 1e4);
    CHECK(a.slope == doctest::Approx(b.slope).epsilon(1e-12));
}

TEST_CASE("critical trend")
{
    CHECK(critical_trend(std::vector<std::uint64_t>{1, 2, 3}, {}, {}).empty());
    const std::vector<std::uint64_t> z{1, 5, 20, 200, 2000};
    const std::vector<double> ns{10, 100};
    const auto v = critical_trend(z, {}, ns);
    REQUIRE(v.size() == 2);
    CHECK(v[0] == doctest::Approx(10 * std::pow(std::log(10.0), 2) * 3 / 5));
    CHECK(v[1] == doctest::Approx(100 * std::pow(std::log(100.0), 2) * 2 / 5));
}

TEST_CASE("survival function")
{
    const std::vector<std::uint64_t> z{1, 2, 3, 4, 10};
    const std::vector<std::uint8_t> c{0, 1, 0, 0, 0};
    const std::vector<double> grid{0, 2, 5};
    const auto s = survival_function(z, c, grid);
    REQUIRE(s.size() == 3);
    CHECK(s[0].survival == doctest::Approx(1.0));
    // The censored 2 still counts as exceeding.
    CHECK(s[1].survival == doctest::Approx(0.8));
    CHECK(s[1].censored_mass == doctest::Approx(0.2));
    CHECK(s[2].survival == doctest::Approx(0.4));
}

TEST_CASE("two-sample Kolmogorov-Smirnov")
{
    const std::vector<double> a{0.1, 0.4, 0.5, 0.9};
    const auto same = ks_two_sample(a, a);
    CHECK(same.statistic == 0.0);
    CHECK(same.p_value == doctest::Approx(1.0));

    auto s = make_stream(64, 0);
    std::vector<double> u(10'000), v(10'000);
    for (auto& x : u)
        x = s.uniform();
    for (auto& x : v)
        x = s.uniform() + 0.5;
    const auto shifted = ks_two_sample(u, v);
    CHECK(shifted.statistic == doctest::Approx(0.5).epsilon(0.05));
    CHECK(shifted.p_value < 1e-6);

    CHECK(kolmogorov_q(0.0) == doctest::Approx(1.0));
    CHECK(kolmogorov_q(1.36) == doctest::Approx(0.0494).epsilon(0.01));
    CHECK_THROWS(ks_two_sample(std::vector<double>{}, a));
}

TEST_CASE("Wilson interval")
{
    CHECK(binomial_ci(0, 50, 0.95).low == 0.0);
    CHECK(binomial_ci(50, 50, 0.95).high == 1.0);
    const auto ci = binomial_ci(500, 1000, 0.95);
    CHECK(ci.low == doctest::Approx(0.469).epsilon(0.002));
    CHECK(ci.high == doctest::Approx(0.531).epsilon(0.002));
    CHECK_THROWS(binomial_ci(5, 4, 0.95));
    CHECK_THROWS(binomial_ci(1, 4, 1.5));
}

TEST_CASE("grid and mean")
{
    const auto g = log_grid(10, 1000, 40);
    CHECK(g.front() == 10);
    CHECK(g.back() == 1000);
    CHECK(std::is_sorted(g.begin(), g.end()));
    CHECK(std::adjacent_find(g.begin(), g.end()) == g.end());

    const std::vector<double> x{1, 2, 3, 4};
    const auto m = mean_with_se(x);
    CHECK(m.mean == 2.5);
    CHECK(m.standard_error == doctest::Approx(std::sqrt(5.0 / 3 / 4)));
}
