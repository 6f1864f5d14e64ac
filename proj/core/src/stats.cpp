#include "pptree/stats.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace pptree::stats {

namespace {

struct WlsLine
{
    double slope = 0.0;
    std::size_t points = 0;
    double x_lo = 0.0;
    double x_hi = 0.0;
};

// Fit ln(count/total) ~ a + b ln n with weights = count, over grid points with
// a nonzero count. `tail` is sorted ascending.
WlsLine fit_sorted(std::span<const double> tail, std::uint64_t total, std::span<const double> grid)
{
    double sw = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    WlsLine line;
    for (const double n : grid) {
        const auto above = static_cast<double>(tail.end() - std::upper_bound(tail.begin(), tail.end(), n));
        if (above <= 0.0)
            continue;
        const double x = std::log(n);
        const double y = std::log(above / static_cast<double>(total));
        const double w = above;
        sw += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
        if (line.points == 0)
            line.x_lo = n;
        line.x_hi = n;
        ++line.points;
    }
    const double denom = sw * sxx - sx * sx;
    line.slope = denom > 0.0 ? (sw * sxy - sx * sy) / denom : std::numeric_limits<double>::quiet_NaN();
    return line;
}

bool is_censored(std::span<const std::uint8_t> censored, std::size_t i)
{
    return !censored.empty() && censored[i] != 0;
}

void check_flags(std::span<const std::uint64_t> samples, std::span<const std::uint8_t> censored)
{
    if (!censored.empty() && censored.size() != samples.size())
        throw std::invalid_argument("censor flags must match the samples");
}

} // namespace

std::string_view to_string(TailFitErrorKind k) noexcept
{
    return k == TailFitErrorKind::InsufficientTail ? "InsufficientTail" : "CensorDominated";
}

std::vector<double> log_grid(double lo, double hi, int points_per_decade)
{
    if (!(lo >= 1.0) || !(hi > lo) || points_per_decade <= 0)
        throw std::invalid_argument("log grid needs 1 <= lo < hi and a positive density");
    std::vector<double> grid;
    const double decades = std::log10(hi / lo);
    const int steps = static_cast<int>(std::floor(decades * points_per_decade + 1e-9));
    for (int k = 0; k <= steps; ++k) {
        const double n = std::round(lo * std::pow(10.0, static_cast<double>(k) / points_per_decade));
        if (grid.empty() || n > grid.back())
            grid.push_back(n);
    }
    if (grid.back() < std::round(hi))
        grid.push_back(std::round(hi));
    return grid;
}

TailFit tail_fit(std::span<const std::uint64_t> samples, std::span<const std::uint8_t> censored, double n_min,
                 double n_max, const TailFitOptions& options)
{
    return tail_fit_thinned(samples, censored, samples.size(), n_min, n_max, options);
}

TailFit tail_fit_thinned(std::span<const std::uint64_t> samples, std::span<const std::uint8_t> censored,
                         std::uint64_t total, double n_min, double n_max, const TailFitOptions& options)
{
    check_flags(samples, censored);
    if (total < samples.size())
        throw std::invalid_argument("total must count every observation");
    if (!(n_min >= 1.0) || !(n_max > n_min))
        throw std::invalid_argument("tail fit needs 1 <= n_min < n_max");

    std::vector<double> tail;
    std::size_t uncensored_above = 0;
    std::size_t censored_total = 0;
    std::size_t censored_ambiguous = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto v = static_cast<double>(samples[i]);
        if (is_censored(censored, i)) {
            ++censored_total;
            if (v <= n_max)
                ++censored_ambiguous;
            tail.push_back(std::numeric_limits<double>::infinity());
        } else if (v > n_min) {
            ++uncensored_above;
            tail.push_back(v);
        }
    }

    if (uncensored_above < kMinTailSamples) {
        std::ostringstream os;
        os << "only " << uncensored_above << " uncensored samples exceed n_min=" << n_min << " (need "
           << kMinTailSamples << ")";
        throw TailFitError(TailFitErrorKind::InsufficientTail, os.str());
    }
    const double tail_mass = static_cast<double>(uncensored_above + censored_total);
    const double censor_mass = static_cast<double>(censored_ambiguous) / tail_mass;
    if (censor_mass > kMaxCensorMass) {
        std::ostringstream os;
        os << "censored runs carry " << censor_mass << " of the tail mass in range";
        throw TailFitError(TailFitErrorKind::CensorDominated, os.str());
    }

    std::sort(tail.begin(), tail.end());
    const auto grid = log_grid(n_min, n_max, options.points_per_decade);
    const WlsLine line = fit_sorted(tail, total, grid);
    if (line.points < 3 || !std::isfinite(line.slope))
        throw TailFitError(TailFitErrorKind::InsufficientTail, "fewer than 3 grid points carry tail mass");

    // Bootstrap: the tail size is Binomial(N, K/N) and its members are resampled with replacement.
    std::mt19937_64 gen(options.bootstrap_seed);
    std::binomial_distribution<std::uint64_t> tail_size(total, static_cast<double>(tail.size()) / total);
    std::uniform_int_distribution<std::size_t> pick(0, tail.size() - 1);
    std::vector<double> resample;
    double s1 = 0.0, s2 = 0.0;
    std::size_t used = 0;
    for (std::size_t b = 0; b < options.bootstrap_resamples; ++b) {
        const std::uint64_t k = tail_size(gen);
        resample.resize(k);
        for (auto& r : resample)
            r = tail[pick(gen)];
        std::sort(resample.begin(), resample.end());
        const WlsLine bl = fit_sorted(resample, total, grid);
        if (bl.points < 2 || !std::isfinite(bl.slope))
            continue;
        s1 += bl.slope;
        s2 += bl.slope * bl.slope;
        ++used;
    }

    TailFit fit;
    fit.slope = line.slope;
    fit.slope_se = used > 1 ? std::sqrt(std::max((s2 - s1 * s1 / used) / (used - 1), 0.0)) : 0.0;
    if (!(fit.slope_se > 0.0))
        fit.slope_se = std::numeric_limits<double>::min();
    fit.n_min = line.x_lo;
    fit.n_max = line.x_hi;
    fit.points_used = line.points;
    fit.censor_mass_in_range = censor_mass;
    return fit;
}

std::vector<double> critical_trend(std::span<const std::uint64_t> samples, std::span<const std::uint8_t> censored,
                                   std::span<const double> n_list)
{
    check_flags(samples, censored);
    std::vector<double> out;
    if (n_list.empty())
        return out;
    const auto curve = survival_function(samples, censored, n_list);
    for (std::size_t i = 0; i < curve.size(); ++i) {
        const double n = curve[i].n;
        if (!(n > 1.0))
            throw std::invalid_argument("critical trend needs n > 1");
        if (curve[i].survival > 0.0 && curve[i].censored_mass / curve[i].survival > kMaxCensorMass)
            throw TailFitError(TailFitErrorKind::CensorDominated, "censored runs dominate the tail at n");
        const double ln = std::log(n);
        out.push_back(n * ln * ln * curve[i].survival);
    }
    return out;
}

double kolmogorov_q(double x)
{
    if (x < 0.2)
        return 1.0;
    double sum = 0.0;
    double sign = 1.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * x * x);
        sum += sign * term;
        if (term < 1e-17 * std::abs(sum))
            break;
        sign = -sign;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b)
{
    if (a.empty() || b.empty())
        throw std::invalid_argument("KS test needs two nonempty samples");
    std::vector<double> sa(a.begin(), a.end());
    std::vector<double> sb(b.begin(), b.end());
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());

    const double na = static_cast<double>(sa.size());
    const double nb = static_cast<double>(sb.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    // Step both empirical CDFs past each distinct value so ties do not inflate D.
    while (i < sa.size() && j < sb.size()) {
        const double v = std::min(sa[i], sb[j]);
        while (i < sa.size() && sa[i] == v)
            ++i;
        while (j < sb.size() && sb[j] == v)
            ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }

    KsResult r;
    r.statistic = d;
    r.n_a = sa.size();
    r.n_b = sb.size();
    if (d == 0.0) {
        r.p_value = 1.0;
        return r;
    }
    const double en = std::sqrt(na * nb / (na + nb));
    r.p_value = kolmogorov_q((en + 0.12 + 0.11 / en) * d);
    return r;
}

Interval binomial_ci(std::uint64_t successes, std::uint64_t trials, double level)
{
    if (trials == 0 || successes > trials)
        throw std::invalid_argument("binomial CI needs 0 <= successes <= trials, trials > 0");
    if (!(level > 0.0 && level < 1.0))
        throw std::invalid_argument("confidence level must lie in (0, 1)");
    const double z = boost::math::quantile(boost::math::normal(), 0.5 + level / 2.0);
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(successes) / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = (p + z2 / (2.0 * n)) / denom;
    const double half = z / denom * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
    Interval ci{std::max(0.0, center - half), std::min(1.0, center + half)};
    if (successes == 0)
        ci.low = 0.0;
    if (successes == trials)
        ci.high = 1.0;
    return ci;
}

std::vector<SurvivalPoint> survival_function(std::span<const std::uint64_t> samples,
                                             std::span<const std::uint8_t> censored, std::span<const double> grid)
{
    check_flags(samples, censored);
    std::vector<std::uint64_t> exact;
    std::vector<std::uint64_t> capped;
    for (std::size_t i = 0; i < samples.size(); ++i)
        (is_censored(censored, i) ? capped : exact).push_back(samples[i]);
    std::sort(exact.begin(), exact.end());
    std::sort(capped.begin(), capped.end());

    const double total = static_cast<double>(samples.size());
    std::vector<SurvivalPoint> out;
    out.reserve(grid.size());
    for (const double n : grid) {
        const auto above = exact.end() - std::upper_bound(exact.begin(), exact.end(), n);
        const auto capped_below = std::upper_bound(capped.begin(), capped.end(), n) - capped.begin();
        SurvivalPoint p;
        p.n = n;
        p.survival = total > 0.0 ? static_cast<double>(above + static_cast<std::ptrdiff_t>(capped.size())) / total : 0.0;
        p.censored_mass = total > 0.0 ? static_cast<double>(capped_below) / total : 0.0;
        out.push_back(p);
    }
    return out;
}

MeanEstimate mean_with_se(std::span<const double> values)
{
    if (values.empty())
        return {};
    double sum = 0.0;
    for (const double v : values)
        sum += v;
    const double n = static_cast<double>(values.size());
    const double mean = sum / n;
    double ss = 0.0;
    for (const double v : values)
        ss += (v - mean) * (v - mean);
    MeanEstimate m;
    m.mean = mean;
    m.standard_error = values.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
    return m;
}

} // namespace pptree::stats
