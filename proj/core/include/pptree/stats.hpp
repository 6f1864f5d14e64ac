#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

// Estimators and tests for confronting simulated totals with tail asymptotics.
namespace pptree::stats {

enum class TailFitErrorKind { InsufficientTail, CensorDominated };

class TailFitError : public std::runtime_error
{
public:
    TailFitError(TailFitErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    TailFitErrorKind kind() const noexcept { return kind_; }

private:
    TailFitErrorKind kind_;
};

std::string_view to_string(TailFitErrorKind k) noexcept;

/// Largest fraction of the tail mass that may come from censored runs.
inline constexpr double kMaxCensorMass = 0.10;
inline constexpr std::size_t kMinTailSamples = 1000;
inline constexpr int kGridPointsPerDecade = 40;

struct TailFit
{
    double slope = 0.0;
    double slope_se = 0.0;
    /// Grid range that carried data (empty grid points are dropped).
    double n_min = 0.0;
    double n_max = 0.0;
    std::size_t points_used = 0;
    double censor_mass_in_range = 0.0;
};

struct TailFitOptions
{
    int points_per_decade = kGridPointsPerDecade;
    std::size_t bootstrap_resamples = 200;
    std::uint64_t bootstrap_seed = 0x5EED;
};

/// Weighted least-squares slope of ln P(Z > n) against ln n on a log-spaced grid
/// of [n_min, n_max]. Each grid point is weighted by its exceedance count (the
/// inverse variance of ln P-hat); the standard error comes from a bootstrap of
/// the tail sample. Censored samples are right-censored: they are counted as
/// exceeding every grid point, and the fit is refused if they exceed
/// kMaxCensorMass of the tail mass. `censored` may be empty.
TailFit tail_fit(std::span<const std::uint64_t> samples, std::span<const std::uint8_t> censored,
                 double n_min, double n_max, const TailFitOptions& options = {});

/// Same fit from a pre-thinned sample: `tail` holds every observation above
/// n_min plus every censored one, out of `total` observations in all.
TailFit tail_fit_thinned(std::span<const std::uint64_t> tail, std::span<const std::uint8_t> censored,
                         std::uint64_t total, double n_min, double n_max, const TailFitOptions& options = {});

/// n (ln n)^2 P-hat(Z > n) for each n.
std::vector<double> critical_trend(std::span<const std::uint64_t> samples, std::span<const std::uint8_t> censored,
                                   std::span<const double> n_list);

struct KsResult
{
    double statistic = 0.0;
    double p_value = 1.0;
    std::size_t n_a = 0;
    std::size_t n_b = 0;
};

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.
KsResult ks_two_sample(std::span<const double> a, std::span<const double> b);

/// Complementary Kolmogorov distribution Q(x) = 2 sum_{k>=1} (-1)^(k-1) exp(-2 k^2 x^2).
double kolmogorov_q(double x);

struct Interval
{
    double low = 0.0;
    double high = 1.0;
};

/// Wilson score interval.
Interval binomial_ci(std::uint64_t successes, std::uint64_t trials, double level);

/// Log-spaced integer grid on [lo, hi], deduplicated.
std::vector<double> log_grid(double lo, double hi, int points_per_decade);

struct SurvivalPoint
{
    double n = 0.0;
    double survival = 0.0;      // P-hat(Z > n), censored runs counted as exceeding
    double censored_mass = 0.0; // fraction of all samples that are censored with value <= n
};

std::vector<SurvivalPoint> survival_function(std::span<const std::uint64_t> samples,
                                             std::span<const std::uint8_t> censored, std::span<const double> grid);

struct MeanEstimate
{
    double mean = 0.0;
    double standard_error = 0.0;
};

MeanEstimate mean_with_se(std::span<const double> values);

} // namespace pptree::stats
