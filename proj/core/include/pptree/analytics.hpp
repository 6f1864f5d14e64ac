#pragma once

#include "pptree/laws.hpp"

#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>

// Closed-form quantities of the branching random walk attached to the
// chase-escape process, and of its birth-and-assassination counterpart.
namespace pptree::analytics {

class DomainError : public std::domain_error
{
public:
    using std::domain_error::domain_error;
};

class RegimeError : public std::logic_error
{
public:
    using std::logic_error::logic_error;
};

/// Infection rate lambda together with the offspring law of the tree.
class ModelParams
{
public:
    /// Throws std::invalid_argument unless lambda > 0 and the offspring mean d > 1.
    ModelParams(double lambda, OffspringLaw law);
    ModelParams(double lambda, double d);

    double lambda() const noexcept { return lambda_; }
    double d() const noexcept { return law_.mean(); }
    const OffspringLaw& offspring() const noexcept { return law_; }

private:
    double lambda_;
    OffspringLaw law_;
};

enum class Regime { Subcritical, Critical, Supercritical };

std::string_view to_string(Regime r) noexcept;

inline constexpr double kRegimeTolerance = 1e-12;

struct SpectralData
{
    double lambda_c = 0.0;
    double rho_star = 0.0;
    double delta = 0.0;
    /// rho_- and rho_+ exist only when lambda <= lambda_c.
    std::optional<double> rho_minus;
    std::optional<double> rho_plus;
    Regime regime = Regime::Subcritical;
    /// rho_+ / rho_-, subcritical only.
    std::optional<double> tail_exponent;
};

/// lambda_c = 2d - 1 - 2 sqrt(d(d-1)).
double critical_lambda(double d);

/// Logarithmic generating function psi(t) = ln d + ln(lambda / ((1-t)(lambda+t))), t in (-lambda, 1).
double psi(double t, const ModelParams& params);
double psi_derivative(double t, const ModelParams& params);

Regime classify(double lambda, double d) noexcept;

SpectralData spectral(const ModelParams& params);

/// Renewal function of the tilted walk for x >= 0; critical or subcritical regimes.
double renewal_function(double x, const ModelParams& params);

/// Step law of the tilted walk: a two-sided exponential.
struct TiltedStepLaw
{
    double weight = 0.0;        // common density prefactor
    double rate_positive = 0.0; // density weight * exp(-rate_positive * u), u >= 0
    double rate_negative = 0.0; // density weight * exp(rate_negative * u), u < 0
    double tilt = 0.0;          // rho used for the exponential change of measure

    double prob_positive() const noexcept { return weight / rate_positive; }
    double density(double u) const noexcept;
};

TiltedStepLaw tilted_step_law(const ModelParams& params);
double tilted_step_density(double u, const ModelParams& params);

struct TailConstants
{
    double critical_prefactor = 0.0;
    /// Multiplier of the unknown constant C1; subcritical parameters only.
    std::optional<double> subcritical_prefactor_over_c1;
    /// rho_+/rho_- when subcritical, 1 otherwise (critical decay is 1/(n ln^2 n)).
    double exponent = 1.0;
};

/// Prefactors of P(Z_A > n) for a connected initial set A whose outer boundary has
/// vertices at the given generations. Requires an integer d-ary tree.
TailConstants tail_constants(const ModelParams& params, std::span<const unsigned> boundary_generations);

struct ConjectureRates
{
    double gamma = 0.0;
    /// (gamma d)^n n^(-3/2), to be multiplied by an unknown constant.
    double subcritical_rate = 0.0;
    /// -(3 (1 - 1/d) pi^2)^(1/3) n^(1/3).
    double critical_log_rate = 0.0;
};

ConjectureRates conjecture_rates(const ModelParams& params, unsigned n);

// --- birth-and-assassination -------------------------------------------------

enum class BaRegime { Stable, Critical, Unstable };

std::string_view to_string(BaRegime r) noexcept;

inline constexpr double kBaRegimeTolerance = 1e-9;

/// A timer law described by its moment generating function, finite on (0, domain_upper).
struct TimerMgf
{
    std::function<double(double)> phi;
    double domain_upper = 0.0;
    /// Set when phi is the mgf of an exponential law of this rate.
    std::optional<double> exponential_rate;

    static TimerMgf from_law(const TimerLaw& law);
};

struct BaSpectralData
{
    double u_star = 0.0;
    double min_value = 0.0;
    BaRegime regime = BaRegime::Stable;
    std::optional<double> rho_tilde_minus;
    std::optional<double> rho_tilde_plus;
    std::optional<double> moment_exponent;
};

/// psi~(t) = ln(lambda phi(t) / t).
double ba_psi(double t, double lambda, const TimerMgf& timer);

BaSpectralData ba_spectral(double lambda, const TimerMgf& timer);

} // namespace pptree::analytics
