#include "pptree/analytics.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace pptree::analytics {

namespace {

OffspringLaw law_with_mean(double d)
{
    if (!(d > 1.0) || !std::isfinite(d))
        throw std::invalid_argument("offspring mean d must be > 1");
    const double lo = std::floor(d);
    if (d == lo)
        return OffspringLaw::d_ary(static_cast<std::uint32_t>(lo));
    // Two-point law on floor(d), floor(d)+1 with the requested mean.
    const double frac = d - lo;
    return OffspringLaw::table({{static_cast<std::uint32_t>(lo), 1.0 - frac},
                                {static_cast<std::uint32_t>(lo) + 1U, frac}});
}

// d/dt [psi(t)/t] has the sign of g(t) = t psi'(t) - psi(t); g(0+) = -ln d < 0.
double minimize_psi_over_t(const ModelParams& params)
{
    double lo = 1e-9;
    double hi = 1.0 - 1e-9;
    auto g = [&](double t) { return t * psi_derivative(t, params) - psi(t, params); };
    if (g(lo) >= 0.0)
        return lo;
    if (g(hi) <= 0.0)
        return hi;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi)
            break;
        if (g(mid) < 0.0)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

void require_tree_regime(const SpectralData& s, const char* what)
{
    if (s.regime == Regime::Supercritical)
        throw RegimeError(std::string(what) + " is defined only for lambda <= lambda_c");
}

std::uint32_t require_d_ary(const ModelParams& params, const char* what)
{
    const auto* dary = std::get_if<DAryLaw>(&params.offspring().spec());
    if (dary == nullptr || dary->d < 2)
        throw DomainError(std::string(what) + " requires a deterministic d-ary tree with integer d >= 2");
    return dary->d;
}

} // namespace

ModelParams::ModelParams(double lambda, OffspringLaw law) : lambda_(lambda), law_(std::move(law))
{
    if (!(lambda > 0.0) || !std::isfinite(lambda))
        throw std::invalid_argument("lambda must be positive");
    if (!(law_.mean() > 1.0))
        throw std::invalid_argument("offspring mean d must be > 1");
}

ModelParams::ModelParams(double lambda, double d) : ModelParams(lambda, law_with_mean(d)) {}

std::string_view to_string(Regime r) noexcept
{
    switch (r) {
    case Regime::Subcritical:
        return "Subcritical";
    case Regime::Critical:
        return "Critical";
    case Regime::Supercritical:
        return "Supercritical";
    }
    return "?";
}

std::string_view to_string(BaRegime r) noexcept
{
    switch (r) {
    case BaRegime::Stable:
        return "Stable";
    case BaRegime::Critical:
        return "Critical";
    case BaRegime::Unstable:
        return "Unstable";
    }
    return "?";
}

double critical_lambda(double d)
{
    if (!(d > 1.0))
        throw std::invalid_argument("offspring mean d must be > 1");
    // Smaller root of l^2 - 2l(2d-1) + 1; the roots multiply to 1.
    return 1.0 / (2.0 * d - 1.0 + 2.0 * std::sqrt(d * (d - 1.0)));
}

double psi(double t, const ModelParams& params)
{
    const double lambda = params.lambda();
    if (!(t > -lambda && t < 1.0)) {
        std::ostringstream os;
        os << "psi(t) requires t in (-lambda, 1), got t=" << t;
        throw DomainError(os.str());
    }
    return std::log(params.d()) + std::log(lambda) - std::log1p(-t) - std::log(lambda + t);
}

double psi_derivative(double t, const ModelParams& params)
{
    const double lambda = params.lambda();
    if (!(t > -lambda && t < 1.0))
        throw DomainError("psi'(t) requires t in (-lambda, 1)");
    return 1.0 / (1.0 - t) - 1.0 / (lambda + t);
}

Regime classify(double lambda, double d) noexcept
{
    const double lc = 1.0 / (2.0 * d - 1.0 + 2.0 * std::sqrt(d * (d - 1.0)));
    if (std::abs(lambda - lc) <= kRegimeTolerance)
        return Regime::Critical;
    return lambda < lc ? Regime::Subcritical : Regime::Supercritical;
}

SpectralData spectral(const ModelParams& params)
{
    const double lambda = params.lambda();
    const double d = params.d();
    SpectralData s;
    s.lambda_c = critical_lambda(d);
    s.regime = classify(lambda, d);
    s.delta = lambda * lambda - 2.0 * lambda * (2.0 * d - 1.0) + 1.0;
    s.rho_star = minimize_psi_over_t(params);
    switch (s.regime) {
    case Regime::Critical:
        s.delta = std::max(s.delta, 0.0);
        s.rho_minus = s.rho_star;
        s.rho_plus = s.rho_star;
        break;
    case Regime::Subcritical: {
        const double root = std::sqrt(s.delta);
        const double rho_plus = 0.5 * (1.0 - lambda + root);
        // Same root as (1 - lambda - sqrt(delta))/2, written without cancellation.
        const double rho_minus = lambda * (d - 1.0) / rho_plus;
        s.rho_plus = rho_plus;
        s.rho_minus = rho_minus;
        s.tail_exponent = rho_plus / rho_minus;
        break;
    }
    case Regime::Supercritical:
        break;
    }
    return s;
}

double renewal_function(double x, const ModelParams& params)
{
    if (!(x >= 0.0))
        throw DomainError("renewal function requires x >= 0");
    const auto s = spectral(params);
    require_tree_regime(s, "renewal function");
    const double lambda = params.lambda();
    if (s.regime == Regime::Critical)
        return 1.0 + (1.0 + lambda) * x / 2.0;
    const double rho = *s.rho_plus;
    const double kappa = 2.0 * rho + lambda - 1.0;
    return (rho + lambda) / kappa + (rho - 1.0) / kappa * std::exp(-kappa * x);
}

double TiltedStepLaw::density(double u) const noexcept
{
    return u >= 0.0 ? weight * std::exp(-rate_positive * u) : weight * std::exp(rate_negative * u);
}

TiltedStepLaw tilted_step_law(const ModelParams& params)
{
    const auto s = spectral(params);
    require_tree_regime(s, "tilted step law");
    const double lambda = params.lambda();
    TiltedStepLaw law;
    law.tilt = s.regime == Regime::Critical ? s.rho_star : *s.rho_plus;
    law.weight = lambda * params.d() / (lambda + 1.0);
    law.rate_positive = 1.0 - law.tilt;
    law.rate_negative = lambda + law.tilt;
    return law;
}

double tilted_step_density(double u, const ModelParams& params)
{
    return tilted_step_law(params).density(u);
}

TailConstants tail_constants(const ModelParams& params, std::span<const unsigned> boundary_generations)
{
    const double d = require_d_ary(params, "boundary-sum prefactors");
    if (boundary_generations.empty())
        throw std::invalid_argument("boundary generations must be nonempty");
    const auto s = spectral(params);
    const double lambda = params.lambda();
    const double base = d - std::sqrt(d * (d - 1.0));

    TailConstants out;
    double critical_sum = 0.0;
    double subcritical_sum = 0.0;
    for (const unsigned k : boundary_generations) {
        if (k == 0)
            throw std::invalid_argument("boundary vertices have generation >= 1");
        critical_sum += k / (d * std::pow(base, static_cast<double>(k) - 1.0));
        if (s.regime == Regime::Subcritical)
            subcritical_sum += std::pow(*s.rho_minus + lambda, -static_cast<double>(k)) -
                               std::pow(*s.rho_plus + lambda, -static_cast<double>(k));
    }
    out.critical_prefactor = (1.0 + std::sqrt(d / (d - 1.0))) * critical_sum;
    if (s.regime == Regime::Subcritical) {
        out.subcritical_prefactor_over_c1 = lambda * subcritical_sum / std::sqrt(s.delta);
        out.exponent = *s.tail_exponent;
    }
    return out;
}

ConjectureRates conjecture_rates(const ModelParams& params, unsigned n)
{
    const double d = require_d_ary(params, "level-reaching rates");
    require_tree_regime(spectral(params), "level-reaching rates");
    if (n == 0)
        throw std::invalid_argument("n must be positive");
    const double lambda = params.lambda();
    ConjectureRates r;
    r.gamma = 4.0 * lambda / ((1.0 + lambda) * (1.0 + lambda));
    const double nn = n;
    r.subcritical_rate = std::exp(nn * std::log(r.gamma * d) - 1.5 * std::log(nn));
    r.critical_log_rate =
        -std::cbrt(3.0 * (1.0 - 1.0 / d) * std::numbers::pi * std::numbers::pi) * std::cbrt(nn);
    return r;
}

TimerMgf TimerMgf::from_law(const TimerLaw& law)
{
    TimerMgf m;
    m.phi = [law](double t) { return law.mgf(t); };
    m.domain_upper = law.mgf_domain_upper();
    if (const auto* e = std::get_if<ExponentialTimer>(&law.spec()))
        m.exponential_rate = e->rate;
    return m;
}

double ba_psi(double t, double lambda, const TimerMgf& timer)
{
    if (!(t > 0.0) || !(t < timer.domain_upper))
        throw DomainError("psi~(t) requires t in (0, domain upper bound)");
    return std::log(lambda * timer.phi(t) / t);
}

BaSpectralData ba_spectral(double lambda, const TimerMgf& timer)
{
    if (!(lambda > 0.0))
        throw std::invalid_argument("lambda must be positive");
    if (!timer.phi || !(timer.domain_upper > 0.0))
        throw DomainError("timer mgf needs a positive domain upper bound");

    const auto f = [&](double u) {
        const double v = lambda * timer.phi(u) / u;
        return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    };

    double lo = 0.0;
    double hi = timer.domain_upper;
    if (!std::isfinite(hi)) {
        // The objective is convex and blows up at 0; walk right until it increases.
        hi = 1.0;
        while (hi < 0x1.0p60 && std::isfinite(f(2.0 * hi)) && f(2.0 * hi) < f(hi))
            hi *= 2.0;
        hi *= 2.0;
    }
    bool any_finite = false;
    for (int i = 1; i < 64; ++i)
        any_finite = any_finite || std::isfinite(f(lo + (hi - lo) * i / 64.0));
    if (!any_finite)
        throw DomainError("timer mgf is infinite on the whole stated domain");

    // Golden-section search on the open interval.
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo;
    double b = hi;
    double c = b - inv_phi * (b - a);
    double e = a + inv_phi * (b - a);
    double fc = f(c);
    double fe = f(e);
    while (b - a > 1e-10) {
        if (fc < fe) {
            b = e;
            e = c;
            fe = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + inv_phi * (b - a);
            fe = f(e);
        }
    }

    BaSpectralData out;
    out.u_star = 0.5 * (a + b);
    out.min_value = f(out.u_star);
    if (std::abs(out.min_value - 1.0) <= kBaRegimeTolerance)
        out.regime = BaRegime::Critical;
    else
        out.regime = out.min_value < 1.0 ? BaRegime::Stable : BaRegime::Unstable;

    if (timer.exponential_rate && out.regime != BaRegime::Unstable) {
        // lambda r / (u (r - u)) = 1  <=>  u^2 - r u + lambda r = 0.
        const double r = *timer.exponential_rate;
        const double disc = std::max(r * r - 4.0 * lambda * r, 0.0);
        out.rho_tilde_plus = 0.5 * (r + std::sqrt(disc));
        out.rho_tilde_minus = lambda * r / *out.rho_tilde_plus;
        if (out.regime == BaRegime::Stable)
            out.moment_exponent = *out.rho_tilde_plus / *out.rho_tilde_minus;
    }
    return out;
}

} // namespace pptree::analytics
