#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace pptree {

// Offspring distribution nu of the tree.
struct DAryLaw
{
    std::uint32_t d = 2;
};

struct TableLaw
{
    std::map<std::uint32_t, double> probabilities;
};

struct PoissonLaw
{
    double mean = 1.0;
};

class OffspringLaw
{
public:
    using Spec = std::variant<DAryLaw, TableLaw, PoissonLaw>;

    OffspringLaw() : OffspringLaw(DAryLaw{2}) {}
    explicit OffspringLaw(Spec spec);

    static OffspringLaw d_ary(std::uint32_t d) { return OffspringLaw(DAryLaw{d}); }
    static OffspringLaw table(std::map<std::uint32_t, double> p) { return OffspringLaw(TableLaw{std::move(p)}); }
    static OffspringLaw poisson(double mean) { return OffspringLaw(PoissonLaw{mean}); }

    const Spec& spec() const noexcept { return spec_; }
    double mean() const noexcept { return mean_; }
    bool is_d_ary() const noexcept { return std::holds_alternative<DAryLaw>(spec_); }
    /// Largest possible offspring count, or 0 when unbounded (Poisson).
    std::uint32_t max_count() const noexcept { return max_count_; }

    /// Inverse-CDF draw from one uniform in (0,1).
    std::uint32_t sample(double u) const noexcept;

    std::string describe() const;

private:
    Spec spec_;
    double mean_ = 0.0;
    std::uint32_t max_count_ = 0;
    std::vector<std::uint32_t> values_;
    std::vector<double> cdf_;
};

// Law of the assassination timer K of the birth-and-assassination process.
struct ExponentialTimer
{
    double rate = 1.0;
};

struct TableTimer
{
    std::vector<double> values;
    std::vector<double> probabilities;
};

class TimerLaw
{
public:
    using Spec = std::variant<ExponentialTimer, TableTimer>;

    TimerLaw() : TimerLaw(ExponentialTimer{1.0}) {}
    explicit TimerLaw(Spec spec);

    static TimerLaw exponential(double rate) { return TimerLaw(ExponentialTimer{rate}); }

    const Spec& spec() const noexcept { return spec_; }
    bool is_exponential() const noexcept { return std::holds_alternative<ExponentialTimer>(spec_); }

    double sample(double u) const noexcept;

    /// Moment generating function E[exp(t K)]; +inf outside the domain.
    double mgf(double t) const noexcept;
    /// Supremum of the open domain (0, b) on which the mgf is finite.
    double mgf_domain_upper() const noexcept;

    /// Law of c*K.
    TimerLaw scaled(double c) const;

    std::string describe() const;

private:
    Spec spec_;
    std::vector<double> cdf_;
};

} // namespace pptree
