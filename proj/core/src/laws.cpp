#include "pptree/laws.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace pptree {

namespace {

template <class... Ts>
struct overloaded : Ts...
{
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

} // namespace

OffspringLaw::OffspringLaw(Spec spec) : spec_(std::move(spec))
{
    std::visit(overloaded{
                   [&](const DAryLaw& l) {
                       mean_ = l.d;
                       max_count_ = l.d;
                   },
                   [&](const TableLaw& l) {
                       if (l.probabilities.empty())
                           throw std::invalid_argument("offspring table is empty");
                       double total = 0.0;
                       for (const auto& [k, p] : l.probabilities) {
                           if (!(p >= 0.0))
                               throw std::invalid_argument("offspring probability must be nonnegative");
                           total += p;
                           mean_ += k * p;
                           values_.push_back(k);
                           cdf_.push_back(total);
                           max_count_ = std::max(max_count_, k);
                       }
                       if (std::abs(total - 1.0) > 1e-12) {
                           std::ostringstream os;
                           os << "offspring probabilities sum to " << total << ", expected 1";
                           throw std::invalid_argument(os.str());
                       }
                       cdf_.back() = 1.0;
                   },
                   [&](const PoissonLaw& l) {
                       if (!(l.mean >= 0.0) || l.mean > 500.0)
                           throw std::invalid_argument("poisson mean must lie in [0, 500]");
                       mean_ = l.mean;
                       max_count_ = 0;
                   },
               },
               spec_);
}

std::uint32_t OffspringLaw::sample(double u) const noexcept
{
    return std::visit(overloaded{
                          [](const DAryLaw& l) { return l.d; },
                          [&](const TableLaw&) {
                              const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
                              const auto i = std::min<std::size_t>(it - cdf_.begin(), values_.size() - 1);
                              return values_[i];
                          },
                          [&](const PoissonLaw& l) {
                              // Sequential inversion.
                              double p = std::exp(-l.mean);
                              double cdf = p;
                              std::uint32_t k = 0;
                              while (u > cdf && k < 10000) {
                                  ++k;
                                  p *= l.mean / k;
                                  cdf += p;
                                  if (p == 0.0 && k > l.mean)
                                      break;
                              }
                              return k;
                          },
                      },
                      spec_);
}

std::string OffspringLaw::describe() const
{
    std::ostringstream os;
    std::visit(overloaded{
                   [&](const DAryLaw& l) { os << "d-ary(d=" << l.d << ")"; },
                   [&](const TableLaw& l) {
                       os << "table{";
                       bool first = true;
                       for (const auto& [k, p] : l.probabilities) {
                           os << (first ? "" : ",") << k << ":" << p;
                           first = false;
                       }
                       os << "}";
                   },
                   [&](const PoissonLaw& l) { os << "poisson(mean=" << l.mean << ")"; },
               },
               spec_);
    return os.str();
}

TimerLaw::TimerLaw(Spec spec) : spec_(std::move(spec))
{
    std::visit(overloaded{
                   [](const ExponentialTimer& t) {
                       if (!(t.rate > 0.0))
                           throw std::invalid_argument("timer rate must be positive");
                   },
                   [&](const TableTimer& t) {
                       if (t.values.empty() || t.values.size() != t.probabilities.size())
                           throw std::invalid_argument("timer table needs matching values and probabilities");
                       double total = 0.0;
                       for (std::size_t i = 0; i < t.values.size(); ++i) {
                           if (!(t.values[i] > 0.0))
                               throw std::invalid_argument("timer values must be strictly positive");
                           if (!(t.probabilities[i] >= 0.0))
                               throw std::invalid_argument("timer probability must be nonnegative");
                           total += t.probabilities[i];
                           cdf_.push_back(total);
                       }
                       if (std::abs(total - 1.0) > 1e-12) {
                           std::ostringstream os;
                           os << "timer probabilities sum to " << total << ", expected 1";
                           throw std::invalid_argument(os.str());
                       }
                       cdf_.back() = 1.0;
                   },
               },
               spec_);
}

double TimerLaw::sample(double u) const noexcept
{
    return std::visit(overloaded{
                          [&](const ExponentialTimer& t) { return -std::log(u) / t.rate; },
                          [&](const TableTimer& t) {
                              const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
                              const auto i = std::min<std::size_t>(it - cdf_.begin(), t.values.size() - 1);
                              return t.values[i];
                          },
                      },
                      spec_);
}

double TimerLaw::mgf(double s) const noexcept
{
    return std::visit(overloaded{
                          [&](const ExponentialTimer& t) {
                              return s < t.rate ? t.rate / (t.rate - s) : std::numeric_limits<double>::infinity();
                          },
                          [&](const TableTimer& t) {
                              double m = 0.0;
                              for (std::size_t i = 0; i < t.values.size(); ++i)
                                  m += t.probabilities[i] * std::exp(s * t.values[i]);
                              return m;
                          },
                      },
                      spec_);
}

double TimerLaw::mgf_domain_upper() const noexcept
{
    return std::visit(overloaded{
                          [](const ExponentialTimer& t) { return t.rate; },
                          [](const TableTimer&) { return std::numeric_limits<double>::infinity(); },
                      },
                      spec_);
}

TimerLaw TimerLaw::scaled(double c) const
{
    if (!(c > 0.0))
        throw std::invalid_argument("timer scale must be positive");
    return std::visit(overloaded{
                          [&](const ExponentialTimer& t) { return TimerLaw(ExponentialTimer{t.rate / c}); },
                          [&](const TableTimer& t) {
                              TableTimer s = t;
                              for (auto& v : s.values)
                                  v *= c;
                              return TimerLaw(std::move(s));
                          },
                      },
                      spec_);
}

std::string TimerLaw::describe() const
{
    std::ostringstream os;
    std::visit(overloaded{
                   [&](const ExponentialTimer& t) { os << "exponential(rate=" << t.rate << ")"; },
                   [&](const TableTimer& t) { os << "table(" << t.values.size() << " atoms)"; },
               },
               spec_);
    return os.str();
}

} // namespace pptree
