#include "pptree/point_process.hpp"

namespace pptree {

std::vector<double> ce_children(RngStream& stream, const CePointProcess& proc)
{
    const std::uint32_t count = proc.offspring.sample(stream.uniform());
    const double shared = sample_exponential(stream, 1.0);
    std::vector<double> out;
    out.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i)
        out.push_back(shared - sample_exponential(stream, proc.lambda));
    return out;
}

std::vector<double> ba_children(RngStream& stream, const BaPointProcess& proc, double floor)
{
    if (!std::isfinite(floor))
        throw std::invalid_argument("ba_children needs a finite floor");
    const double k = proc.timer.sample(stream.uniform());
    std::vector<double> out;
    double arrival = 0.0;
    for (;;) {
        arrival += sample_exponential(stream, proc.lambda);
        const double v = k - arrival;
        if (v < floor)
            break;
        out.push_back(v);
    }
    return out;
}

std::vector<double> ba_children_given(double k, const std::vector<double>& increments, double floor)
{
    if (!std::isfinite(floor))
        throw std::invalid_argument("ba_children needs a finite floor");
    std::vector<double> out;
    double arrival = 0.0;
    for (const double gap : increments) {
        if (!(gap > 0.0))
            throw std::invalid_argument("arrival increments must be positive");
        arrival += gap;
        const double v = k - arrival;
        if (v < floor)
            return out;
        out.push_back(v);
    }
    throw std::invalid_argument("arrival increments exhausted before crossing the floor");
}

} // namespace pptree
