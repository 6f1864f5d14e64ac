#include "pptree/harness.hpp"

#include "pptree/analytics.hpp"
#include "pptree/ba_sim.hpp"
#include "pptree/ce_sim.hpp"
#include "pptree/kbrw.hpp"
#include "pptree/parallel.hpp"
#include "pptree/stats.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <list>
#include <map>
#include <span>
#include <sstream>

namespace pptree::harness {

using json = nlohmann::json;

namespace {

constexpr std::array<std::string_view, 8> kKindNames{"analytics", "ce-sim",  "ba-sim", "kbrw-sim",
                                                     "couple-check", "qwalk", "biggins", "tail-fit"};

std::string fmt(double v)
{
    if (!std::isfinite(v))
        return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fnv1a(std::string_view s)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string utc_timestamp()
{
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

bool kind_uses(Kind k, std::initializer_list<Kind> ks)
{
    return std::find(ks.begin(), ks.end(), k) != ks.end();
}

// --- parsing and defaults ---------------------------------------------------------

json parse_text(std::string_view text)
{
    try {
        json j = json::parse(text);
        if (!j.is_object())
            throw ValidationError({"manifest must be a JSON object"});
        return j;
    } catch (const json::parse_error& e) {
        throw ValidationError({std::string("manifest is not valid JSON: ") + e.what()});
    }
}

json apply_overrides(json m, const Overrides& o)
{
    if (!o.patch.empty()) {
        json patch;
        try {
            patch = json::parse(o.patch);
        } catch (const json::parse_error& e) {
            throw ValidationError({std::string("override patch is not valid JSON: ") + e.what()});
        }
        m.merge_patch(patch);
    }
    if (o.seed)
        m["seed"] = *o.seed;
    if (o.workers)
        m["workers"] = *o.workers;
    if (o.out)
        m["out"] = o.out->string();
    return m;
}

void set_default(json& m, const char* key, json value)
{
    if (!m.contains(key))
        m[key] = std::move(value);
}

bool uses_ba(const json& m, Kind k)
{
    if (k == Kind::BaSim)
        return true;
    if (kind_uses(k, {Kind::KbrwSim, Kind::Biggins}))
        return m.value("process", std::string("ce")) == "ba";
    return false;
}

void fill_defaults(json& m, Kind k)
{
    set_default(m, "seed", 0);
    set_default(m, "workers", 1);
    set_default(m, "out", "pptree-out");
    if (k == Kind::TailFit) {
        set_default(m, "column", "Z");
        set_default(m, "censored_column", "censored");
        return;
    }
    if (kind_uses(k, {Kind::KbrwSim, Kind::Biggins}))
        set_default(m, "process", "ce");
    const bool ba = uses_ba(m, k);
    if (!ba && !m.contains("d"))
        set_default(m, "offspring", json{{"kind", "d-ary"}, {"d", 2}});
    if (ba || k == Kind::Analytics)
        set_default(m, "timer", json{{"kind", "exponential"}, {"rate", 1.0}});
    if (k == Kind::Analytics)
        return;
    set_default(m, "caps", json::object());
    set_default(m["caps"], "max_nodes", 10'000'000);
    set_default(m["caps"], "max_generation", 10'000);
    if (k == Kind::CeSim)
        set_default(m, "initial", json{{"labels", json::array({json::array()})}, {"delay", 0.0}});
    if (kind_uses(k, {Kind::KbrwSim, Kind::QWalk}))
        set_default(m, "start", 0.0);
    if (k == Kind::KbrwSim)
        set_default(m, "record_generations", true);
    if (k == Kind::QWalk) {
        set_default(m, "levels", json::array({0.0, 1.0, 2.0}));
        set_default(m, "step_cap", 10'000'000);
    }
    if (k == Kind::Biggins) {
        set_default(m, "n_max", 50);
        set_default(m, "max_particles", 1'000'000);
    }
}

// --- validation ---------------------------------------------------------------------

struct Checker
{
    const json& m;
    std::vector<std::string> errors;

    bool has(const char* key) const { return m.contains(key); }

    std::optional<double> number(const json& obj, const char* key, const std::string& path)
    {
        if (!obj.contains(key)) {
            errors.push_back(path + " is required");
            return std::nullopt;
        }
        if (!obj[key].is_number()) {
            errors.push_back(path + " must be a number");
            return std::nullopt;
        }
        return obj[key].get<double>();
    }

    std::optional<std::uint64_t> count(const json& obj, const char* key, const std::string& path, bool positive)
    {
        if (!obj.contains(key)) {
            errors.push_back(path + " is required");
            return std::nullopt;
        }
        const json& v = obj[key];
        const bool integral = v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0) ||
                              (v.is_number_float() && v.get<double>() >= 0 && v.get<double>() < 1.8e19 &&
                               std::floor(v.get<double>()) == v.get<double>());
        if (!integral) {
            errors.push_back(path + " must be a nonnegative integer");
            return std::nullopt;
        }
        const auto n = v.is_number_float() ? static_cast<std::uint64_t>(v.get<double>()) : v.get<std::uint64_t>();
        if (positive && n == 0) {
            errors.push_back(path + " must be >= 1");
            return std::nullopt;
        }
        return n;
    }
};

std::optional<OffspringLaw> parse_offspring(const json& spec, std::vector<std::string>& errors)
{
    if (!spec.is_object() || !spec.contains("kind") || !spec["kind"].is_string()) {
        errors.push_back("offspring must be an object with a string kind");
        return std::nullopt;
    }
    const auto kind = spec["kind"].get<std::string>();
    try {
        if (kind == "d-ary") {
            if (!spec.contains("d") || !spec["d"].is_number_integer() || spec["d"].get<std::int64_t>() < 1) {
                errors.push_back("offspring.d must be a positive integer for a d-ary law");
                return std::nullopt;
            }
            return OffspringLaw::d_ary(spec["d"].get<std::uint32_t>());
        }
        if (kind == "table") {
            if (!spec.contains("p") || !spec["p"].is_object() || spec["p"].empty()) {
                errors.push_back("offspring.p must map counts to probabilities");
                return std::nullopt;
            }
            std::map<std::uint32_t, double> p;
            for (const auto& [key, value] : spec["p"].items()) {
                std::size_t used = 0;
                unsigned long c = 0;
                try {
                    c = std::stoul(key, &used);
                } catch (const std::exception&) {
                    used = 0;
                }
                if (used != key.size() || !value.is_number()) {
                    errors.push_back("offspring.p entry '" + key + "' must be count -> probability");
                    return std::nullopt;
                }
                p[static_cast<std::uint32_t>(c)] = value.get<double>();
            }
            return OffspringLaw::table(std::move(p));
        }
        if (kind == "poisson") {
            if (!spec.contains("mean") || !spec["mean"].is_number()) {
                errors.push_back("offspring.mean must be a number");
                return std::nullopt;
            }
            return OffspringLaw::poisson(spec["mean"].get<double>());
        }
        errors.push_back("offspring.kind must be d-ary, table or poisson, got '" + kind + "'");
    } catch (const std::invalid_argument& e) {
        errors.push_back(e.what());
    }
    return std::nullopt;
}

std::optional<TimerLaw> parse_timer(const json& spec, std::vector<std::string>& errors)
{
    if (!spec.is_object() || !spec.contains("kind") || !spec["kind"].is_string()) {
        errors.push_back("timer must be an object with a string kind");
        return std::nullopt;
    }
    const auto kind = spec["kind"].get<std::string>();
    try {
        if (kind == "exponential") {
            if (!spec.contains("rate") || !spec["rate"].is_number()) {
                errors.push_back("timer.rate must be a number");
                return std::nullopt;
            }
            return TimerLaw::exponential(spec["rate"].get<double>());
        }
        if (kind == "table") {
            if (!spec.contains("values") || !spec.contains("p") || !spec["values"].is_array() ||
                !spec["p"].is_array()) {
                errors.push_back("timer.values and timer.p must be arrays");
                return std::nullopt;
            }
            TableTimer t;
            for (const auto& v : spec["values"]) {
                if (!v.is_number()) {
                    errors.push_back("timer.values must hold numbers");
                    return std::nullopt;
                }
                t.values.push_back(v.get<double>());
            }
            for (const auto& v : spec["p"]) {
                if (!v.is_number()) {
                    errors.push_back("timer.p must hold numbers");
                    return std::nullopt;
                }
                t.probabilities.push_back(v.get<double>());
            }
            return TimerLaw(t);
        }
        errors.push_back("timer.kind must be exponential or table, got '" + kind + "'");
    } catch (const std::invalid_argument& e) {
        errors.push_back(e.what());
    }
    return std::nullopt;
}

/// Parsed and checked manifest; every field the runners need.
struct Plan
{
    json manifest;
    Kind kind = Kind::Analytics;
    double lambda = 0.0;
    std::optional<OffspringLaw> offspring;
    std::optional<double> d_real; // analytics shorthand
    std::optional<TimerLaw> timer;
    bool ba = false;
    TreeCaps caps;
    std::uint64_t replicates = 0;
    std::uint64_t seed = 0;
    unsigned workers = 1;
    std::filesystem::path out;
    std::optional<std::pair<double, double>> fit;
    std::vector<double> trend;
};

double offspring_mean(const Plan& p)
{
    return p.d_real ? *p.d_real : p.offspring->mean();
}

Plan check(json m)
{
    Plan plan;
    std::vector<std::string> errors;

    if (!m.contains("kind") || !m["kind"].is_string())
        throw ValidationError({"kind is required (one of analytics, ce-sim, ba-sim, kbrw-sim, couple-check, qwalk, "
                               "biggins, tail-fit)"});
    const auto kind = parse_kind(m["kind"].get<std::string>());
    if (!kind)
        throw ValidationError({"unknown kind '" + m["kind"].get<std::string>() + "'"});
    plan.kind = *kind;
    fill_defaults(m, plan.kind);

    Checker c{m, {}};
    if (auto s = c.count(m, "seed", "seed", false))
        plan.seed = *s;
    if (auto w = c.count(m, "workers", "workers", true))
        plan.workers = static_cast<unsigned>(std::min<std::uint64_t>(*w, 1024));
    if (!m["out"].is_string() || m["out"].get<std::string>().empty())
        c.errors.push_back("out must be a nonempty path");
    else
        plan.out = m["out"].get<std::string>();

    if (plan.kind == Kind::TailFit) {
        if (!m.contains("input") || !m["input"].is_string())
            c.errors.push_back("input must name a replicate CSV");
        if (!m["column"].is_string())
            c.errors.push_back("column must be a string");
        if (!m["censored_column"].is_string())
            c.errors.push_back("censored_column must be a string");
        const auto lo = c.number(m, "n_min", "n_min");
        const auto hi = c.number(m, "n_max", "n_max");
        if (lo && hi) {
            if (!(*lo >= 1.0 && *hi > *lo))
                c.errors.push_back("tail range needs 1 <= n_min < n_max");
            else
                plan.fit = {*lo, *hi};
        }
        if (!c.errors.empty())
            throw ValidationError(c.errors);
        plan.manifest = std::move(m);
        return plan;
    }

    if (auto l = c.number(m, "lambda", "lambda")) {
        if (!(*l > 0.0) || !std::isfinite(*l))
            c.errors.push_back("lambda must be positive");
        else
            plan.lambda = *l;
    }

    plan.ba = uses_ba(m, plan.kind);
    if (kind_uses(plan.kind, {Kind::KbrwSim, Kind::Biggins})) {
        if (!m["process"].is_string() || (m["process"] != "ce" && m["process"] != "ba"))
            c.errors.push_back("process must be ce or ba");
    }
    if (m.contains("d")) {
        if (plan.kind != Kind::Analytics)
            c.errors.push_back("d shorthand is only accepted by analytics; use offspring");
        else if (m.contains("offspring"))
            c.errors.push_back("give either d or offspring, not both");
        else if (!m["d"].is_number() || !(m["d"].get<double>() > 1.0))
            c.errors.push_back("d must be a number > 1");
        else
            plan.d_real = m["d"].get<double>();
    }
    if (m.contains("offspring"))
        plan.offspring = parse_offspring(m["offspring"], c.errors);
    if (m.contains("timer"))
        plan.timer = parse_timer(m["timer"], c.errors);

    const bool needs_supercritical_tree = kind_uses(plan.kind, {Kind::Analytics, Kind::QWalk}) ||
                                          (plan.kind == Kind::Biggins && !plan.ba);
    if (needs_supercritical_tree && (plan.offspring || plan.d_real) && !(offspring_mean(plan) > 1.0))
        c.errors.push_back("offspring mean d must exceed 1");

    if (plan.kind != Kind::Analytics) {
        if (auto r = c.count(m, "replicates", "replicates", true))
            plan.replicates = *r;
        const json& caps = m["caps"];
        if (!caps.is_object()) {
            c.errors.push_back("caps must be an object");
        } else {
            if (auto n = c.count(caps, "max_nodes", "caps.max_nodes", true))
                plan.caps.max_nodes = *n;
            if (auto g = c.count(caps, "max_generation", "caps.max_generation", false)) {
                if (*g > 0xFFFFFFF0ULL)
                    c.errors.push_back("caps.max_generation is too large");
                else
                    plan.caps.max_generation = static_cast<std::uint32_t>(*g);
            }
        }
    }

    if (m.contains("fit")) {
        const json& f = m["fit"];
        if (!kind_uses(plan.kind, {Kind::CeSim, Kind::BaSim, Kind::KbrwSim}))
            c.errors.push_back("fit is only accepted by ce-sim, ba-sim and kbrw-sim");
        else if (!f.is_object())
            c.errors.push_back("fit must be an object with n_min and n_max");
        else {
            const auto lo = c.number(f, "n_min", "fit.n_min");
            const auto hi = c.number(f, "n_max", "fit.n_max");
            if (lo && hi) {
                if (!(*lo >= 1.0 && *hi > *lo))
                    c.errors.push_back("fit range needs 1 <= n_min < n_max");
                else
                    plan.fit = {*lo, *hi};
            }
        }
    }
    if (m.contains("trend")) {
        if (!kind_uses(plan.kind, {Kind::CeSim, Kind::BaSim, Kind::KbrwSim}) || !m["trend"].is_array())
            c.errors.push_back("trend must be a list of n > 1 (ce-sim, ba-sim, kbrw-sim)");
        else
            for (const auto& v : m["trend"]) {
                if (!v.is_number() || !(v.get<double>() > 1.0)) {
                    c.errors.push_back("trend entries must be numbers > 1");
                    break;
                }
                plan.trend.push_back(v.get<double>());
            }
    }

    switch (plan.kind) {
    case Kind::Analytics:
        if (m.contains("boundary_generations")) {
            const json& b = m["boundary_generations"];
            if (!b.is_array() || b.empty())
                c.errors.push_back("boundary_generations must be a nonempty list of positive integers");
            else
                for (const auto& g : b)
                    if (!g.is_number_integer() || g.get<std::int64_t>() < 1) {
                        c.errors.push_back("boundary_generations entries must be positive integers");
                        break;
                    }
            if (plan.d_real ? std::floor(*plan.d_real) != *plan.d_real : (plan.offspring && !plan.offspring->is_d_ary()))
                c.errors.push_back("boundary_generations require an integer d (d-ary tree)");
        }
        if (m.contains("conjecture_n") && (!m["conjecture_n"].is_number_integer() || m["conjecture_n"].get<std::int64_t>() < 1))
            c.errors.push_back("conjecture_n must be a positive integer");
        if (m.contains("renewal_x")) {
            if (!m["renewal_x"].is_array())
                c.errors.push_back("renewal_x must be a list of x >= 0");
            else
                for (const auto& x : m["renewal_x"])
                    if (!x.is_number() || !(x.get<double>() >= 0.0)) {
                        c.errors.push_back("renewal_x entries must be numbers >= 0");
                        break;
                    }
        }
        break;
    case Kind::CeSim: {
        const json& a = m["initial"];
        if (!a.is_object() || !a.contains("labels") || !a["labels"].is_array() || a["labels"].empty())
            c.errors.push_back("initial.labels must be a nonempty list of child-index paths");
        else
            for (const auto& label : a["labels"]) {
                bool ok = label.is_array();
                if (ok)
                    for (const auto& i : label)
                        ok = ok && i.is_number_integer() && i.get<std::int64_t>() >= 0;
                if (!ok) {
                    c.errors.push_back("initial.labels entries must be lists of nonnegative integers");
                    break;
                }
            }
        if (a.is_object() && a.contains("delay") && (!a["delay"].is_number() || !(a["delay"].get<double>() >= 0.0)))
            c.errors.push_back("initial.delay must be a number >= 0");
        break;
    }
    case Kind::KbrwSim:
    case Kind::QWalk:
        if (auto x = c.number(m, "start", "start"); x && !(*x >= 0.0))
            c.errors.push_back("start must be >= 0");
        if (plan.kind == Kind::KbrwSim && !m["record_generations"].is_boolean())
            c.errors.push_back("record_generations must be a boolean");
        if (plan.kind == Kind::QWalk) {
            if (!m["levels"].is_array() || m["levels"].empty())
                c.errors.push_back("levels must be a nonempty list of x >= 0");
            else
                for (const auto& x : m["levels"])
                    if (!x.is_number() || !(x.get<double>() >= 0.0)) {
                        c.errors.push_back("levels entries must be numbers >= 0");
                        break;
                    }
            c.count(m, "step_cap", "step_cap", true);
            if (m.contains("escape_height") && (!m["escape_height"].is_number() || !(m["escape_height"].get<double>() > 0.0)))
                c.errors.push_back("escape_height must be a positive number");
            if (plan.lambda > 0.0 && plan.offspring && plan.offspring->mean() > 1.0 &&
                analytics::classify(plan.lambda, plan.offspring->mean()) == analytics::Regime::Supercritical)
                c.errors.push_back("qwalk needs lambda <= lambda_c (the tilted walk does not exist above it)");
        }
        break;
    case Kind::Biggins:
        c.count(m, "n_max", "n_max", false);
        c.count(m, "max_particles", "max_particles", true);
        if (m.contains("rho") && !m["rho"].is_number())
            c.errors.push_back("rho must be a number");
        if (m.contains("prune_level") && !m["prune_level"].is_number())
            c.errors.push_back("prune_level must be a number");
        if (plan.ba && !m.contains("prune_level"))
            c.errors.push_back("prune_level is required for the ba process (infinitely many children)");
        if (!plan.ba && m.contains("rho") && m["rho"].is_number()) {
            const double rho = m["rho"].get<double>();
            if (!(rho > 0.0 && rho < 1.0))
                c.errors.push_back("rho must lie in (0, 1)");
        }
        break;
    case Kind::CoupleCheck:
        if (plan.offspring && !plan.offspring->is_d_ary())
            c.errors.push_back("couple-check compares on a deterministic d-ary tree");
        break;
    default:
        break;
    }

    if (!c.errors.empty())
        throw ValidationError(c.errors);
    plan.manifest = std::move(m);
    return plan;
}

// --- output bundle -------------------------------------------------------------

/// Files are staged next to their destination and renamed only when every file
/// has been written.
class Bundle
{
public:
    Bundle(std::filesystem::path dir, std::string hash, std::uint64_t seed)
        : dir_(std::move(dir)), hash_(std::move(hash)), seed_(seed)
    {
    }
    ~Bundle()
    {
        std::error_code ec;
        for (const auto& [tmp, dest] : staged_)
            std::filesystem::remove(tmp, ec);
    }

    std::ostringstream& file(const std::string& name)
    {
        names_.push_back(name);
        bodies_.emplace_back();
        return bodies_.back();
    }

    const std::string& hash() const noexcept { return hash_; }
    std::uint64_t seed() const noexcept { return seed_; }

    std::vector<std::filesystem::path> commit()
    {
        std::filesystem::create_directories(dir_);
        auto body = bodies_.begin();
        for (std::size_t i = 0; i < names_.size(); ++i, ++body) {
            const auto dest = dir_ / names_[i];
            const auto tmp = dir_ / ("." + names_[i] + ".partial");
            std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
            os << body->str();
            os.close();
            if (!os)
                throw std::runtime_error("cannot write " + tmp.string());
            staged_.emplace_back(tmp, dest);
        }
        std::vector<std::filesystem::path> done;
        for (const auto& [tmp, dest] : staged_) {
            std::filesystem::rename(tmp, dest);
            done.push_back(dest);
        }
        staged_.clear();
        return done;
    }

private:
    std::filesystem::path dir_;
    std::string hash_;
    std::uint64_t seed_;
    std::vector<std::string> names_;
    std::list<std::ostringstream> bodies_;
    std::vector<std::pair<std::filesystem::path, std::filesystem::path>> staged_;
};

void survival_csv(Bundle& b, std::span<const std::uint64_t> values, std::span<const std::uint8_t> censored)
{
    std::uint64_t top = 10;
    for (const auto v : values)
        top = std::max(top, v);
    const auto grid = stats::log_grid(1.0, static_cast<double>(top), stats::kGridPointsPerDecade);
    auto& os = b.file("survival.csv");
    os << "schema_version,manifest_hash,seed,n,survival,censored_mass\n";
    for (const auto& p : stats::survival_function(values, censored, grid))
        os << kSchemaVersion << ',' << b.hash() << ',' << b.seed() << ',' << fmt(p.n) << ',' << fmt(p.survival)
           << ',' << fmt(p.censored_mass) << '\n';
}

json fit_block(const Plan& plan, std::span<const std::uint64_t> values, std::span<const std::uint8_t> censored)
{
    json out = json::object();
    if (plan.fit) {
        const auto f = stats::tail_fit(values, censored, plan.fit->first, plan.fit->second);
        out["tail_fit"] = {{"slope", f.slope},          {"slope_se", f.slope_se},
                           {"n_min", f.n_min},          {"n_max", f.n_max},
                           {"points_used", f.points_used}, {"censor_mass_in_range", f.censor_mass_in_range}};
    }
    if (!plan.trend.empty()) {
        const auto t = stats::critical_trend(values, censored, plan.trend);
        json rows = json::array();
        for (std::size_t i = 0; i < t.size(); ++i)
            rows.push_back({{"n", plan.trend[i]}, {"n_ln2n_survival", t[i]}});
        out["critical_trend"] = rows;
    }
    return out;
}

json interval(const stats::Interval& ci)
{
    return json::array({ci.low, ci.high});
}

std::string csv_optional(const std::optional<double>& v)
{
    return v ? fmt(*v) : std::string();
}

// --- runners ---------------------------------------------------------------------

json run_analytics(const Plan& plan)
{
    const json& m = plan.manifest;
    json r;
    const analytics::ModelParams params = plan.d_real ? analytics::ModelParams(plan.lambda, *plan.d_real)
                                                      : analytics::ModelParams(plan.lambda, *plan.offspring);
    const auto s = analytics::spectral(params);
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    r["spectral"] = {{"lambda", params.lambda()},  {"d", params.d()},
                     {"lambda_c", s.lambda_c},     {"rho_star", s.rho_star},
                     {"delta", s.delta},           {"rho_minus", opt(s.rho_minus)},
                     {"rho_plus", opt(s.rho_plus)}, {"regime", analytics::to_string(s.regime)},
                     {"tail_exponent", opt(s.tail_exponent)}};

    const auto mgf = analytics::TimerMgf::from_law(*plan.timer);
    try {
        const auto b = analytics::ba_spectral(plan.lambda, mgf);
        r["ba_spectral"] = {{"timer", plan.timer->describe()},
                            {"u_star", b.u_star},
                            {"min_value", b.min_value},
                            {"regime", analytics::to_string(b.regime)},
                            {"rho_tilde_minus", opt(b.rho_tilde_minus)},
                            {"rho_tilde_plus", opt(b.rho_tilde_plus)},
                            {"moment_exponent", opt(b.moment_exponent)}};
    } catch (const analytics::DomainError& e) {
        r["ba_spectral"] = {{"error", e.what()}};
    }

    if (s.regime != analytics::Regime::Supercritical) {
        const auto step = analytics::tilted_step_law(params);
        r["tilted_step"] = {{"weight", step.weight},
                            {"rate_positive", step.rate_positive},
                            {"rate_negative", step.rate_negative},
                            {"prob_positive", step.prob_positive()}};
        if (m.contains("renewal_x")) {
            json rows = json::array();
            for (const auto& x : m["renewal_x"])
                rows.push_back({{"x", x}, {"R", analytics::renewal_function(x.get<double>(), params)}});
            r["renewal"] = rows;
        }
        if (m.contains("conjecture_n")) {
            const auto c = analytics::conjecture_rates(params, m["conjecture_n"].get<unsigned>());
            r["conjecture"] = {{"n", m["conjecture_n"]},
                               {"gamma", c.gamma},
                               {"subcritical_rate_over_c3", c.subcritical_rate},
                               {"critical_log_rate", c.critical_log_rate}};
        }
    }
    if (m.contains("boundary_generations")) {
        const auto gens = m["boundary_generations"].get<std::vector<unsigned>>();
        const analytics::ModelParams dary(plan.lambda,
                                          OffspringLaw::d_ary(static_cast<std::uint32_t>(std::lround(params.d()))));
        const auto t = analytics::tail_constants(dary, gens);
        r["tail_constants"] = {{"boundary_generations", gens},
                               {"critical_prefactor", t.critical_prefactor},
                               {"subcritical_prefactor_over_c1", opt(t.subcritical_prefactor_over_c1)},
                               {"exponent", t.exponent}};
    }
    return r;
}

json run_ce(const Plan& plan, Bundle& b)
{
    const json& a = plan.manifest["initial"];
    InitialSetSpec spec;
    spec.labels.clear();
    for (const auto& label : a["labels"])
        spec.labels.push_back(label.get<std::vector<std::uint32_t>>());
    spec.delay = a.value("delay", 0.0);

    // A label may leave the tree in some realizations (finite offspring); that is a manifest error.
    CeEstimate est;
    try {
        est = estimate_ce(plan.lambda, *plan.offspring, spec, plan.replicates, plan.caps, plan.seed, plan.workers);
    } catch (const std::out_of_range& e) {
        throw ValidationError({std::string("initial.labels: ") + e.what()});
    } catch (const std::invalid_argument& e) {
        throw ValidationError({std::string("initial: ") + e.what()});
    }

    std::vector<std::uint64_t> z;
    std::vector<std::uint8_t> cens;
    std::uint64_t by_nodes = 0;
    auto& os = b.file("replicates.csv");
    os << "schema_version,replicate,seed,Z,extinct,censored,max_generation,extinction_time,manifest_hash\n";
    for (const auto& o : est.outcomes) {
        z.push_back(o.z);
        cens.push_back(o.censored ? 1 : 0);
        by_nodes += o.cap == CapHit::Nodes ? 1 : 0;
        os << kSchemaVersion << ',' << o.replicate << ',' << o.seed << ',' << o.z << ',' << int(o.extinct) << ','
           << int(o.censored) << ',' << o.max_generation << ',' << csv_optional(o.extinction_time) << ','
           << b.hash() << '\n';
    }
    survival_csv(b, z, cens);
    auto& prof = b.file("profile.csv");
    prof << "schema_version,manifest_hash,seed,generation,mean_z\n";
    for (std::size_t g = 0; g < est.mean_z_by_generation.size(); ++g)
        prof << kSchemaVersion << ',' << b.hash() << ',' << b.seed() << ',' << g << ','
             << fmt(est.mean_z_by_generation[g]) << '\n';

    json r = fit_block(plan, z, cens);
    r["replicates"] = plan.replicates;
    r["extinct"] = est.extinct;
    r["censored"] = est.censored;
    r["censored_by_node_cap"] = by_nodes;
    r["extinction_probability"] = est.extinction_probability;
    r["extinction_ci95"] = json::array({est.ci_low, est.ci_high});
    r["mean_z_by_generation"] = est.mean_z_by_generation;
    return r;
}

json run_ba(const Plan& plan, Bundle& b)
{
    const auto est = estimate_ba(plan.lambda, *plan.timer, plan.replicates, plan.caps, plan.seed, plan.workers);
    std::vector<std::uint64_t> n;
    std::vector<std::uint8_t> cens;
    std::vector<double> values;
    auto& os = b.file("replicates.csv");
    os << "schema_version,replicate,seed,N,stable,censored,last_removal_time,manifest_hash\n";
    for (const auto& o : est.outcomes) {
        n.push_back(o.n);
        cens.push_back(o.censored ? 1 : 0);
        values.push_back(static_cast<double>(o.n));
        os << kSchemaVersion << ',' << o.replicate << ',' << o.seed << ',' << o.n << ',' << int(o.stable_run) << ','
           << int(o.censored) << ',' << csv_optional(o.last_removal_time) << ',' << b.hash() << '\n';
    }
    survival_csv(b, n, cens);
    const auto mean = stats::mean_with_se(values);
    const auto single = static_cast<std::uint64_t>(std::count(n.begin(), n.end(), 1));

    json r = fit_block(plan, n, cens);
    r["replicates"] = plan.replicates;
    r["stable"] = est.stable;
    r["censored"] = est.censored;
    r["stable_fraction"] = est.stable_fraction;
    r["stable_ci95"] = interval(est.ci);
    r["mean_n"] = mean.mean;
    r["mean_n_se"] = mean.standard_error;
    r["mean_n_includes_censored_lower_bounds"] = est.censored > 0;
    r["p_n_equals_1"] = static_cast<double>(single) / static_cast<double>(plan.replicates);
    return r;
}

PointProcess point_process(const Plan& plan)
{
    if (plan.ba)
        return BaPointProcess{plan.lambda, *plan.timer};
    return CePointProcess{plan.lambda, *plan.offspring};
}

json run_kbrw(const Plan& plan, Bundle& b)
{
    const double start = plan.manifest["start"].get<double>();
    const bool record = plan.manifest["record_generations"].get<bool>();
    const PointProcess proc = point_process(plan);
    const auto outcomes = run_replicates_with(
        plan.replicates, plan.workers, [&] { return KbrwEngine(proc, plan.caps); },
        [&](KbrwEngine& engine, std::uint64_t r) {
            const RngStream rng = make_stream(plan.seed, r);
            if (record)
                return engine.run(rng, start);
            const auto t = engine.run_totals(rng, start);
            KbrwRealization k;
            k.start = start;
            k.z = t.z;
            k.censored = t.censored;
            k.cap = t.cap;
            k.z_by_generation.assign(t.max_generation + 1, 0);
            return k;
        });

    std::vector<std::uint64_t> z;
    std::vector<std::uint8_t> cens;
    std::uint64_t censored = 0;
    auto& os = b.file("replicates.csv");
    os << "schema_version,replicate,seed,Z,censored,cap,max_generation,manifest_hash\n";
    std::ostringstream* lines = record ? &b.file("replicates.jsonl") : nullptr;
    for (std::uint64_t r = 0; r < outcomes.size(); ++r) {
        const auto& o = outcomes[r];
        z.push_back(o.z);
        cens.push_back(o.censored ? 1 : 0);
        censored += o.censored ? 1 : 0;
        os << kSchemaVersion << ',' << r << ',' << plan.seed << ',' << o.z << ',' << int(o.censored) << ','
           << to_string(o.cap) << ',' << (o.z_by_generation.empty() ? 0 : o.z_by_generation.size() - 1) << ','
           << b.hash() << '\n';
        if (lines) {
            const json line = {{"schema_version", kSchemaVersion}, {"replicate", r},          {"seed", plan.seed},
                               {"Z", o.z},                          {"Z_n", o.z_by_generation}, {"censored", o.censored},
                               {"cap", to_string(o.cap)},           {"manifest_hash", b.hash()}};
            *lines << line.dump() << '\n';
        }
    }
    survival_csv(b, z, cens);
    json r = fit_block(plan, z, cens);
    const auto at_least_two = static_cast<std::uint64_t>(std::count_if(z.begin(), z.end(), [](auto v) { return v >= 2; }));
    r["replicates"] = plan.replicates;
    r["censored"] = censored;
    r["finite_fraction"] = 1.0 - static_cast<double>(censored) / static_cast<double>(plan.replicates);
    r["p_z_at_least_2"] = static_cast<double>(at_least_two) / static_cast<double>(plan.replicates);
    r["p_z_at_least_2_ci95"] = interval(stats::binomial_ci(at_least_two, plan.replicates, 0.95));
    return r;
}

json run_couple_check(const Plan& plan, Bundle& b)
{
    // Direct simulation and coupling use disjoint stream families so their Z
    // samples are independent; the killed walk reuses the coupling's streams
    // and must agree with it exactly.
    const std::uint64_t coupling_seed = plan.seed ^ 0x9E3779B97F4A7C15ULL;
    struct Row
    {
        std::uint64_t z_direct = 0;
        std::uint64_t z_coupling = 0;
        std::uint64_t z_kbrw = 0;
        bool identical = true;
    };
    const CePointProcess proc{plan.lambda, *plan.offspring};
    const auto rows = run_replicates_with(
        plan.replicates, plan.workers, [&] { return KbrwEngine(proc, plan.caps); },
        [&](KbrwEngine& engine, std::uint64_t r) {
            Row row;
            {
                const RngStream rng = make_stream(plan.seed, r);
                TreeStore tree(*plan.offspring, plan.caps, rng);
                row.z_direct = simulate_ce(tree, InitialSet{{kRootNode}, 0.0}, plan.lambda).z;
            }
            const RngStream rng = make_stream(coupling_seed, r);
            TreeStore tree(*plan.offspring, plan.caps, rng);
            const CouplingRealization c(tree, plan.lambda);
            const auto k = engine.run(rng, 0.0);
            row.z_coupling = c.z();
            row.z_kbrw = k.z;
            row.identical = c.z() == k.z && c.z_by_generation() == k.z_by_generation;
            return row;
        });

    std::vector<double> a, c;
    std::uint64_t mismatches = 0, direct_two = 0, coupling_two = 0;
    auto& os = b.file("replicates.csv");
    os << "schema_version,replicate,seed,Z_direct,Z_coupling,Z_kbrw,manifest_hash\n";
    for (std::uint64_t r = 0; r < rows.size(); ++r) {
        const auto& row = rows[r];
        a.push_back(static_cast<double>(row.z_direct));
        c.push_back(static_cast<double>(row.z_coupling));
        mismatches += row.identical ? 0 : 1;
        direct_two += row.z_direct >= 2 ? 1 : 0;
        coupling_two += row.z_coupling >= 2 ? 1 : 0;
        os << kSchemaVersion << ',' << r << ',' << plan.seed << ',' << row.z_direct << ',' << row.z_coupling << ','
           << row.z_kbrw << ',' << b.hash() << '\n';
    }
    const auto ks = stats::ks_two_sample(a, c);
    const double n = static_cast<double>(plan.replicates);
    const double d = plan.offspring->mean();
    json r;
    r["replicates"] = plan.replicates;
    r["ks_statistic"] = ks.statistic;
    r["ks_p_value"] = ks.p_value;
    r["coupling_kbrw_mismatches"] = mismatches;
    r["p_z_at_least_2_direct"] = static_cast<double>(direct_two) / n;
    r["p_z_at_least_2_coupling"] = static_cast<double>(coupling_two) / n;
    r["p_z_at_least_2_direct_ci99"] = interval(stats::binomial_ci(direct_two, plan.replicates, 0.99));
    r["p_z_at_least_2_coupling_ci99"] = interval(stats::binomial_ci(coupling_two, plan.replicates, 0.99));
    r["p_z_at_least_2_exact"] = d * plan.lambda / (1.0 + d * plan.lambda);
    r["coupling_seed"] = coupling_seed;
    return r;
}

json run_qwalk(const Plan& plan, Bundle& b)
{
    const json& m = plan.manifest;
    const analytics::ModelParams params(plan.lambda, *plan.offspring);
    const QWalk walk(params);
    QWalkOptions opts;
    opts.step_cap = m["step_cap"].get<std::uint64_t>();
    opts.renewal_levels = m["levels"].get<std::vector<double>>();
    if (m.contains("escape_height"))
        opts.escape_height = m["escape_height"].get<double>();
    const double start = m["start"].get<double>();
    const double rho = walk.law().tilt;

    const auto samples = run_replicates(plan.replicates, plan.workers, [&](std::uint64_t r) {
        RngStream rng = make_stream(plan.seed, r);
        return walk.sample(start, rng, opts);
    });

    std::vector<double> overshoot, weight;
    std::vector<std::vector<double>> renewal(opts.renewal_levels.size());
    std::uint64_t censored = 0, escaped = 0, renewal_censored = 0;
    auto& os = b.file("replicates.csv");
    os << "schema_version,replicate,seed,first_passage_index,overshoot,censored,escaped";
    for (const double x : opts.renewal_levels)
        os << ",renewal_x" << fmt(x);
    os << ",renewal_censored,manifest_hash\n";
    for (std::uint64_t r = 0; r < samples.size(); ++r) {
        const auto& s = samples[r];
        const bool resolved = !s.censored && !s.escaped;
        censored += s.censored ? 1 : 0;
        escaped += s.escaped ? 1 : 0;
        renewal_censored += s.renewal_censored ? 1 : 0;
        if (resolved) {
            overshoot.push_back(s.overshoot);
            weight.push_back(std::exp(rho * s.overshoot));
        }
        if (!s.renewal_censored)
            for (std::size_t l = 0; l < renewal.size(); ++l)
                renewal[l].push_back(static_cast<double>(s.renewal_counts[l]));
        os << kSchemaVersion << ',' << r << ',' << plan.seed << ',' << s.first_passage_index << ','
           << (resolved ? fmt(s.overshoot) : std::string()) << ',' << int(s.censored) << ',' << int(s.escaped);
        for (const auto c : s.renewal_counts)
            os << ',' << c;
        os << ',' << int(s.renewal_censored) << ',' << b.hash() << '\n';
    }

    json r;
    r["replicates"] = plan.replicates;
    r["regime"] = analytics::to_string(walk.regime());
    r["tilt"] = rho;
    r["censored"] = censored;
    r["escaped"] = escaped;
    const auto mo = stats::mean_with_se(overshoot);
    const auto mw = stats::mean_with_se(weight);
    r["mean_overshoot"] = mo.mean;
    r["mean_overshoot_se"] = mo.standard_error;
    r["mean_exp_rho_overshoot"] = mw.mean;
    r["mean_exp_rho_overshoot_se"] = mw.standard_error;
    if (walk.regime() == analytics::Regime::Critical) {
        r["mean_overshoot_exact"] = 2.0 / (1.0 + plan.lambda);
        r["mean_exp_rho_overshoot_exact"] = (1.0 + plan.lambda) / (2.0 * plan.lambda);
    }
    json levels = json::array();
    for (std::size_t l = 0; l < renewal.size(); ++l) {
        const auto e = stats::mean_with_se(renewal[l]);
        levels.push_back({{"x", opts.renewal_levels[l]},
                          {"estimate", e.mean},
                          {"se", e.standard_error},
                          {"closed_form", analytics::renewal_function(opts.renewal_levels[l], params)}});
    }
    r["renewal"] = levels;
    r["renewal_censored"] = renewal_censored;
    return r;
}

json run_biggins(const Plan& plan, Bundle& b)
{
    const json& m = plan.manifest;
    const PointProcess proc = point_process(plan);
    double rho = 0.0;
    if (m.contains("rho")) {
        rho = m["rho"].get<double>();
    } else if (plan.ba) {
        rho = analytics::ba_spectral(plan.lambda, analytics::TimerMgf::from_law(*plan.timer)).u_star;
    } else {
        if (!(plan.offspring->mean() > 1.0))
            throw ValidationError({"offspring mean d must exceed 1"});
        rho = analytics::spectral(analytics::ModelParams(plan.lambda, *plan.offspring)).rho_star;
    }
    BigginsOptions opts;
    opts.n_max = m["n_max"].get<std::uint32_t>();
    opts.max_particles = m["max_particles"].get<std::uint64_t>();
    if (m.contains("prune_level"))
        opts.prune_level = m["prune_level"].get<double>();

    std::vector<BigginsTrace> traces;
    try {
        traces = run_replicates(plan.replicates, plan.workers,
                                [&](std::uint64_t r) { return biggins_martingale(proc, rho, opts, make_stream(plan.seed, r)); });
    } catch (const std::invalid_argument& e) {
        throw ValidationError({e.what()});
    }

    auto& lines = b.file("replicates.jsonl");
    std::uint64_t truncated = 0;
    std::vector<std::vector<double>> by_n(opts.n_max + 1);
    for (std::uint64_t r = 0; r < traces.size(); ++r) {
        const auto& t = traces[r];
        truncated += t.truncated ? 1 : 0;
        std::vector<double> comp;
        for (std::size_t n = 0; n < t.w.size(); ++n) {
            comp.push_back(t.compensated(n));
            if (!t.truncated)
                by_n[n].push_back(t.compensated(n));
        }
        json maxpos = json::array();
        for (const double v : t.max_position)
            maxpos.push_back(std::isfinite(v) ? json(v) : json(nullptr));
        const json line = {{"schema_version", kSchemaVersion}, {"replicate", r},   {"seed", plan.seed},
                           {"W", t.w},                          {"W_compensated", comp},
                           {"max_position", maxpos},            {"particles", t.particles},
                           {"truncated", t.truncated},          {"manifest_hash", b.hash()}};
        lines << line.dump() << '\n';
    }
    auto& os = b.file("martingale.csv");
    os << "schema_version,manifest_hash,seed,n,mean_w,se_w,median_w,runs\n";
    json rows = json::array();
    for (std::size_t n = 0; n < by_n.size(); ++n) {
        auto& v = by_n[n];
        if (v.empty())
            continue;
        const auto e = stats::mean_with_se(v);
        std::sort(v.begin(), v.end());
        const double median = v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
        os << kSchemaVersion << ',' << b.hash() << ',' << plan.seed << ',' << n << ',' << fmt(e.mean) << ','
           << fmt(e.standard_error) << ',' << fmt(median) << ',' << v.size() << '\n';
        rows.push_back({{"n", n}, {"mean", e.mean}, {"se", e.standard_error}, {"median", median}});
    }
    json r;
    r["rho"] = rho;
    r["replicates"] = plan.replicates;
    r["truncated"] = truncated;
    r["generations"] = rows;
    return r;
}

struct CsvColumn
{
    std::vector<std::uint64_t> values;
    std::vector<std::uint8_t> censored;
};

CsvColumn read_csv_column(const std::string& path, const std::string& column, const std::string& censored_column)
{
    std::ifstream in(path);
    if (!in)
        throw ValidationError({"input: cannot open '" + path + "'"});
    auto split = [](const std::string& line) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
            cells.push_back(cell);
        if (!line.empty() && line.back() == ',')
            cells.emplace_back();
        return cells;
    };
    std::string line;
    if (!std::getline(in, line))
        throw ValidationError({"input: '" + path + "' is empty"});
    const auto header = split(line);
    const auto find = [&](const std::string& name) -> std::optional<std::size_t> {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end())
            return std::nullopt;
        return static_cast<std::size_t>(it - header.begin());
    };
    const auto col = find(column);
    if (!col)
        throw ValidationError({"column '" + column + "' is not in " + path});
    const auto cens = find(censored_column);

    CsvColumn out;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty())
            continue;
        const auto cells = split(line);
        if (cells.size() <= *col || (cens && cells.size() <= *cens))
            throw ValidationError({"input row " + std::to_string(row) + " is short"});
        try {
            std::size_t used = 0;
            out.values.push_back(std::stoull(cells[*col], &used));
            if (used != cells[*col].size())
                throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            throw ValidationError({"input row " + std::to_string(row) + ": '" + cells[*col] + "' is not a count"});
        }
        if (cens)
            out.censored.push_back(cells[*cens] == "1" || cells[*cens] == "true" ? 1 : 0);
    }
    if (out.values.empty())
        throw ValidationError({"input: '" + path + "' has no rows"});
    return out;
}

json run_tail_fit(const Plan& plan)
{
    const json& m = plan.manifest;
    const auto data = read_csv_column(m["input"].get<std::string>(), m["column"].get<std::string>(),
                                      m["censored_column"].get<std::string>());
    const auto f = stats::tail_fit(data.values, data.censored, plan.fit->first, plan.fit->second);
    return {{"samples", data.values.size()},
            {"tail_fit",
             {{"slope", f.slope},
              {"slope_se", f.slope_se},
              {"n_min", f.n_min},
              {"n_max", f.n_max},
              {"points_used", f.points_used},
              {"censor_mass_in_range", f.censor_mass_in_range}}}};
}

json hashed_view(json m)
{
    m.erase("out");
    m.erase("workers");
    return m;
}

} // namespace

ValidationError::ValidationError(std::vector<std::string> errors)
    : std::runtime_error([&] {
          std::string s = "invalid manifest:";
          for (const auto& e : errors)
              s += "\n  " + e;
          return s;
      }()),
      errors_(std::move(errors))
{
}

std::string_view to_string(Kind k) noexcept
{
    return kKindNames[static_cast<std::size_t>(k)];
}

std::optional<Kind> parse_kind(std::string_view s) noexcept
{
    for (std::size_t i = 0; i < kKindNames.size(); ++i)
        if (kKindNames[i] == s)
            return static_cast<Kind>(i);
    return std::nullopt;
}

const std::vector<std::string_view>& kind_names()
{
    static const std::vector<std::string_view> names(kKindNames.begin(), kKindNames.end());
    return names;
}

std::vector<std::string> validate(std::string_view manifest_text)
{
    try {
        check(parse_text(manifest_text));
    } catch (const ValidationError& e) {
        return e.errors();
    }
    return {};
}

std::string effective_manifest(std::string_view manifest_text, const Overrides& overrides)
{
    return check(apply_overrides(parse_text(manifest_text), overrides)).manifest.dump();
}

std::string manifest_hash(std::string_view manifest_text)
{
    return fnv1a(hashed_view(check(parse_text(manifest_text)).manifest).dump());
}

RunResult run(std::string_view manifest_text, const Overrides& overrides)
{
    const Plan plan = check(apply_overrides(parse_text(manifest_text), overrides));
    RunResult result;
    result.kind = plan.kind;
    result.manifest_hash = fnv1a(hashed_view(plan.manifest).dump());
    Bundle bundle(plan.out, result.manifest_hash, plan.seed);

    json results;
    switch (plan.kind) {
    case Kind::Analytics:
        results = run_analytics(plan);
        break;
    case Kind::CeSim:
        results = run_ce(plan, bundle);
        break;
    case Kind::BaSim:
        results = run_ba(plan, bundle);
        break;
    case Kind::KbrwSim:
        results = run_kbrw(plan, bundle);
        break;
    case Kind::CoupleCheck:
        results = run_couple_check(plan, bundle);
        break;
    case Kind::QWalk:
        results = run_qwalk(plan, bundle);
        break;
    case Kind::Biggins:
        results = run_biggins(plan, bundle);
        break;
    case Kind::TailFit:
        results = run_tail_fit(plan);
        break;
    }

    json summary;
    summary["schema_version"] = kSchemaVersion;
    summary["tool_version"] = kToolVersion;
    summary["kind"] = to_string(plan.kind);
    summary["manifest"] = plan.manifest;
    summary["manifest_hash"] = result.manifest_hash;
    summary["seed"] = plan.seed;
    summary["results"] = results;
    summary["timestamp"] = utc_timestamp();
    result.summary_json = summary.dump(2);
    bundle.file("summary.json") << result.summary_json << '\n';
    result.files = bundle.commit();
    return result;
}

} // namespace pptree::harness
