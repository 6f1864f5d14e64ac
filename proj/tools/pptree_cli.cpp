// pptree: command-line front end of the experiment harness.
//
//   pptree ce-sim --lambda 0.15 --replicates 100000 --seed 7 --out results/ce
//   pptree tail-fit --input results/kbrw/replicates.csv --column Z --n-min 50 --n-max 2000
//
// Exit codes: 0 success, 2 invalid manifest or flags, 3 statistical refusal.

#include "pptree/harness.hpp"
#include "pptree/stats.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitRefused = 3;

struct Flags
{
    std::optional<double> lambda;
    std::optional<double> d;
    std::optional<std::uint64_t> replicates;
    std::optional<std::uint64_t> max_nodes;
    std::optional<std::uint64_t> max_generation;
    std::optional<double> start;
    std::optional<double> delay;
    std::optional<std::string> process;
    std::optional<double> rho;
    std::optional<std::uint32_t> n_max_generations;
    std::optional<double> prune_level;
    std::optional<std::string> input;
    std::optional<std::string> column;
    std::optional<double> fit_lo;
    std::optional<double> fit_hi;
    bool validate_only = false;
};

std::string read_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot read manifest " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

nlohmann::json patch_from(const Flags& f, std::string_view kind)
{
    nlohmann::json p = nlohmann::json::object();
    if (f.lambda)
        p["lambda"] = *f.lambda;
    if (f.d) {
        if (kind == "analytics")
            p["d"] = *f.d;
        else
            p["offspring"] = {{"kind", "d-ary"}, {"d", static_cast<long>(*f.d)}};
    }
    if (f.replicates)
        p["replicates"] = *f.replicates;
    if (f.max_nodes)
        p["caps"]["max_nodes"] = *f.max_nodes;
    if (f.max_generation)
        p["caps"]["max_generation"] = *f.max_generation;
    if (f.start)
        p["start"] = *f.start;
    if (f.delay)
        p["initial"]["delay"] = *f.delay;
    if (f.process)
        p["process"] = *f.process;
    if (f.rho)
        p["rho"] = *f.rho;
    if (f.n_max_generations)
        p["n_max"] = *f.n_max_generations;
    if (f.prune_level)
        p["prune_level"] = *f.prune_level;
    if (f.input)
        p["input"] = *f.input;
    if (f.column)
        p["column"] = *f.column;
    if (kind == "tail-fit") {
        if (f.fit_lo)
            p["n_min"] = *f.fit_lo;
        if (f.fit_hi)
            p["n_max"] = *f.fit_hi;
    } else if (f.fit_lo || f.fit_hi) {
        if (f.fit_lo)
            p["fit"]["n_min"] = *f.fit_lo;
        if (f.fit_hi)
            p["fit"]["n_max"] = *f.fit_hi;
    }
    return p;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Chase-escape and birth-and-assassination simulations on trees"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(pptree::harness::kToolVersion));

    std::optional<std::uint64_t> seed;
    std::optional<unsigned> workers;
    std::optional<std::string> out;
    std::optional<std::string> manifest_path;
    app.add_option("--seed", seed, "master seed (stream index = replicate index)");
    app.add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
    app.add_option("--out", out, "output directory");
    app.add_option("--manifest", manifest_path, "JSON manifest; flags override its fields")->check(CLI::ExistingFile);

    Flags f;
    for (const auto kind : pptree::harness::kind_names()) {
        auto* sub = app.add_subcommand(std::string(kind));
        sub->fallthrough();
        sub->add_flag("--validate", f.validate_only, "check the manifest and exit");
        if (kind == "tail-fit") {
            sub->description("Fit the tail slope of a replicate CSV column");
            sub->add_option("--input", f.input, "replicate CSV written by a simulator");
            sub->add_option("--column", f.column, "count column (Z or N)");
            sub->add_option("--n-min", f.fit_lo);
            sub->add_option("--n-max", f.fit_hi);
            continue;
        }
        sub->add_option("--lambda", f.lambda, "infection (or birth) rate");
        if (kind != "ba-sim")
            sub->add_option("--d", f.d, "d-ary tree degree (any real > 1 for analytics)");
        if (kind == "analytics")
            continue;
        sub->add_option("--replicates", f.replicates);
        sub->add_option("--max-nodes", f.max_nodes);
        sub->add_option("--max-generation", f.max_generation);
        if (kind == "ce-sim")
            sub->add_option("--delay", f.delay, "delay x before the root starts recovering");
        if (kind == "kbrw-sim" || kind == "qwalk")
            sub->add_option("--start", f.start, "start position x >= 0");
        if (kind == "kbrw-sim" || kind == "biggins")
            sub->add_option("--process", f.process, "ce or ba")->check(CLI::IsMember({"ce", "ba"}));
        if (kind == "biggins") {
            sub->add_option("--rho", f.rho);
            sub->add_option("--generations", f.n_max_generations);
            sub->add_option("--prune-level", f.prune_level);
        }
        if (kind == "ce-sim" || kind == "ba-sim" || kind == "kbrw-sim") {
            sub->add_option("--fit-min", f.fit_lo, "tail fit range start");
            sub->add_option("--fit-max", f.fit_hi, "tail fit range end");
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    const std::string kind = app.get_subcommands().front()->get_name();
    using pptree::harness::ValidationError;
    try {
        nlohmann::json manifest = nlohmann::json::object();
        if (manifest_path) {
            manifest = nlohmann::json::parse(read_file(*manifest_path));
            if (manifest.contains("kind") && manifest["kind"] != kind)
                throw ValidationError({"manifest kind '" + manifest["kind"].dump() + "' does not match subcommand " +
                                       kind});
        }
        manifest["kind"] = kind;

        pptree::harness::Overrides o;
        o.seed = seed;
        o.workers = workers;
        if (out)
            o.out = *out;
        o.patch = patch_from(f, kind).dump();

        if (f.validate_only) {
            std::cout << pptree::harness::effective_manifest(manifest.dump(), o) << '\n';
            return 0;
        }
        const auto result = pptree::harness::run(manifest.dump(), o);
        std::cout << result.summary_json << '\n';
        return 0;
    } catch (const ValidationError& e) {
        for (const auto& msg : e.errors())
            std::cerr << "error: " << msg << '\n';
        return kExitValidation;
    } catch (const nlohmann::json::parse_error& e) {
        std::cerr << "error: manifest is not valid JSON: " << e.what() << '\n';
        return kExitValidation;
    } catch (const pptree::stats::TailFitError& e) {
        std::cerr << "refused (" << pptree::stats::to_string(e.kind()) << "): " << e.what() << '\n';
        return kExitRefused;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
