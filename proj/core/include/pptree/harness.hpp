#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

// Manifest-driven experiment runner. A manifest is one JSON document:
//
//   {"kind": "ce-sim", "lambda": 0.15, "offspring": {"kind": "d-ary", "d": 2},
//    "replicates": 100000, "seed": 7, "caps": {"max_generation": 100}}
//
// Precedence, lowest to highest: built-in defaults, manifest fields, the
// override patch (a JSON merge patch), then the explicit seed/workers/out
// overrides.
namespace pptree::harness {

inline constexpr int kSchemaVersion = 1;
inline constexpr std::string_view kToolVersion = "0.1.0";

enum class Kind { Analytics, CeSim, BaSim, KbrwSim, CoupleCheck, QWalk, Biggins, TailFit };

std::string_view to_string(Kind k) noexcept;
std::optional<Kind> parse_kind(std::string_view s) noexcept;
const std::vector<std::string_view>& kind_names();

/// Every offending field, one message each.
class ValidationError : public std::runtime_error
{
public:
    explicit ValidationError(std::vector<std::string> errors);
    const std::vector<std::string>& errors() const noexcept { return errors_; }

private:
    std::vector<std::string> errors_;
};

struct Overrides
{
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> workers;
    std::optional<std::filesystem::path> out;
    /// JSON merge patch applied to the manifest before the fields above.
    std::string patch;
};

/// Empty when the manifest text is valid.
std::vector<std::string> validate(std::string_view manifest_text);

/// FNV-1a of the canonical form of the effective manifest, without the `out`
/// and `workers` fields (neither changes the results).
std::string manifest_hash(std::string_view manifest_text);

struct RunResult
{
    Kind kind = Kind::Analytics;
    std::string manifest_hash;
    /// summary.json content; also what the CLI prints.
    std::string summary_json;
    std::vector<std::filesystem::path> files;
};

/// Validates, runs and writes the bundle into the output directory. Throws
/// ValidationError before any sampling, and stats::TailFitError when a
/// requested tail fit is refused; in both cases nothing is written.
RunResult run(std::string_view manifest_text, const Overrides& overrides = {});

/// The manifest after applying overrides, as canonical JSON text.
std::string effective_manifest(std::string_view manifest_text, const Overrides& overrides);

} // namespace pptree::harness
