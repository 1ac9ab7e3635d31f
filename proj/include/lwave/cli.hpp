#pragma once

// Experiment configuration, run manifests and the subcommands of the lattice_lab executable.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lwave/lattice.hpp"

namespace lwave::cli {

inline constexpr const char* kToolVersion = "lattice_lab 1.0.0";

enum ExitCode { kSuccess = 0, kComputationFailure = 1, kConfigError = 2 };

/// Potential or initial data: a named preset or inline values.
/// Presets: "zero", "single-site:V", "random:seed,amplitude,m" (see random.hpp for the generator).
struct FieldSpec {
    std::string preset;                 // empty when inline
    std::optional<LatticeField> values;  // set when inline

    static FieldSpec from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    LatticeField materialize() const;
};

/// Throws ConfigError for unknown names or malformed arguments.
LatticeField preset_field(const std::string& name);

struct GreenSettings {
    double tol = 1e-12;
    /// [re, im] pairs; im = 0 selects the boundary value from above.
    std::vector<cplx> k{{0.0, 1.0}, {0.5, 0.7}, {1.9, 1e-3}, {2.9, 0.0}};
    int defect_radius = 10;
    std::vector<int> branches{-2, -1, 0, 1, 2};
    std::vector<Site> branch_sites{{0, 0}, {1, 0}, {1, 1}};
    std::vector<int> u2_radii{2, 4, 6, 8, 12, 16};
};

struct SpectrumSettings {
    bool projections = true;
    int interior_nodes = 400;
    double smallest_gap = 1e-5;
};

struct EvolutionSettings {
    std::vector<std::string> methods{"direct"};  // direct, chebyshev, spectral
    double horizon = 10.0;
    double dt = 0.01;
    double dt_out = 0.05;
    int richardson_levels = 1;
    int window_radius = -1;
    std::vector<Site> probes;  // empty: the square S
    bool deflate = false;      // project out modes below the band during stepping
    bool record_energy = true;
    int chebyshev_degree_cap = 20000;
};

struct AsymptoticSettings {
    std::string method = "direct";  // which trajectory to fit
    Site probe{0, 0};
    double window_start = -1.0;
    double window_end = -1.0;
    double demodulation_width = 40.0;
    double frequency_range = 0.05;
};

struct ExperimentConfig {
    FieldSpec potential{"zero", std::nullopt};
    FieldSpec initial_data{"single-site:1", std::nullopt};
    /// Half-width of S; -1 selects the smallest square holding both fields.
    int m = -1;
    std::string output_dir;
    GreenSettings green;
    SpectrumSettings spectrum;
    EvolutionSettings evolution;
    AsymptoticSettings asymptotics;

    /// Strict: unknown keys, wrong types and bad presets throw ConfigError.
    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig load(const std::filesystem::path& path);
    /// Canonical form with every default filled in.
    nlohmann::json to_json() const;
    int resolved_m() const;
    /// FNV-1a 64 of the canonical JSON text and the tool version, as 16 hex digits.
    std::string hash() const;
};

struct StageRecord {
    std::string status;  // done | failed
    std::vector<std::string> outputs;
    std::string started, finished, error;
};

struct RunManifest {
    std::string config_hash;
    std::string tool_version = kToolVersion;
    std::string created, updated;
    std::map<std::string, StageRecord> stages;

    /// Every output of every stage, sorted.
    std::vector<std::string> outputs() const;
    nlohmann::json to_json() const;
    static RunManifest from_json(const nlohmann::json& j);
};

/// Runs the executable with argv[1..]; writes progress to out and diagnostics to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace lwave::cli
