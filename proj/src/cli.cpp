#include "lwave/cli.hpp"

#include <fcntl.h>
#include <omp.h>
#include <unistd.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "lwave/acceptance.hpp"
#include "lwave/asymptotics.hpp"
#include "lwave/errors.hpp"
#include "lwave/hash.hpp"
#include "lwave/random.hpp"

namespace lwave::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---- parsing helpers ------------------------------------------------------------------------------------------

template <class T>
T parse_number(std::string_view text, const std::string& what) {
    T v{};
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end || text.empty())
        throw ConfigError("cannot parse " + what + " from \"" + std::string(text) + "\"");
    return v;
}

void check_keys(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return it.key() == k; }))
            throw ConfigError(where + ": unknown key \"" + it.key() + "\"");
}

template <class T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

Site site_from(const json& j) {
    if (!j.is_array() || j.size() != 2) throw ConfigError("site must be [xi1, xi2]");
    return {j[0].get<int>(), j[1].get<int>()};
}

cplx cplx_from(const json& j) {
    if (!j.is_array() || j.size() != 2) throw ConfigError("complex value must be [re, im]");
    return {j[0].get<double>(), j[1].get<double>()};
}

json site_json(Site s) { return json::array({s.xi1, s.xi2}); }
json cplx_json(cplx v) { return json::array({v.real(), v.imag()}); }

std::vector<Site> sites_from(const json& j) {
    std::vector<Site> out;
    for (const auto& e : j) out.push_back(site_from(e));
    return out;
}

json sites_json(const std::vector<Site>& v) {
    json a = json::array();
    for (Site s : v) a.push_back(site_json(s));
    return a;
}

const std::set<std::string> kMethods{"direct", "chebyshev", "spectral"};

// ---- files ----------------------------------------------------------------------------------------------------

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_atomic(const fs::path& path, const std::string& content) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw Error("cannot write " + tmp.string());
        out << content;
        if (!out) throw Error("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

void write_json(const fs::path& path, const json& j) { write_atomic(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DependencyError("missing input file: " + path.string());
    return json::parse(in);
}

class DirectoryLock {
public:
    explicit DirectoryLock(fs::path path) : path_(std::move(path)) {
        fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd_ < 0)
            throw Error("output directory is in use: " + path_.string() +
                        " exists (another run owns it, or a crashed run left it behind)");
        const std::string pid = std::to_string(::getpid()) + "\n";
        if (::write(fd_, pid.data(), pid.size()) < 0) { /* the lock holds without the pid */ }
    }
    ~DirectoryLock() {
        ::close(fd_);
        std::error_code ec;
        fs::remove(path_, ec);
    }
    DirectoryLock(const DirectoryLock&) = delete;
    DirectoryLock& operator=(const DirectoryLock&) = delete;

private:
    fs::path path_;
    int fd_ = -1;
};

// A stage failed; carries the stage name for the diagnostic.
class StageFailure : public Error {
public:
    StageFailure(const std::string& stage, const std::string& what) : Error("stage " + stage + " failed: " + what) {}
};

// ---- session: output directory, manifest, resumable stages ----------------------------------------------------

class Session {
public:
    Session(const ExperimentConfig& cfg, fs::path dir, std::ostream& log)
        : dir_(std::move(dir)), log_(log), lock_((fs::create_directories(dir_), dir_ / ".lock")) {
        const fs::path mpath = dir_ / "manifest.json";
        const std::string hash = cfg.hash();
        if (fs::exists(mpath)) {
            manifest_ = RunManifest::from_json(read_json(mpath));
            if (manifest_.config_hash != hash)
                throw ConfigError("output directory " + dir_.string() + " holds results for config " +
                                  manifest_.config_hash + ", not " + hash + "; choose another --out");
        } else {
            manifest_.config_hash = hash;
            manifest_.created = utc_now();
        }
        stage("config", {"config.json"}, [&] { write_json(path("config.json"), cfg.to_json()); });
    }

    fs::path path(const std::string& rel) const { return dir_ / rel; }
    const RunManifest& manifest() const { return manifest_; }

    template <class F>
    void stage(const std::string& name, const std::vector<std::string>& outputs, F&& body) {
        auto it = manifest_.stages.find(name);
        const bool complete = it != manifest_.stages.end() && it->second.status == "done" &&
                              std::all_of(outputs.begin(), outputs.end(),
                                          [&](const std::string& o) { return fs::exists(path(o)); });
        if (complete) {
            log_ << "[" << name << "] up to date\n";
            return;
        }
        StageRecord rec;
        rec.started = utc_now();
        rec.outputs = outputs;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            body();
        } catch (const ConfigError& e) {
            throw ConfigError("stage " + name + ": " + e.what());
        } catch (const DependencyError&) {
            throw;
        } catch (const std::exception& e) {
            rec.status = "failed";
            rec.error = e.what();
            rec.finished = utc_now();
            manifest_.stages[name] = rec;
            save();
            throw StageFailure(name, e.what());
        }
        rec.status = "done";
        rec.finished = utc_now();
        manifest_.stages[name] = rec;
        save();
        char buf[64];
        std::snprintf(buf, sizeof buf, " (%.1f s)", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        log_ << "[" << name << "] done" << buf << "\n";
    }

private:
    void save() {
        manifest_.updated = utc_now();
        write_json(dir_ / "manifest.json", manifest_.to_json());
    }

    fs::path dir_;
    std::ostream& log_;
    DirectoryLock lock_;
    RunManifest manifest_;
};

// ---- commands -------------------------------------------------------------------------------------------------

SpectralParameter parameter_for(cplx k) {
    return k.imag() == 0.0 ? SpectralParameter::boundary(k.real()) : SpectralParameter::interior(k);
}

void cmd_green(Session& s, const ExperimentConfig& cfg) {
    const int m = cfg.resolved_m();
    GreenOptions go;
    go.tol = cfg.green.tol;
    s.stage("green.tables", {"green_tables.json"}, [&] {
        GreensTableCache cache(s.path("green_cache"));
        json tables = json::array();
        for (cplx k : cfg.green.k) tables.push_back(cache.get(parameter_for(k), m, go).to_json());
        write_json(s.path("green_tables.json"), {{"m", m}, {"tables", tables}});
    });
    s.stage("green.defect", {"green_defect.json"}, [&] {
        json rows = json::array();
        double worst = 0.0;
        for (cplx k : cfg.green.k) {
            const double d = green_defect_residual(parameter_for(k), cfg.green.defect_radius, go);
            worst = std::max(worst, d);
            rows.push_back({{"k", cplx_json(k)}, {"max_defect", d}});
        }
        const bool pass = worst <= 1e-9;
        write_json(s.path("green_defect.json"), {{"radius", cfg.green.defect_radius},
                                                 {"threshold", 1e-9},
                                                 {"max_defect", worst},
                                                 {"pass", pass},
                                                 {"values", rows}});
        if (!pass) throw Error("defect identity violated: max defect " + detail::format_number(worst));
    });
    s.stage("green.log_expansion", {"log_expansion.json"}, [&] {
        LadderOptions lo;
        lo.green = go;
        json rows = json::array();
        for (int b : cfg.green.branches)
            for (Site xi : cfg.green.branch_sites) {
                const LogExpansion e = log_expansion(BranchPoint(b), xi, lo);
                rows.push_back({{"s", b},
                                {"xi", site_json(xi)},
                                {"u1", cplx_json(e.u1)},
                                {"u2", cplx_json(e.u2)},
                                {"residual", e.residual},
                                {"parity_zero", std::abs(e.u1) < 1e-6}});
            }
        write_json(s.path("log_expansion.json"), {{"expansions", rows}});
    });
    s.stage("green.u2_growth", {"u2_growth.json"}, [&] {
        LadderOptions lo;
        lo.green = go;
        const U2GrowthReport r = u2_growth_check(cfg.green.u2_radii, lo);
        json u2 = json::array();
        for (cplx v : r.u2) u2.push_back(cplx_json(v));
        write_json(s.path("u2_growth.json"), {{"radii", r.radii},
                                              {"u2", u2},
                                              {"residuals", r.residuals},
                                              {"slope", r.slope},
                                              {"intercept", cplx_json(r.intercept)},
                                              {"curvature", r.curvature},
                                              {"max_residual", r.max_residual},
                                              {"u2_origin", cplx_json(r.u2_origin)}});
    });
}

ScatteringProblem problem_for(const ExperimentConfig& cfg) {
    return ScatteringProblem(cfg.potential.materialize(), cfg.resolved_m());
}

DiscreteSpectrum spectrum_for(const ScatteringProblem& p, bool projections) {
    SpectrumOptions so;
    so.compute_projections = projections;
    return find_discrete_spectrum(p, so);
}

LambdaGrid grid_for(const ExperimentConfig& cfg) {
    LambdaGrid::Spec spec;
    spec.smallest_gap = cfg.spectrum.smallest_gap;
    return LambdaGrid::graded(spec);
}

void cmd_spectrum(Session& s, const ExperimentConfig& cfg) {
    const ScatteringProblem p = problem_for(cfg);
    s.stage("spectrum.discrete", {"spectrum.json"}, [&] {
        write_json(s.path("spectrum.json"), spectrum_for(p, cfg.spectrum.projections).to_json());
    });
    s.stage("spectrum.density", {"density.csv", "sum_rules.json"}, [&] {
        const DiscreteSpectrum spec = spectrum_for(p, true);
        const SpectralDensity dens = spectral_density(p, grid_for(cfg));
        std::ostringstream csv;
        dens.write_csv(csv);
        write_atomic(s.path("density.csv"), csv.str());
        MatrixC s0 = dens.integrate([](double) { return 1.0; });
        MatrixC s1 = dens.integrate([](double l) { return l; });
        for (const auto* list : {&spec.negatives, &spec.aboves})
            for (const auto& e : *list) {
                s0 += e.projection;
                s1 += e.lambda * e.projection;
            }
        json rows = json::array();
        double w0 = 0.0, w1 = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double expected1 = 4.0 + p.q_at(i);
            w0 = std::max(w0, std::abs(s0(i, i) - 1.0));
            w1 = std::max(w1, std::abs(s1(i, i) - expected1));
            rows.push_back({{"xi", site_json(p.square().site(i))},
                            {"zeroth", cplx_json(s0(i, i))},
                            {"first", cplx_json(s1(i, i))},
                            {"first_expected", expected1}});
        }
        write_json(s.path("sum_rules.json"),
                   {{"sites", rows}, {"max_zeroth_error", w0}, {"max_first_error", w1}, {"nodes", dens.grid.lambda.size()}});
    });
    s.stage("spectrum.branches", {"branches.json"}, [&] {
        const DiscreteSpectrum spec = spectrum_for(p, false);
        write_json(s.path("branches.json"), classify_branch_points(p, &spec).to_json());
    });
    s.stage("spectrum.interior", {"interior.json"}, [&] {
        const InteriorReport r = verify_no_interior_eigenvalues(p, cfg.spectrum.interior_nodes);
        write_json(s.path("interior.json"), {{"min_singular_value", r.min_singular_value},
                                             {"argmin_lambda", r.argmin_lambda},
                                             {"nodes", r.nodes},
                                             {"threshold", 1e-6},
                                             {"pass", r.pass}});
    });
}

EvolutionConfig evolution_config(const ExperimentConfig& cfg) {
    const auto& e = cfg.evolution;
    EvolutionConfig c;
    c.q = cfg.potential.materialize();
    c.f = cfg.initial_data.materialize();
    c.horizon = e.horizon;
    c.dt = e.dt;
    c.dt_out = e.dt_out;
    c.richardson_levels = e.richardson_levels;
    c.window_radius = e.window_radius;
    c.probes = e.probes.empty() ? SupportSquare(cfg.resolved_m()).sites() : e.probes;
    c.chebyshev_degree_cap = e.chebyshev_degree_cap;
    c.record_energy = e.record_energy;
    return c;
}

json trajectory_meta(const Trajectory& tr) {
    json j{{"method", tr.method},
           {"dt", tr.dt},
           {"richardson_levels", tr.richardson_levels},
           {"error_estimate", tr.error_estimate},
           {"deflated_lambdas", tr.deflated_lambdas},
           {"samples", tr.times.size()},
           {"probes", tr.probes.size()}};
    if (!tr.energy.empty()) {
        double drift = 0.0;
        for (double e : tr.energy) drift = std::max(drift, std::abs(e - tr.energy.front()));
        j["energy_initial"] = tr.energy.front();
        j["energy_drift"] = tr.energy.front() != 0.0 ? drift / std::abs(tr.energy.front()) : drift;
    }
    return j;
}

Trajectory load_trajectory(Session& s, const std::string& method) {
    const fs::path csv = s.path("trajectory_" + method + ".csv");
    const fs::path meta = s.path("trajectory_" + method + ".json");
    for (const fs::path& p : {csv, meta})
        if (!fs::exists(p)) throw DependencyError("missing trajectory file " + p.string() + "; run evolve first");
    std::ifstream in(csv);
    Trajectory tr = Trajectory::read_csv(in);
    const json j = read_json(meta);
    tr.method = j.at("method").get<std::string>();
    tr.dt = j.at("dt").get<double>();
    tr.richardson_levels = j.at("richardson_levels").get<int>();
    tr.error_estimate = j.at("error_estimate").get<double>();
    tr.deflated_lambdas = j.at("deflated_lambdas").get<std::vector<double>>();
    return tr;
}

void cmd_evolve(Session& s, const ExperimentConfig& cfg) {
    EvolutionConfig c = evolution_config(cfg);
    const ScatteringProblem p = problem_for(cfg);
    if (cfg.evolution.deflate) {
        for (const Eigenvalue& e : spectrum_for(p, false).negatives)
            for (int i = 0; i < e.multiplicity; ++i) c.deflate_lambdas.push_back(e.lambda);
    }
    for (const std::string& method : cfg.evolution.methods) {
        const std::string base = "trajectory_" + method;
        s.stage("evolve." + method, {base + ".csv", base + ".json"}, [&] {
            Trajectory tr;
            if (method == "direct") {
                tr = evolve_direct(c);
            } else if (method == "chebyshev") {
                tr = evolve_chebyshev(c);
            } else {
                const auto square = p.square();
                for (Site x : c.probes)
                    if (!square.contains(x)) throw ConfigError("spectral evolution needs probes inside S");
                tr = evolve_spectral(p, spectrum_for(p, true), spectral_density(p, grid_for(cfg)), c.f, c.probes,
                                     c.resolved_times());
            }
            std::ostringstream csv;
            tr.write_csv(csv);
            write_atomic(s.path(base + ".csv"), csv.str());
            write_json(s.path(base + ".json"), trajectory_meta(tr));
        });
    }
    s.stage("evolve.summary", {"evolve.json"}, [&] {
        json j{{"methods", cfg.evolution.methods}};
        std::vector<Trajectory> trs;
        for (const std::string& m : cfg.evolution.methods) {
            trs.push_back(load_trajectory(s, m));
            j["trajectories"][m] = read_json(s.path("trajectory_" + m + ".json"));
        }
        j["max_relative_difference"] = json::object();
        for (std::size_t a = 0; a < trs.size(); ++a)
            for (std::size_t b = a + 1; b < trs.size(); ++b) {
                const auto d = relative_difference(trs[a], trs[b]);
                const double worst = d.empty() ? 0.0 : *std::max_element(d.begin(), d.end());
                j["max_relative_difference"][cfg.evolution.methods[a] + "_vs_" + cfg.evolution.methods[b]] = worst;
            }
        write_json(s.path("evolve.json"), j);
    });
}

void cmd_asymptotics(Session& s, const ExperimentConfig& cfg) {
    const auto& a = cfg.asymptotics;
    if (std::find(cfg.evolution.methods.begin(), cfg.evolution.methods.end(), a.method) == cfg.evolution.methods.end())
        throw ConfigError("asymptotics.method \"" + a.method + "\" is not among evolution.methods");
    const auto it = s.manifest().stages.find("evolve." + a.method);
    if (it == s.manifest().stages.end() || it->second.status != "done")
        throw DependencyError("manifest in " + s.path("").string() + " has no completed evolve." + a.method +
                              " stage (needs " + s.path("trajectory_" + a.method + ".csv").string() + ")");
    const Trajectory tr = load_trajectory(s, a.method);
    s.stage("asymptotics.fit", {"fit.json", "consistency.json", "fit_plot.csv"}, [&] {
        const ScatteringProblem p = problem_for(cfg);
        const LatticeField f = cfg.initial_data.materialize();
        const DiscreteSpectrum spectrum = spectrum_for(p, true);
        DecayOptions opt;
        opt.window_start = a.window_start;
        opt.window_end = a.window_end;
        opt.demodulation_width = a.demodulation_width;
        opt.frequency_range = a.frequency_range;
        const Trajectory stripped = strip_discrete(tr, spectrum, f);
        AsymptoticFit fit = fit_decay_channels(stripped, a.probe, opt);

        // Discrete modes are fitted on the raw trajectory over the same window; deflated modes are absent.
        DiscreteSpectrum expected = spectrum;
        expected.negatives.clear();
        for (const Eigenvalue& e : spectrum.negatives) {
            const bool deflated = std::any_of(tr.deflated_lambdas.begin(), tr.deflated_lambdas.end(),
                                              [&](double l) { return std::abs(l - e.lambda) <= 1e-9 * (1 + std::abs(l)); });
            if (!deflated) expected.negatives.push_back(e);
        }
        if (!expected.negatives.empty())
            fit.exponential.push_back(fit_growth_rate(tr, a.probe, fit.window_start, fit.window_end));
        for (const Eigenvalue& e : expected.aboves)
            fit.undamped.push_back(
                fit_undamped_mode(tr, a.probe, e.rate - 0.05, e.rate + 0.05, fit.window_start, fit.window_end));

        const BranchClassification cls = classify_branch_points(p, &spectrum);
        const ConsistencyReport rep = consistency_report(fit, cls, expected);
        write_json(s.path("fit.json"), {{"fit", fit.to_json()}, {"classification", cls.to_json()}});
        write_json(s.path("consistency.json"), rep.to_json());
        std::ostringstream csv;
        write_fit_csv(csv, stripped, fit, a.demodulation_width);
        write_atomic(s.path("fit_plot.csv"), csv.str());
    });
}

int cmd_verify(const std::string& profile, const std::string& out_dir, std::ostream& out) {
    acceptance::Options opt;
    opt.profile = profile == "full" ? acceptance::Profile::Full : acceptance::Profile::Quick;
    opt.on_result = [&](const acceptance::CriterionResult& r) { out << acceptance::format_line(r) << std::endl; };
    std::optional<DirectoryLock> lock;
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        lock.emplace(fs::path(out_dir) / ".lock");
    }
    const auto results = acceptance::run(opt);
    const bool ok = acceptance::overall_pass(results);
    if (!out_dir.empty()) write_json(fs::path(out_dir) / "verify.json", acceptance::to_json(results, opt.profile));
    out << (ok ? "verify: PASS" : "verify: FAIL") << std::endl;
    return ok ? kSuccess : kComputationFailure;
}

} // namespace

// ---- configuration --------------------------------------------------------------------------------------------

LatticeField preset_field(const std::string& name) {
    if (name == "zero") return LatticeField(0);
    const auto colon = name.find(':');
    if (colon == std::string::npos) throw ConfigError("unknown preset \"" + name + "\"");
    const std::string kind = name.substr(0, colon);
    const std::string_view args = std::string_view(name).substr(colon + 1);
    if (kind == "single-site") return LatticeField::delta({0, 0}, parse_number<double>(args, "single-site value"), 0);
    if (kind == "random") {
        std::vector<std::string_view> parts;
        std::size_t start = 0;
        for (std::size_t i = 0; i <= args.size(); ++i)
            if (i == args.size() || args[i] == ',') {
                parts.push_back(args.substr(start, i - start));
                start = i + 1;
            }
        if (parts.size() != 3) throw ConfigError("preset random needs seed,amplitude,m: \"" + name + "\"");
        const auto seed = parse_number<std::uint64_t>(parts[0], "random seed");
        const double amplitude = parse_number<double>(parts[1], "random amplitude");
        const int m = parse_number<int>(parts[2], "random m");
        if (amplitude < 0.0 || m < 0 || m > 64) throw ConfigError("preset random: need amplitude >= 0 and 0 <= m <= 64");
        return random_field(seed, amplitude, m);
    }
    throw ConfigError("unknown preset \"" + name + "\"");
}

FieldSpec FieldSpec::from_json(const json& j) {
    FieldSpec f;
    if (j.is_string()) {
        f.preset = j.get<std::string>();
        preset_field(f.preset);
        return f;
    }
    check_keys(j, {"m", "values"}, "inline field");
    f.values = j.get<LatticeField>();
    return f;
}

json FieldSpec::to_json() const {
    if (values) return json(*values);
    return preset;
}

LatticeField FieldSpec::materialize() const { return values ? *values : preset_field(preset); }

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    ExperimentConfig c;
    try {
        check_keys(j, {"potential", "initial_data", "m", "output_dir", "green", "spectrum", "evolution", "asymptotics"},
                   "config");
        if (j.contains("potential")) c.potential = FieldSpec::from_json(j.at("potential"));
        if (j.contains("initial_data")) c.initial_data = FieldSpec::from_json(j.at("initial_data"));
        read(j, "m", c.m);
        read(j, "output_dir", c.output_dir);
        if (j.contains("green")) {
            const json& g = j.at("green");
            check_keys(g, {"tol", "k", "defect_radius", "branches", "branch_sites", "u2_radii"}, "green");
            read(g, "tol", c.green.tol);
            if (g.contains("k")) {
                c.green.k.clear();
                for (const auto& e : g.at("k")) c.green.k.push_back(cplx_from(e));
            }
            read(g, "defect_radius", c.green.defect_radius);
            read(g, "branches", c.green.branches);
            if (g.contains("branch_sites")) c.green.branch_sites = sites_from(g.at("branch_sites"));
            read(g, "u2_radii", c.green.u2_radii);
        }
        if (j.contains("spectrum")) {
            const json& s = j.at("spectrum");
            check_keys(s, {"projections", "interior_nodes", "smallest_gap"}, "spectrum");
            read(s, "projections", c.spectrum.projections);
            read(s, "interior_nodes", c.spectrum.interior_nodes);
            read(s, "smallest_gap", c.spectrum.smallest_gap);
        }
        if (j.contains("evolution")) {
            const json& e = j.at("evolution");
            check_keys(e, {"methods", "horizon", "dt", "dt_out", "richardson_levels", "window_radius", "probes",
                           "deflate", "record_energy", "chebyshev_degree_cap"},
                       "evolution");
            read(e, "methods", c.evolution.methods);
            read(e, "horizon", c.evolution.horizon);
            read(e, "dt", c.evolution.dt);
            read(e, "dt_out", c.evolution.dt_out);
            read(e, "richardson_levels", c.evolution.richardson_levels);
            read(e, "window_radius", c.evolution.window_radius);
            if (e.contains("probes")) c.evolution.probes = sites_from(e.at("probes"));
            read(e, "deflate", c.evolution.deflate);
            read(e, "record_energy", c.evolution.record_energy);
            read(e, "chebyshev_degree_cap", c.evolution.chebyshev_degree_cap);
        }
        if (j.contains("asymptotics")) {
            const json& a = j.at("asymptotics");
            check_keys(a, {"method", "probe", "window_start", "window_end", "demodulation_width", "frequency_range"},
                       "asymptotics");
            read(a, "method", c.asymptotics.method);
            if (a.contains("probe")) c.asymptotics.probe = site_from(a.at("probe"));
            read(a, "window_start", c.asymptotics.window_start);
            read(a, "window_end", c.asymptotics.window_end);
            read(a, "demodulation_width", c.asymptotics.demodulation_width);
            read(a, "frequency_range", c.asymptotics.frequency_range);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (c.evolution.methods.empty()) throw ConfigError("evolution.methods must not be empty");
    for (const std::string& m : c.evolution.methods)
        if (!kMethods.count(m)) throw ConfigError("unknown evolution method \"" + m + "\"");
    if (!kMethods.count(c.asymptotics.method)) throw ConfigError("unknown asymptotics method \"" + c.asymptotics.method + "\"");
    if (!(c.evolution.horizon >= 0.0) || !(c.evolution.dt > 0.0) || !(c.evolution.dt_out > 0.0))
        throw ConfigError("evolution: need horizon >= 0, dt > 0, dt_out > 0");
    if (c.evolution.richardson_levels < 1 || c.evolution.richardson_levels > 3)
        throw ConfigError("evolution.richardson_levels must be 1, 2 or 3");
    if (!c.potential.materialize().is_real()) throw ConfigError("potential must be real-valued");
    for (int b : c.green.branches)
        if (b < -2 || b > 2) throw ConfigError("green.branches entries must lie in -2..2");
    c.resolved_m();
    return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return from_json(j);
}

json ExperimentConfig::to_json() const {
    return {{"potential", potential.to_json()},
            {"initial_data", initial_data.to_json()},
            {"m", m},
            {"output_dir", output_dir},
            {"green",
             {{"tol", green.tol},
              {"k",
               [&] {
                   json a = json::array();
                   for (cplx k : green.k) a.push_back(cplx_json(k));
                   return a;
               }()},
              {"defect_radius", green.defect_radius},
              {"branches", green.branches},
              {"branch_sites", sites_json(green.branch_sites)},
              {"u2_radii", green.u2_radii}}},
            {"spectrum",
             {{"projections", spectrum.projections},
              {"interior_nodes", spectrum.interior_nodes},
              {"smallest_gap", spectrum.smallest_gap}}},
            {"evolution",
             {{"methods", evolution.methods},
              {"horizon", evolution.horizon},
              {"dt", evolution.dt},
              {"dt_out", evolution.dt_out},
              {"richardson_levels", evolution.richardson_levels},
              {"window_radius", evolution.window_radius},
              {"probes", sites_json(evolution.probes)},
              {"deflate", evolution.deflate},
              {"record_energy", evolution.record_energy},
              {"chebyshev_degree_cap", evolution.chebyshev_degree_cap}}},
            {"asymptotics",
             {{"method", asymptotics.method},
              {"probe", site_json(asymptotics.probe)},
              {"window_start", asymptotics.window_start},
              {"window_end", asymptotics.window_end},
              {"demodulation_width", asymptotics.demodulation_width},
              {"frequency_range", asymptotics.frequency_range}}}};
}

int ExperimentConfig::resolved_m() const {
    const int need = std::max(potential.materialize().support_half_width(), initial_data.materialize().support_half_width());
    if (m < 0) return need;
    if (m < need) throw ConfigError("m = " + std::to_string(m) + " is smaller than the field supports (" + std::to_string(need) + ")");
    return m;
}

std::string ExperimentConfig::hash() const {
    // output_dir is where results go, not what they are; it stays out of the hash.
    json j = to_json();
    j.erase("output_dir");
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(j.dump() + "\n" + kToolVersion)));
    return buf;
}

// ---- manifest -------------------------------------------------------------------------------------------------

std::vector<std::string> RunManifest::outputs() const {
    std::set<std::string> all;
    for (const auto& [name, rec] : stages) all.insert(rec.outputs.begin(), rec.outputs.end());
    return {all.begin(), all.end()};
}

json RunManifest::to_json() const {
    json st = json::object();
    for (const auto& [name, r] : stages) {
        json e{{"status", r.status}, {"outputs", r.outputs}, {"started", r.started}, {"finished", r.finished}};
        if (!r.error.empty()) e["error"] = r.error;
        st[name] = e;
    }
    return {{"config_hash", config_hash}, {"tool_version", tool_version}, {"created", created},
            {"updated", updated},         {"stages", st},                {"outputs", outputs()}};
}

RunManifest RunManifest::from_json(const json& j) {
    RunManifest m;
    m.config_hash = j.at("config_hash").get<std::string>();
    m.tool_version = j.at("tool_version").get<std::string>();
    m.created = j.value("created", "");
    m.updated = j.value("updated", "");
    for (auto it = j.at("stages").begin(); it != j.at("stages").end(); ++it) {
        StageRecord r;
        r.status = it->at("status").get<std::string>();
        r.outputs = it->at("outputs").get<std::vector<std::string>>();
        r.started = it->value("started", "");
        r.finished = it->value("finished", "");
        r.error = it->value("error", "");
        m.stages[it.key()] = r;
    }
    return m;
}

// ---- entry point ----------------------------------------------------------------------------------------------

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Wave propagation and scattering on Z^2 with a compactly supported potential", "lattice_lab"};
    app.require_subcommand(1);
    std::string config_path, out_dir, profile = "quick";
    int threads = 0;
    const std::pair<const char*, const char*> subcommands[] = {
        {"green", "Green tables, defect check, branch log-expansions and u2 growth"},
        {"spectrum", "discrete spectrum, spectral density and sum rules, branch classification, interior check"},
        {"evolve", "solve the Cauchy problem by the configured methods"},
        {"asymptotics", "fit large-time behaviour of a prior evolve run"},
        {"verify", "run the acceptance suite"}};
    for (const auto& [name, desc] : subcommands) {
        CLI::App* sc = app.add_subcommand(name, desc);
        sc->add_option("--config", config_path, "experiment config (JSON)");
        sc->add_option("--out", out_dir, "output directory (overrides output_dir in the config)");
        sc->add_option("--profile", profile, "verify profile")->check(CLI::IsMember({"quick", "full"}));
        sc->add_option("--threads", threads, "OpenMP threads, 0 = runtime default")->check(CLI::NonNegativeNumber);
    }
    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kSuccess : kConfigError;
    }
    if (threads > 0) omp_set_num_threads(threads);
    const std::string command = app.get_subcommands().front()->get_name();

    try {
        if (command == "verify") return cmd_verify(profile, out_dir, out);
        if (config_path.empty()) throw ConfigError(command + " needs --config");
        ExperimentConfig cfg = ExperimentConfig::load(config_path);
        if (!out_dir.empty()) cfg.output_dir = out_dir;
        if (cfg.output_dir.empty()) throw ConfigError("no output directory: set output_dir or pass --out");
        Session session(cfg, cfg.output_dir, out);
        if (command == "green") cmd_green(session, cfg);
        else if (command == "spectrum") cmd_spectrum(session, cfg);
        else if (command == "evolve") cmd_evolve(session, cfg);
        else cmd_asymptotics(session, cfg);
        return kSuccess;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const DependencyError& e) {
        err << "dependency error: " << e.what() << "\n";
        return kComputationFailure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kComputationFailure;
    }
}

} // namespace lwave::cli
