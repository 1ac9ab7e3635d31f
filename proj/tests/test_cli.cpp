#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "lwave/cli.hpp"
#include "lwave/evolution.hpp"
#include "lwave/errors.hpp"
#include "lwave/random.hpp"

using namespace lwave;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run lab(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("lwave_cli_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
    const fs::path p = dir / "config.in.json";
    std::ofstream(p) << text;
    return p;
}

json load(const fs::path& p) {
    std::ifstream in(p);
    return json::parse(in);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("LCG frozen values") {
    Lcg64 rng(0);
    CHECK(rng.next() == 1442695040888963407ULL);
    CHECK(rng.next() == 1876011003808476466ULL);
    CHECK(rng.next() == 11166244414315200793ULL);
    Lcg64 r42(42);
    CHECK(r42.symmetric(10.0) == doctest::Approx(1.364606532878152).epsilon(1e-15));
    const LatticeField f = random_field(42, 10.0, 1);
    CHECK(f({-1, -1}).real() == doctest::Approx(1.364606532878152).epsilon(1e-15));
}

TEST_CASE("presets") {
    CHECK(cli::preset_field("zero").max_abs() == 0.0);
    CHECK(cli::preset_field("single-site:-5")({0, 0}) == cplx(-5.0));
    const LatticeField r = cli::preset_field("random:7,2.5,2");
    CHECK(r.radius() == 2);
    CHECK(r.values() == random_field(7, 2.5, 2).values());
    for (const char* bad : {"single-site:", "single-site:x", "random:1,2", "random:1,-1,2", "nope", "random:1,2,3x"})
        CHECK_THROWS_AS(cli::preset_field(bad), ConfigError);
}

TEST_CASE("config round-trips losslessly and rejects unknown keys") {
    const json in = json::parse(R"({
        "potential": {"m": 1, "values": [[0.1,0],[0,0],[-2.5,0],[0,0],[3.14159,0],[0,0],[0,0],[1e-7,0],[0,0]]},
        "initial_data": "random:3,1,1",
        "evolution": {"methods": ["direct", "chebyshev"], "horizon": 12.5, "probes": [[0,0],[1,0]]},
        "asymptotics": {"probe": [1, 0], "window_start": 3.3},
        "green": {"k": [[0.1, 0.2], [3, 0]]}
    })");
    const cli::ExperimentConfig c = cli::ExperimentConfig::from_json(in);
    const json canon = c.to_json();
    const cli::ExperimentConfig back = cli::ExperimentConfig::from_json(json::parse(canon.dump()));
    CHECK(back.to_json() == canon);
    CHECK(back.hash() == c.hash());
    CHECK(back.potential.materialize().values() == c.potential.materialize().values());

    CHECK_THROWS_AS(cli::ExperimentConfig::from_json(json::parse(R"({"potental": "zero"})")), ConfigError);
    CHECK_THROWS_AS(cli::ExperimentConfig::from_json(json::parse(R"({"evolution": {"horizon": "x"}})")), ConfigError);
    CHECK_THROWS_AS(cli::ExperimentConfig::from_json(json::parse(R"({"evolution": {"methods": ["euler"]}})")), ConfigError);
    CHECK_THROWS_AS(cli::ExperimentConfig::from_json(json::parse(R"({"potential": "random:1,1,2", "m": 1})")), ConfigError);
}

TEST_CASE("config hash is stable and ignores the output directory") {
    cli::ExperimentConfig a;
    CHECK(a.hash() == "26fea270ba33e368");
    cli::ExperimentConfig b = a;
    b.output_dir = "elsewhere";
    CHECK(b.hash() == a.hash());
    b.potential = cli::FieldSpec::from_json("single-site:1");
    CHECK(b.hash() != a.hash());
}

TEST_CASE("exit codes") {
    const fs::path dir = scratch("exit");
    CHECK(lab({"frobnicate"}).code == cli::kConfigError);
    CHECK(lab({"green"}).code == cli::kConfigError);
    const fs::path bad = write_config(dir, "{\"potential\": ");
    const Run r = lab({"green", "--config", bad.string(), "--out", (dir / "bad").string()});
    CHECK(r.code == cli::kConfigError);
    CHECK(r.err.find("not valid JSON") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "bad"));
    CHECK(lab({"spectrum", "--config", (dir / "missing.json").string(), "--out", (dir / "x").string()}).code ==
          cli::kConfigError);
    CHECK(lab({"--help"}).code == cli::kSuccess);
}

TEST_CASE("spectrum of single-site:-5 has exactly one negative eigenvalue") {
    const fs::path dir = scratch("spectrum");
    const fs::path cfg = write_config(dir, R"({"potential": "single-site:-5", "spectrum": {"interior_nodes": 40}})");
    REQUIRE(lab({"spectrum", "--config", cfg.string(), "--out", (dir / "run").string()}).code == 0);
    const json s = load(dir / "run" / "spectrum.json");
    CHECK(s["negatives"].size() == 1);
    CHECK(s["aboves"].empty());
    CHECK(load(dir / "run" / "interior.json")["pass"] == true);
    CHECK(load(dir / "run" / "sum_rules.json")["max_zeroth_error"].get<double>() < 1e-4);
    const json m = load(dir / "run" / "manifest.json");
    for (const auto& o : m["outputs"]) CHECK(fs::exists(dir / "run" / o.get<std::string>()));
}

TEST_CASE("green run embeds the defect check and flags parity zeros") {
    const fs::path dir = scratch("green");
    const fs::path cfg = write_config(dir, R"({"green": {"branches": [1], "branch_sites": [[1,0],[1,1]], "u2_radii": [2,3,4,5]}})");
    REQUIRE(lab({"green", "--config", cfg.string(), "--out", (dir / "run").string()}).code == 0);
    CHECK(load(dir / "run" / "green_defect.json")["pass"] == true);
    const json e = load(dir / "run" / "log_expansion.json")["expansions"];
    REQUIRE(e.size() == 2);
    CHECK(e[0]["parity_zero"] == true);
    CHECK(e[1]["parity_zero"] == false);
}

TEST_CASE("evolve with zero horizon writes zeros; outputs are reproducible") {
    const fs::path dir = scratch("evolve");
    const fs::path cfg = write_config(dir, R"({"potential": "single-site:2", "evolution": {"horizon": 0, "methods": ["direct", "chebyshev"]}})");
    REQUIRE(lab({"evolve", "--config", cfg.string(), "--out", (dir / "a").string()}).code == 0);
    std::ifstream in(dir / "a" / "trajectory_direct.csv");
    const Trajectory tr = Trajectory::read_csv(in);
    REQUIRE(tr.times.size() == 1);
    CHECK(tr.values.front() == cplx{});

    const fs::path cfg2 = write_config(dir, R"({"potential": "single-site:2", "evolution": {"horizon": 2, "probes": [[0,0]]}})");
    REQUIRE(lab({"evolve", "--config", cfg2.string(), "--out", (dir / "b").string(), "--threads", "1"}).code == 0);
    REQUIRE(lab({"evolve", "--config", cfg2.string(), "--out", (dir / "c").string(), "--threads", "2"}).code == 0);
    CHECK(slurp(dir / "b" / "trajectory_direct.csv") == slurp(dir / "c" / "trajectory_direct.csv"));
    CHECK(slurp(dir / "b" / "evolve.json") == slurp(dir / "c" / "evolve.json"));
}

TEST_CASE("asymptotics without its trajectory is a dependency error naming the path") {
    const fs::path dir = scratch("dependency");
    const fs::path cfg = write_config(dir, R"({"potential": "single-site:2", "evolution": {"horizon": 1}})");
    REQUIRE(lab({"evolve", "--config", cfg.string(), "--out", (dir / "run").string()}).code == 0);
    fs::remove(dir / "run" / "trajectory_direct.csv");
    const Run r = lab({"asymptotics", "--config", cfg.string(), "--out", (dir / "run").string()});
    CHECK(r.code == cli::kComputationFailure);
    CHECK(r.err.find("dependency error") != std::string::npos);
    CHECK(r.err.find("trajectory_direct.csv") != std::string::npos);
}

TEST_CASE("re-running resumes only stages whose outputs are missing") {
    const fs::path dir = scratch("resume");
    const fs::path cfg = write_config(dir, R"({"potential": "single-site:3", "spectrum": {"interior_nodes": 20}})");
    const std::string out = (dir / "run").string();
    REQUIRE(lab({"spectrum", "--config", cfg.string(), "--out", out}).code == 0);
    const std::string before = slurp(dir / "run" / "branches.json");
    fs::remove(dir / "run" / "branches.json");
    const Run r = lab({"spectrum", "--config", cfg.string(), "--out", out});
    CHECK(r.code == 0);
    CHECK(r.out.find("[spectrum.discrete] up to date") != std::string::npos);
    CHECK(r.out.find("[spectrum.density] up to date") != std::string::npos);
    CHECK(r.out.find("[spectrum.branches] done") != std::string::npos);
    CHECK(slurp(dir / "run" / "branches.json") == before);

    const fs::path other = write_config(dir, R"({"potential": "single-site:4"})");
    CHECK(lab({"spectrum", "--config", other.string(), "--out", out}).code == cli::kConfigError);
}

TEST_CASE("a held lock keeps a second process out") {
    const fs::path dir = scratch("lock");
    const fs::path cfg = write_config(dir, R"({"potential": "single-site:3", "spectrum": {"interior_nodes": 20}})");
    fs::create_directories(dir / "run");
    std::ofstream(dir / "run" / ".lock") << "1\n";
    const Run r = lab({"spectrum", "--config", cfg.string(), "--out", (dir / "run").string()});
    CHECK(r.code == cli::kComputationFailure);
    CHECK(r.err.find("in use") != std::string::npos);
}

}
