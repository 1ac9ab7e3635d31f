// Acceptance suite runner: one PASS/FAIL line per criterion.
// Exit status is 0 when every criterion passes or fails only as a documented known failure.

#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "lwave/acceptance.hpp"

int main(int argc, char** argv) {
    CLI::App app{"lattice wave acceptance suite"};
    std::string profile = "full";
    std::vector<int> only;
    double kernel_scale = 1.0 / (2.0 * lwave::kPi);
    std::string json_out;
    app.add_option("--profile", profile, "quick or full")->check(CLI::IsMember({"quick", "full"}));
    app.add_option("--only", only, "criterion identifiers to run")->check(CLI::Range(1, 12));
    app.add_option("--kernel-scale", kernel_scale, "weight of G in R^0 (mutation testing)");
    app.add_option("--json", json_out, "write the machine-readable report here");
    CLI11_PARSE(app, argc, argv);

    lwave::acceptance::Options opt;
    opt.profile = profile == "quick" ? lwave::acceptance::Profile::Quick : lwave::acceptance::Profile::Full;
    opt.only = only;
    opt.kernel_scale = kernel_scale;
    opt.on_result = [](const lwave::acceptance::CriterionResult& r) {
        std::cout << lwave::acceptance::format_line(r) << std::endl;
    };
    const auto results = lwave::acceptance::run(opt);

    int passed = 0, known = 0;
    for (const auto& r : results) {
        passed += r.pass;
        known += !r.pass && r.known_failure;
    }
    const bool ok = lwave::acceptance::overall_pass(results);
    std::printf("%d/%zu criteria passed", passed, results.size());
    if (known) std::printf(", %d known failure(s)", known);
    std::printf(": %s\n", ok ? "OK" : "FAILED");
    if (!json_out.empty()) std::ofstream(json_out) << lwave::acceptance::to_json(results, opt.profile).dump(2) << '\n';
    return ok ? 0 : 1;
}
