#pragma once

// End-to-end acceptance suite: one result per criterion, shared by the acceptance binary and `verify`.

#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lwave/lattice.hpp"

namespace lwave::acceptance {

enum class Profile { Quick, Full };

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    /// Set when the criterion fails for a documented reason that is not a defect (see README).
    bool known_failure = false;
    std::string summary;
    double seconds = 0.0;
    nlohmann::json details;
};

struct Options {
    Profile profile = Profile::Full;
    /// Criteria to run; empty runs all twelve.
    std::vector<int> only;
    /// Weight of G in R^0 used by the correspondence criterion; anything but 1/(2 pi) is a deliberate bug.
    double kernel_scale = 1.0 / (2.0 * kPi);
    /// Called after each criterion finishes.
    std::function<void(const CriterionResult&)> on_result;
};

std::vector<CriterionResult> run(const Options& opt);

/// "PASS  [n] name: summary" or "FAIL  [n] ...".
std::string format_line(const CriterionResult& r);

/// True when every criterion passed or failed only as a documented known failure.
bool overall_pass(const std::vector<CriterionResult>& results);

nlohmann::json to_json(const std::vector<CriterionResult>& results, Profile profile);

/// Independent reference for the free Green's function: periodic trapezoid rule on an n x n torus grid.
cplx tensor_oracle(cplx k, Site xi, int n);

} // namespace lwave::acceptance
