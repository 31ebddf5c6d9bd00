#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gio::verify {

struct CheckResult {
    std::string name;
    bool pass = false;
    double worst_margin = 0.0;  // smallest slack observed; negative = violation
    std::string detail;
};

enum class InjectedBug { None, NegateEta };

struct VerifyOptions {
    std::vector<std::string> only;  // empty = every check
    std::uint64_t seed = 20250901;
    InjectedBug inject = InjectedBug::None;  // test fixture for sensitivity runs
    bool quick = false;                      // smaller instance counts
};

std::vector<std::string> check_names();

/// Runs the property suite: contraction, fixed point, softmax optimality,
/// the improvement identity, both monotonicity theorems, the special-case
/// equivalences, the KL lemmas, the variational bounds and gradient checks,
/// and the exact-agent bridge.
std::vector<CheckResult> run_checks(const VerifyOptions& options);

std::string report_to_json(const std::vector<CheckResult>& results);
bool all_passed(const std::vector<CheckResult>& results);

}  // namespace gio::verify
