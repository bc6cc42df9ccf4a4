#pragma once

#include <functional>
#include <string>
#include <vector>

namespace slowfast {

// One verification criterion of the release gate. detail carries the
// measured numbers against their thresholds, seconds the wall clock spent.
struct CheckResult {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
};

using CheckObserver = std::function<void(const CheckResult&)>;

// Runs the full verification suite in order. Every check is evaluated even
// after a failure; the observer, when given, sees each result as it lands.
// Checks with a stated time budget fail when they exceed it.
std::vector<CheckResult> run_acceptance_checks(const CheckObserver& observer = {});

bool all_passed(const std::vector<CheckResult>& results);

// "PASS  3  dissipativity margin ... (0.41 s)" style single line.
std::string format_check_line(const CheckResult& r);

} // namespace slowfast
