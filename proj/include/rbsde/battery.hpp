#pragma once

#include <string>
#include <vector>

#include "rbsde/report.hpp"

namespace rbsde {

struct CriterionResult {
    int number = 0;
    std::string name;
    bool pass = false;
    std::string detail;
};

struct BatteryOutput {
    std::vector<CriterionResult> criteria;
    std::vector<ReportRow> rows;
    bool pass = false;
};

// The full verification battery at desk scale (N = 10, d = 1, p in
// {1.5, 2, 3} unless a criterion pins something else).  Deterministic:
// two runs produce byte-identical CSV, which the battery itself checks.
BatteryOutput run_acceptance_battery();

} // namespace rbsde
