#pragma once

#include <string>
#include <vector>

#include "rbsde/errors.hpp"

namespace rbsde {

struct ReportRow {
    std::string scenario;
    std::string command;
    long index = 0;
    double p = 0.0;
    std::string metric;
    double value = 0.0;
};

// Canonical CSV: fixed header, rows sorted by (scenario, command, index, p,
// metric), values printed with %.12g.  Non-finite values are rejected.
std::string render_csv(std::vector<ReportRow> rows);

} // namespace rbsde
