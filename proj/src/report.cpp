#include "rbsde/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <tuple>

namespace rbsde {

std::string render_csv(std::vector<ReportRow> rows) {
    std::stable_sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
        return std::tie(a.scenario, a.command, a.index, a.p, a.metric) <
               std::tie(b.scenario, b.command, b.index, b.p, b.metric);
    });
    std::string out = "scenario,command,index,p,metric,value\n";
    char buffer[64];
    for (const auto& row : rows) {
        if (!std::isfinite(row.value))
            fail(ErrorKind::NonFiniteValue,
                 "report metric '" + row.metric + "' is not finite");
        out += row.scenario;
        out += ',';
        out += row.command;
        out += ',';
        std::snprintf(buffer, sizeof(buffer), "%ld", row.index);
        out += buffer;
        out += ',';
        std::snprintf(buffer, sizeof(buffer), "%.12g", row.p);
        out += buffer;
        out += ',';
        out += row.metric;
        out += ',';
        std::snprintf(buffer, sizeof(buffer), "%.12g", row.value);
        out += buffer;
        out += '\n';
    }
    return out;
}

} // namespace rbsde
