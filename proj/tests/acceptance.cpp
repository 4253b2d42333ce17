// Verification battery runner: one line per criterion, nonzero exit on any
// failure.
#include <cstdio>

#include "rbsde/battery.hpp"

int main() {
    const rbsde::BatteryOutput out = rbsde::run_acceptance_battery();
    for (const auto& c : out.criteria)
        std::printf("[%s] criterion %2d, %s: %s\n", c.pass ? "PASS" : "FAIL", c.number,
                    c.name.c_str(), c.detail.c_str());
    std::printf("%s\n", out.pass ? "all criteria passed" : "FAILURES present");
    return out.pass ? 0 : 1;
}
