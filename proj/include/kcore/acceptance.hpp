#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace kcore::acceptance {

struct Options {
    bool quick = true;        // reduced-size variant where the criterion allows one
    std::uint64_t seed = 1;
    int jobs = 2;
    int only = 0;             // run a single criterion (0 = all)
};

struct CriterionResult {
    int number = 0;
    std::string name;
    bool pass = false;
    std::string details;
    double seconds = 0.0;
};

// Runs every criterion, printing one PASS/FAIL line per criterion to `out`.
std::vector<CriterionResult> run_all(const Options& opt, std::ostream& out);

bool all_passed(const std::vector<CriterionResult>& results);

}  // namespace kcore::acceptance
