#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace kslab::acceptance {

struct Options {
    std::uint64_t seed = 0;
    int spectral_ppd = 64;
    int pde_ppd = 32;
    int q_ppd = 128;
    std::vector<int> criteria = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
};

struct Result {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail;  // measured values
    double seconds = 0.0;
};

constexpr int criterion_count = 10;
const char* criterion_name(int id);

// runs the requested items in order; each finished line is also written to
// `progress` when given
std::vector<Result> run(const Options& options, std::ostream* progress = nullptr);

// "[PASS] 6 stable-law: ..." style line
std::string format_line(const Result& r);

}  // namespace kslab::acceptance
