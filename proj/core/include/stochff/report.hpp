#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace stochff {

// One accuracy measurement; serialized to CSV with a fixed column order so
// reports are byte-comparable across runs.
struct ReportRow {
    std::string mode;       // det | stochastic | ensemble
    double sigma2 = 0.0;
    double k_adv = 0.0;
    bool sorted_mode = true;
    double accuracy = 0.0;
    std::size_t n_images = 0;
    std::uint64_t wall_time_ms = 0;
    std::uint64_t seed = 0;
};

struct ExperimentReport {
    std::vector<ReportRow> rows;

    std::string to_csv() const;
    void write_csv(const std::string& path) const;
};

// Shortest round-trippable decimal formatting.
std::string format_double(double v);

}  // namespace stochff
