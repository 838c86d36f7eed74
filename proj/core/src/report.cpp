#include "stochff/report.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace stochff {

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string ExperimentReport::to_csv() const {
    std::ostringstream out;
    out << "mode,sigma2,kadv,sorted_maxpool,accuracy,n_images,wall_time_ms,seed\n";
    for (const ReportRow& r : rows) {
        out << r.mode << ',' << format_double(r.sigma2) << ',' << format_double(r.k_adv)
            << ',' << (r.sorted_mode ? "on" : "off") << ',' << format_double(r.accuracy)
            << ',' << r.n_images << ',' << r.wall_time_ms << ',' << r.seed << '\n';
    }
    return out.str();
}

void ExperimentReport::write_csv(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    f << to_csv();
    if (!f) throw std::runtime_error("write failed: " + path);
}

}  // namespace stochff
