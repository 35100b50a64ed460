#include "rainflow_oracle.hpp"

#include <algorithm>
#include <cmath>

namespace toolife::oracle {

namespace {

bool drop_one_redundant_point(std::vector<double>& p) {
    for (std::size_t i = 1; i < p.size(); ++i) {
        if (p[i] == p[i - 1]) {
            p.erase(p.begin() + static_cast<long>(i));
            return true;
        }
    }
    for (std::size_t i = 1; i + 1 < p.size(); ++i) {
        if ((p[i] - p[i - 1]) * (p[i + 1] - p[i]) > 0.0) {
            p.erase(p.begin() + static_cast<long>(i));
            return true;
        }
    }
    return false;
}

}  // namespace

std::vector<std::pair<double, double>> brute_force_rainflow(std::vector<double> p) {
    while (drop_one_redundant_point(p)) {
    }

    std::vector<std::pair<double, double>> out;
    bool found = true;
    while (found) {
        found = false;
        for (std::size_t i = 0; i + 3 < p.size(); ++i) {
            const double inner = std::fabs(p[i + 1] - p[i + 2]);
            if (inner <= std::fabs(p[i] - p[i + 1]) && inner <= std::fabs(p[i + 2] - p[i + 3])) {
                out.emplace_back(inner / 2.0, 1.0);
                p.erase(p.begin() + static_cast<long>(i) + 1, p.begin() + static_cast<long>(i) + 3);
                found = true;
                break;
            }
        }
    }
    for (std::size_t i = 0; i + 1 < p.size(); ++i) {
        out.emplace_back(std::fabs(p[i + 1] - p[i]) / 2.0, 0.5);
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace toolife::oracle
