#pragma once

// Test-only reference for four-point rainflow counting. Deliberately naive:
// it rescans the whole reversal list from the start after every extraction
// and shares no code with the library.

#include <utility>
#include <vector>

namespace toolife::oracle {

/// (amplitude, count) pairs sorted ascending.
std::vector<std::pair<double, double>> brute_force_rainflow(std::vector<double> seq);

}  // namespace toolife::oracle
