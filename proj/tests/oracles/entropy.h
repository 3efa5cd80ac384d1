// Brute-force Shannon entropy: counts each distinct character by rescanning
// the string and sums in natural log before converting to bits.

#pragma once

#include <cmath>
#include <string>
#include <string_view>

namespace oracle {

inline double entropy_bits(std::string_view s) {
    if (s.empty()) return 0.0;
    std::string distinct;
    for (char c : s) {
        if (distinct.find(c) == std::string::npos) distinct += c;
    }
    double nats = 0.0;
    for (char c : distinct) {
        std::size_t count = 0;
        for (char d : s) count += (c == d);
        double p = double(count) / double(s.size());
        nats -= p * std::log(p);
    }
    return nats / std::log(2.0);
}

} // namespace oracle
