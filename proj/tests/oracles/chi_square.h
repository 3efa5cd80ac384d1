// Pearson statistic from expected counts, and the df = 1 upper tail obtained
// by integrating the density with composite Simpson's rule after the
// substitution x = t^2, which removes the singularity at zero.

#pragma once

#include <cmath>

namespace oracle {

inline double pearson_2x2(double a, double b, double c, double d) {
    const double n = a + b + c + d;
    const double obs[2][2] = {{a, b}, {c, d}};
    const double rows[2] = {a + b, c + d};
    const double cols[2] = {a + c, b + d};
    double x = 0.0;
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            double e = rows[i] * cols[j] / n;
            x += (obs[i][j] - e) * (obs[i][j] - e) / e;
        }
    }
    return x;
}

// P(X > x) = 1 - integral_0^sqrt(x) 2 * exp(-t^2 / 2) / sqrt(2 pi) dt
inline double chi2_df1_upper_tail(double x) {
    const double upper = std::sqrt(x);
    const int n = 20000;
    const double h = upper / n;
    const double pi = std::acos(-1.0);
    auto f = [&](double t) { return 2.0 * std::exp(-t * t / 2.0) / std::sqrt(2.0 * pi); };
    double sum = f(0.0) + f(upper);
    for (int i = 1; i < n; ++i) sum += f(i * h) * (i % 2 ? 4.0 : 2.0);
    return 1.0 - sum * h / 3.0;
}

} // namespace oracle
