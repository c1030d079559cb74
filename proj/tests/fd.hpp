#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace cpq::testing {

using Field = std::function<double(const std::vector<double>&)>;

/// Central difference along direction i.
inline double fd1(const Field& f, std::vector<double> x, int i, double h) {
    const double x0 = x[static_cast<std::size_t>(i)];
    x[static_cast<std::size_t>(i)] = x0 + h;
    const double a = f(x);
    x[static_cast<std::size_t>(i)] = x0 - h;
    return (a - f(x)) / (2 * h);
}

/// Nested central differences for d_i d_j f.
inline double fd2(const Field& f, const std::vector<double>& x, int i, int j, double h) {
    return fd1([&](const std::vector<double>& y) { return fd1(f, y, j, h); }, x, i, h);
}

inline double fd3(const Field& f, const std::vector<double>& x, int i, int j, int k, double h) {
    return fd1([&](const std::vector<double>& y) { return fd2(f, y, j, k, h); }, x, i, h);
}

inline double rel_err(double ad, double fd) { return std::abs(ad - fd) / std::max(1.0, std::abs(fd)); }

}  // namespace cpq::testing
