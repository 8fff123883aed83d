#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace memstab {

using Vec = std::vector<double>;

inline double dot(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

inline double distance(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw std::invalid_argument("distance: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

inline Vec scaled(const Vec& a, double c) {
    Vec r(a);
    for (double& x : r) x *= c;
    return r;
}

inline Vec sum(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw std::invalid_argument("sum: dimension mismatch");
    Vec r(a);
    for (std::size_t i = 0; i < b.size(); ++i) r[i] += b[i];
    return r;
}

inline Vec diff(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw std::invalid_argument("diff: dimension mismatch");
    Vec r(a);
    for (std::size_t i = 0; i < b.size(); ++i) r[i] -= b[i];
    return r;
}

// r += c * a
inline void axpy(double c, const Vec& a, Vec& r) {
    if (a.size() != r.size()) throw std::invalid_argument("axpy: dimension mismatch");
    for (std::size_t i = 0; i < a.size(); ++i) r[i] += c * a[i];
}

inline bool all_finite(const Vec& a) {
    for (double x : a)
        if (!std::isfinite(x)) return false;
    return true;
}

inline Vec unit(const Vec& a) {
    const double n = norm(a);
    if (n == 0.0) throw std::invalid_argument("unit: zero vector");
    return scaled(a, 1.0 / n);
}

}  // namespace memstab
