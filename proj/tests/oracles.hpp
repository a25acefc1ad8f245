#pragma once

// Reference computations that share no code with the library.

#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <vector>

namespace oracle {

// Composite Simpson rule on [a, b] with n (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n = 4000) {
    if (n % 2) ++n;
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

inline double gaussian_density(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

// Phi(z) = 1/2 + integral_0^z density.
inline double phi(double z) { return 0.5 + simpson(gaussian_density, 0.0, z); }

// Normalized Gaussian weights over k = 1..K evaluated in long double.
inline std::vector<double> ldl_brute(int age, int k_max, double sigma) {
    std::vector<long double> w(static_cast<std::size_t>(k_max));
    long double total = 0;
    for (int k = 1; k <= k_max; ++k) {
        const long double d = (k - age) / static_cast<long double>(sigma);
        w[static_cast<std::size_t>(k - 1)] =
            std::exp(-0.5L * d * d) / (std::sqrt(2.0L * std::numbers::pi_v<long double>) * sigma);
        total += w[static_cast<std::size_t>(k - 1)];
    }
    std::vector<double> out;
    for (auto v : w) out.push_back(static_cast<double>(v / total));
    return out;
}

// Central differences of f at x, one coordinate at a time. f may return long
// double so the difference of two nearby losses keeps its low bits; the
// divisor is the step actually taken after rounding x +/- h.
template <typename Real>
std::vector<double> central_diff(const std::function<Real(std::span<const double>)>& f, std::vector<double> x,
                                 double h) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        const double hi = keep + h;
        const double lo = keep - h;
        x[i] = hi;
        const Real up = f(x);
        x[i] = lo;
        const Real down = f(x);
        x[i] = keep;
        g[i] = static_cast<double>((up - down) / (static_cast<Real>(hi) - static_cast<Real>(lo)));
    }
    return g;
}

// Two-class cross-entropy written out from the definition.
template <typename Real = double>
Real binary_ce(Real logit0, Real logit1, Real target0) {
    const Real m = std::max(logit0, logit1);
    const Real z = std::exp(logit0 - m) + std::exp(logit1 - m);
    const Real p0 = std::exp(logit0 - m) / z;
    const Real p1 = std::exp(logit1 - m) / z;
    Real ce = 0;
    if (target0 > 0) ce -= target0 * std::log(p0);
    if (target0 < 1) ce -= (1 - target0) * std::log(p1);
    return ce;
}

// Relative agreement; when both values are below floor_abs they only need
// to agree to floor_abs absolutely.
inline bool grad_close(double a, double b, double rel_tol, double floor_abs) {
    const double scale = std::max(std::abs(a), std::abs(b));
    if (scale < floor_abs) return std::abs(a - b) <= floor_abs;
    return std::abs(a - b) <= rel_tol * scale;
}

}  // namespace oracle
