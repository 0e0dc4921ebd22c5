#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <utility>

#include "core.hpp"

// Special functions needed by the tuning rules: standard normal, F and
// chi-square distributions. Everything is evaluated from the regularized
// incomplete beta / gamma functions; quantiles are found by safeguarded
// Newton steps inside a bisection bracket.

namespace gsrl::dist {

namespace detail {

inline void check_probability(double p, const char* who)
{
    if (!(p > 0.0 && p < 1.0)) {
        throw InputError(std::string(who) + ": probability must lie in (0, 1), got " + std::to_string(p));
    }
}

inline void check_dof(double d, const char* who)
{
    if (!(d >= 1.0)) throw InputError(std::string(who) + ": degrees of freedom must be >= 1");
}

/// Continued fraction of the incomplete beta function (modified Lentz).
inline double beta_cf(double a, double b, double x)
{
    constexpr int max_iter = 10000;
    constexpr double eps = 1e-16;
    constexpr double tiny = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < eps) break;
    }
    return h;
}

inline double log_beta(double a, double b)
{
    return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

/// Lower regularized gamma by its series, valid for x < a + 1.
inline double gamma_series(double a, double x)
{
    double sum = 1.0 / a;
    double del = sum;
    double ap = a;
    for (int n = 0; n < 100000; ++n) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::abs(del) < std::abs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

/// Upper regularized gamma by continued fraction, valid for x >= a + 1.
inline double gamma_cf(double a, double x)
{
    constexpr double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 100000; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-16) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

/**
 * Solves cdf(x) = p on [lo, hi] where cdf is nondecreasing. Newton steps
 * (using pdf) are taken when they stay inside the current bracket,
 * otherwise the bracket is bisected.
 */
inline double invert_monotone(const std::function<double(double)>& cdf, const std::function<double(double)>& pdf,
                              double p, double lo, double hi, double x0, double xtol)
{
    double x = std::clamp(x0, lo, hi);
    for (int it = 0; it < 400; ++it) {
        const double f = cdf(x) - p;
        if (f == 0.0) return x;
        if (f < 0.0) lo = x;
        else hi = x;
        const double dens = pdf(x);
        double next = dens > 0.0 ? x - f / dens : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - x) <= xtol * std::max(1.0, std::abs(x)) || hi - lo <= xtol * std::max(1.0, std::abs(x))) {
            return next;
        }
        x = next;
    }
    return x;
}

} // namespace detail

inline double normal_pdf(double x)
{
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Upper tail 1 - Phi(x), accurate for large x.
inline double normal_sf(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

inline double normal_quantile(double p)
{
    detail::check_probability(p, "normal_quantile");
    if (p == 0.5) return 0.0;
    // Solve in the smaller tail so the target probability is not rounded away.
    const bool upper = p > 0.5;
    const double tail = upper ? 1.0 - p : p;
    // Starting point from the logistic-type approximation of the tail.
    const double t = std::sqrt(-2.0 * std::log(tail));
    const double x0 = t - (2.515517 + 0.802853 * t + 0.010328 * t * t) /
                              (1.0 + 1.432788 * t + 0.189269 * t * t + 0.001308 * t * t * t);
    // -sf is increasing on [0, inf) with derivative pdf.
    const double x = detail::invert_monotone([](double v) { return -normal_sf(v); }, normal_pdf, -tail, 0.0, 40.0, x0,
                                             1e-15);
    return upper ? x : -x;
}

/// Regularized incomplete beta I_x(a, b).
inline double incomplete_beta(double x, double a, double b)
{
    if (!(a > 0.0 && b > 0.0)) throw InputError("incomplete_beta: parameters must be positive");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double front = std::exp(a * std::log(x) + b * std::log1p(-x) - detail::log_beta(a, b));
    if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_cf(a, b, x) / a;
    return 1.0 - front * detail::beta_cf(b, a, 1.0 - x) / b;
}

inline double beta_pdf(double x, double a, double b)
{
    if (x <= 0.0 || x >= 1.0) return 0.0;
    return std::exp((a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) - detail::log_beta(a, b));
}

inline double f_cdf(double x, double d1, double d2)
{
    detail::check_dof(d1, "f_cdf");
    detail::check_dof(d2, "f_cdf");
    if (x <= 0.0) return 0.0;
    return incomplete_beta(d1 * x / (d1 * x + d2), 0.5 * d1, 0.5 * d2);
}

inline double f_quantile(double d1, double d2, double p)
{
    detail::check_dof(d1, "f_quantile");
    detail::check_dof(d2, "f_quantile");
    detail::check_probability(p, "f_quantile");
    const double a = 0.5 * d1;
    const double b = 0.5 * d2;
    // Solve on the beta scale z = d1 x / (d1 x + d2), which lives in (0, 1).
    // The upper tail is solved through the symmetry I_z(a,b) = 1 - I_{1-z}(b,a)
    // to keep relative accuracy when p is close to 1.
    if (p > 0.5) {
        const double w = detail::invert_monotone([&](double v) { return incomplete_beta(v, b, a); },
                                                 [&](double v) { return beta_pdf(v, b, a); }, 1.0 - p, 0.0, 1.0,
                                                 b / (a + b), 1e-16);
        if (w <= 0.0) return std::numeric_limits<double>::infinity();
        return d2 * (1.0 - w) / (d1 * w);
    }
    const double z = detail::invert_monotone([&](double v) { return incomplete_beta(v, a, b); },
                                             [&](double v) { return beta_pdf(v, a, b); }, p, 0.0, 1.0, a / (a + b),
                                             1e-16);
    if (z >= 1.0) return std::numeric_limits<double>::infinity();
    return d2 * z / (d1 * (1.0 - z));
}

/// Regularized lower incomplete gamma P(a, x).
inline double incomplete_gamma(double a, double x)
{
    if (!(a > 0.0)) throw InputError("incomplete_gamma: shape must be positive");
    if (x <= 0.0) return 0.0;
    if (x < a + 1.0) return detail::gamma_series(a, x);
    return 1.0 - detail::gamma_cf(a, x);
}

inline double chisq_cdf(double x, double d)
{
    detail::check_dof(d, "chisq_cdf");
    return incomplete_gamma(0.5 * d, 0.5 * x);
}

inline double chisq_pdf(double x, double d)
{
    if (x <= 0.0) return 0.0;
    const double k = 0.5 * d;
    return std::exp((k - 1.0) * std::log(x) - 0.5 * x - k * std::log(2.0) - std::lgamma(k));
}

inline double chisq_quantile(double d, double p)
{
    detail::check_dof(d, "chisq_quantile");
    detail::check_probability(p, "chisq_quantile");
    double hi = std::max(1.0, d);
    while (chisq_cdf(hi, d) < p) hi *= 2.0;
    return detail::invert_monotone([&](double v) { return chisq_cdf(v, d); }, [&](double v) { return chisq_pdf(v, d); },
                                   p, 0.0, hi, d, 1e-15);
}

/// Laurent-Massart deviation bounds for a chi-square variable W with d degrees of freedom.
struct ChiSquareTailBounds
{
    double upper; ///< bound on P(W - d >= d t)
    double lower; ///< bound on P(W <= d - d t)
};

inline ChiSquareTailBounds chisq_tail_bounds(double d, double t)
{
    detail::check_dof(d, "chisq_tail_bounds");
    if (!(t >= 0.0)) throw InputError("chisq_tail_bounds: t must be nonnegative");
    const double s = std::sqrt(1.0 + 2.0 * t) - 1.0;
    return {std::exp(-(d / 4.0) * s * s), std::exp(-(d / 4.0) * t * t)};
}

enum class Family
{
    normal,
    f,
    chi_square,
};

struct QuantileRequest
{
    Family family = Family::normal;
    double d1 = 1.0;
    double d2 = 1.0;
    double probability = 0.5;
};

inline double quantile(const QuantileRequest& req)
{
    switch (req.family) {
    case Family::normal: return normal_quantile(req.probability);
    case Family::f: return f_quantile(req.d1, req.d2, req.probability);
    case Family::chi_square: return chisq_quantile(req.d1, req.probability);
    }
    throw InputError("quantile: unknown family");
}

} // namespace gsrl::dist
