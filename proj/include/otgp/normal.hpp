// Standard-normal CDF, density and quantile.
//
// Certificate and coverage arithmetic must be reproducible across platforms,
// so Phi is evaluated with Cody's rational Chebyshev approximation of erf/erfc
// (W. J. Cody, Math. Comp. 23, 1969; the SPECFUN coefficients) instead of
// libm erfc, and the quantile uses Acklam's rational initial guess refined by
// bisection against the same Phi.
#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace otgp {

namespace detail {

// Cody's CALERF, restricted to what Phi needs: erf on [-0.46875, 0.46875]
// and erfc elsewhere.
inline double erf_small(double x)
{
    static constexpr double a[5] = {3.16112374387056560e0, 1.13864154151050156e2,
                                    3.77485237685302021e2, 3.20937758913846947e3,
                                    1.85777706184603153e-1};
    static constexpr double b[4] = {2.36012909523441209e1, 2.44024637934444173e2,
                                    1.28261652607737228e3, 2.84423683343917062e3};
    const double z = x * x;
    double num = a[4] * z;
    double den = z;
    for (int i = 0; i < 3; ++i) {
        num = (num + a[i]) * z;
        den = (den + b[i]) * z;
    }
    return x * (num + a[3]) / (den + b[3]);
}

inline double erfc_cody(double x)
{
    static constexpr double c[9] = {5.64188496988670089e-1, 8.88314979438837594e0,
                                    6.61191906371416295e1,  2.98635138197400131e2,
                                    8.81952221241769090e2,  1.71204761263407058e3,
                                    2.05107837782607147e3,  1.23033935479799725e3,
                                    2.15311535474403846e-8};
    static constexpr double d[8] = {1.57449261107098347e1, 1.17693950891312499e2,
                                    5.37181101862009858e2, 1.62138957456669019e3,
                                    3.29079923573345963e3, 4.36261909014324716e3,
                                    3.43936767414372164e3, 1.23033935480374942e3};
    static constexpr double p[6] = {3.05326634961232344e-1, 3.60344899949804439e-1,
                                    1.25781726111229246e-1, 1.60837851487422766e-2,
                                    6.58749161529837803e-4, 1.63153871373020978e-2};
    static constexpr double q[5] = {2.56852019228982242e0, 1.87295284992346047e0,
                                    5.27905102951428412e-1, 6.05183413124413191e-2,
                                    2.33520497626869185e-3};
    static constexpr double inv_sqrt_pi = 0.56418958354775628695;

    const double y = std::abs(x);
    if (y <= 0.46875)
        return 1.0 - erf_small(x);

    double result;
    if (y <= 4.0) {
        double num = c[8] * y;
        double den = y;
        for (int i = 0; i < 7; ++i) {
            num = (num + c[i]) * y;
            den = (den + d[i]) * y;
        }
        result = (num + c[7]) / (den + d[7]);
    } else if (y < 26.6) {
        const double z = 1.0 / (y * y);
        double num = p[5] * z;
        double den = z;
        for (int i = 0; i < 4; ++i) {
            num = (num + p[i]) * z;
            den = (den + q[i]) * z;
        }
        result = z * (num + p[4]) / (den + q[4]);
        result = (inv_sqrt_pi - result) / y;
    } else {
        result = 0.0;
    }
    // exp(-y^2) split to avoid premature underflow/rounding, as in CALERF.
    const double ysq = std::trunc(y * 16.0) / 16.0;
    const double del = (y - ysq) * (y + ysq);
    result *= std::exp(-ysq * ysq) * std::exp(-del);

    return (x < 0.0) ? 2.0 - result : result;
}

} // namespace detail

/// Phi(x), absolute accuracy better than 1e-15.
inline double normal_cdf(double x)
{
    return 0.5 * detail::erfc_cody(-x / std::numbers::sqrt2);
}

inline double normal_pdf(double x)
{
    static constexpr double inv_sqrt_2pi = 0.39894228040143267794;
    return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

/// Upper-tail mass of the standard normal, accurate in relative terms far
/// into the tail (no 1-Phi cancellation).
inline double normal_sf(double x)
{
    return 0.5 * detail::erfc_cody(x / std::numbers::sqrt2);
}

namespace detail {

// Acklam's rational approximation to Phi^{-1}; |relative error| < 1.15e-9.
inline double quantile_acklam(double prob)
{
    static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                    -2.759285104469687e+02, 1.383577518672690e+02,
                                    -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                    -1.556989798598866e+02, 6.680131188771972e+01,
                                    -1.328068155288572e+01};
    static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                    -2.400758277161838e+00, -2.549732539343734e+00,
                                    4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                    2.445134137142996e+00, 3.754408661907416e+00};
    static constexpr double p_low = 0.02425;

    if (prob < p_low) {
        const double q = std::sqrt(-2.0 * std::log(prob));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (prob <= 1.0 - p_low) {
        const double q = prob - 0.5;
        const double r = q * q;
        return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
               (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    }
    const double q = std::sqrt(-2.0 * std::log(1.0 - prob));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
}

} // namespace detail

/// x >= 0 with upper-tail mass normal_sf(x) = s, for s in (0, 0.5].
/// Acklam initial guess, then bisection against normal_sf; the tail form keeps
/// full relative precision when s is tiny (e.g. delta / 2M for large nets).
inline double normal_quantile_upper(double tail)
{
    if (!(tail > 0.0) || tail > 0.5)
        throw std::invalid_argument("normal_quantile_upper: tail mass must be in (0, 0.5]");
    if (tail == 0.5)
        return 0.0;

    double x0 = -detail::quantile_acklam(tail);
    double lo = x0 - 1e-6;
    double hi = x0 + 1e-6;
    // normal_sf is decreasing: f(lo) > tail > f(hi) once the bracket is valid.
    while (normal_sf(lo) < tail)
        lo -= 1e-4;
    while (normal_sf(hi) > tail)
        hi += 1e-4;
    for (int i = 0; i < 80 && hi - lo > 1e-15 * (1.0 + std::abs(lo)); ++i) {
        const double mid = 0.5 * (lo + hi);
        if (normal_sf(mid) > tail)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

/// Phi^{-1}(p) for p in (0, 1).
inline double normal_quantile(double prob)
{
    if (!(prob > 0.0) || !(prob < 1.0))
        throw std::invalid_argument("normal_quantile: probability must be in (0, 1)");
    if (prob == 0.5)
        return 0.0;
    return (prob > 0.5) ? normal_quantile_upper(1.0 - prob)
                        : -normal_quantile_upper(prob);
}

/// z_{1-alpha/2}, the two-sided critical value at nominal level 1-alpha.
inline double two_sided_z(double alpha)
{
    if (!(alpha > 0.0) || !(alpha < 1.0))
        throw std::invalid_argument("two_sided_z: alpha must be in (0, 1)");
    return normal_quantile_upper(0.5 * alpha);
}

} // namespace otgp
