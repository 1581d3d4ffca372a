// Predictive scoring: RMSE, empirical interval coverage and CRPS.
#pragma once

#include "otgp/gp.hpp"
#include "otgp/normal.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace otgp {

struct MetricsReport {
    double rmse = 0.0;
    double coverage = 0.0;
    double mean_crps = 0.0;
    std::size_t n_test = 0;
    double nominal_level = 0.9;
};

inline double rmse(std::span<const double> predictions, std::span<const double> truths)
{
    if (predictions.size() != truths.size() || predictions.empty())
        throw std::invalid_argument("rmse: need equal-length nonempty sequences");
    double acc = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double e = predictions[i] - truths[i];
        acc += e * e;
    }
    return std::sqrt(acc / static_cast<double>(predictions.size()));
}

/// Fraction of truths inside the nominal (1-alpha) intervals; boundary hits
/// count as covered. Intervals use the noise-inclusive standard deviation by
/// default; `include_noise = false` scores the latent bands z * sigma_N
/// instead.
inline double coverage(std::span<const PredictiveSummary> summaries,
                       std::span<const double> truths, double alpha,
                       bool include_noise = true)
{
    if (summaries.size() != truths.size() || summaries.empty())
        throw std::invalid_argument("coverage: need equal-length nonempty sequences");
    const double z = two_sided_z(alpha);
    std::size_t inside = 0;
    for (std::size_t i = 0; i < summaries.size(); ++i) {
        const double sd = include_noise ? summaries[i].predictive_sd() : summaries[i].sd();
        if (std::abs(truths[i] - summaries[i].mean) <= z * sd)
            ++inside;
    }
    return static_cast<double>(inside) / static_cast<double>(summaries.size());
}

/// Gaussian CRPS closed form:
/// sd * [ z (2 Phi(z) - 1) + 2 phi(z) - 1/sqrt(pi) ], z = (y - mean)/sd;
/// a point forecast (sd = 0) scores |y - mean|.
inline double crps_gaussian(double mean, double sd, double y)
{
    if (sd < 0.0)
        throw std::invalid_argument("crps_gaussian: sd must be nonnegative");
    if (sd == 0.0)
        return std::abs(y - mean);
    const double z = (y - mean) / sd;
    return sd * (z * (2.0 * normal_cdf(z) - 1.0) + 2.0 * normal_pdf(z) -
                 std::numbers::inv_sqrtpi);
}

namespace detail {

struct SimpsonState {
    const std::function<double(double)>* f;
    double tolerance;
    int max_depth;
};

inline double adaptive_simpson(const SimpsonState& st, double a, double fa, double b, double fb,
                               double m, double fm, double whole, int depth)
{
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = (*st.f)(lm);
    const double frm = (*st.f)(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (std::abs(delta) <= 15.0 * st.tolerance)
        return left + right + delta / 15.0;
    if (depth >= st.max_depth)
        throw std::runtime_error("crps_numeric: adaptive quadrature did not converge");
    return adaptive_simpson(st, a, fa, m, fm, lm, flm, left, depth + 1) +
           adaptive_simpson(st, m, fm, b, fb, rm, frm, right, depth + 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double tolerance, int max_depth = 48)
{
    if (b <= a)
        return 0.0;
    const SimpsonState st{&f, tolerance, max_depth};
    const double m = 0.5 * (a + b);
    const double fa = f(a);
    const double fb = f(b);
    const double fm = f(m);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return adaptive_simpson(st, a, fa, b, fb, m, fm, whole, 0);
}

} // namespace detail

/// CRPS of an arbitrary predictive CDF by adaptive Simpson quadrature of
/// (F(t) - 1{y <= t})^2, split at the indicator discontinuity. Kept as the
/// permanent numeric oracle for the closed form.
inline double crps_numeric(const std::function<double(double)>& cdf, double y, double lo,
                           double hi, double tolerance)
{
    if (!(tolerance > 0.0))
        throw std::invalid_argument("crps_numeric: tolerance must be positive");
    if (!(hi > lo))
        throw std::invalid_argument("crps_numeric: empty integration interval");
    auto below = [&cdf](double t) {
        const double f = cdf(t);
        return f * f;
    };
    auto above = [&cdf](double t) {
        const double f = cdf(t) - 1.0;
        return f * f;
    };
    const double split = std::min(std::max(y, lo), hi);
    return detail::integrate(below, lo, split, 0.5 * tolerance) +
           detail::integrate(above, split, hi, 0.5 * tolerance);
}

inline MetricsReport score(std::span<const PredictiveSummary> summaries,
                           std::span<const double> truths, double alpha,
                           bool include_noise = true)
{
    MetricsReport report;
    report.n_test = truths.size();
    report.nominal_level = 1.0 - alpha;
    std::vector<double> means(summaries.size());
    for (std::size_t i = 0; i < summaries.size(); ++i)
        means[i] = summaries[i].mean;
    report.rmse = rmse(means, truths);
    report.coverage = coverage(summaries, truths, alpha, include_noise);
    double crps_acc = 0.0;
    for (std::size_t i = 0; i < summaries.size(); ++i) {
        const double sd = include_noise ? summaries[i].predictive_sd() : summaries[i].sd();
        crps_acc += crps_gaussian(summaries[i].mean, sd, truths[i]);
    }
    report.mean_crps = crps_acc / static_cast<double>(truths.size());
    return report;
}

} // namespace otgp
