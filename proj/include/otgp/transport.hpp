// Wasserstein distances between empirical and Gaussian-summary measures:
// exact 1D quantile form, Gaussian closed form, small-cloud assignment OT,
// sliced averages and Gromov-Wasserstein closed-form bounds.
#pragma once

#include "otgp/measures.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace otgp {

/// Closed-form lower (LGW2) and upper (GGW2) bounds on the Gromov-Wasserstein
/// distance between two Gaussians.
struct GWBounds {
    double lower = 0.0;
    double upper = 0.0;
};

namespace detail {

inline double pow_cost(double dist, double p)
{
    if (p == 1.0)
        return dist;
    if (p == 2.0)
        return dist * dist;
    return std::pow(dist, p);
}

inline double pow_root(double value, double p)
{
    if (value <= 0.0)
        return 0.0;
    if (p == 1.0)
        return value;
    if (p == 2.0)
        return std::sqrt(value);
    return std::pow(value, 1.0 / p);
}

// Symmetric PSD square root; negative eigenvalues from roundoff are clamped
// to zero before taking the root.
inline Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& a)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
    if (eig.info() != Eigen::Success)
        throw std::runtime_error("psd_sqrt: eigendecomposition failed");
    const Eigen::VectorXd roots = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * roots.asDiagonal() * eig.eigenvectors().transpose();
}

inline void require_psd(const GaussianSummary& g, const char* who)
{
    if ((g.covariance - g.covariance.transpose()).cwiseAbs().maxCoeff() > 1e-10)
        throw std::invalid_argument(std::string(who) + ": covariance not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g.covariance, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -1e-10)
        throw std::invalid_argument(std::string(who) + ": covariance not positive semidefinite");
}

// Minimal-cost assignment on a square cost matrix via shortest augmenting
// paths (Jonker-Volgenant style), O(n^3). Returns the total cost;
// row_to_col[i] receives the matched column of row i.
inline double solve_assignment(const Eigen::MatrixXd& cost, std::vector<int>& row_to_col)
{
    const int n = static_cast<int>(cost.rows());
    std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<double> v(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<int> match(static_cast<std::size_t>(n) + 1, 0); // column -> row (1-based)
    std::vector<int> way(static_cast<std::size_t>(n) + 1, 0);

    for (int i = 1; i <= n; ++i) {
        match[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<std::size_t>(n) + 1,
                                 std::numeric_limits<double>::infinity());
        std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
        do {
            used[static_cast<std::size_t>(j0)] = 1;
            const int i0 = match[static_cast<std::size_t>(j0)];
            int j1 = 0;
            double delta = std::numeric_limits<double>::infinity();
            for (int j = 1; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)])
                    continue;
                const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] -
                                   v[static_cast<std::size_t>(j)];
                if (cur < minv[static_cast<std::size_t>(j)]) {
                    minv[static_cast<std::size_t>(j)] = cur;
                    way[static_cast<std::size_t>(j)] = j0;
                }
                if (minv[static_cast<std::size_t>(j)] < delta) {
                    delta = minv[static_cast<std::size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) {
                    u[static_cast<std::size_t>(match[static_cast<std::size_t>(j)])] += delta;
                    v[static_cast<std::size_t>(j)] -= delta;
                } else {
                    minv[static_cast<std::size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (match[static_cast<std::size_t>(j0)] != 0);
        do {
            const int j1 = way[static_cast<std::size_t>(j0)];
            match[static_cast<std::size_t>(j0)] = match[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }

    row_to_col.assign(static_cast<std::size_t>(n), -1);
    double total = 0.0;
    for (int j = 1; j <= n; ++j) {
        const int i = match[static_cast<std::size_t>(j)];
        if (i > 0) {
            row_to_col[static_cast<std::size_t>(i - 1)] = j - 1;
            total += cost(i - 1, j - 1);
        }
    }
    return total;
}

} // namespace detail

/// p-Wasserstein distance between 1D measures, computed exactly from the
/// quantile representation: both inverse CDFs are step functions, so the
/// integral over [0,1] is a finite sum over the merged breakpoint partition.
inline double wp_1d(const Marginal1D& mu, const Marginal1D& nu, double p)
{
    if (!(p >= 1.0))
        throw std::invalid_argument("wp_1d: p must be >= 1");
    std::size_t i = 0;
    std::size_t j = 0;
    double prev = 0.0;
    double acc = 0.0;
    while (i < mu.size() && j < nu.size()) {
        const double qi = mu.cum_weights[i];
        const double qj = nu.cum_weights[j];
        const double q = std::min(qi, qj);
        const double width = q - prev;
        if (width > 0.0)
            acc += width * detail::pow_cost(std::abs(mu.values[i] - nu.values[j]), p);
        prev = q;
        if (qi == q)
            ++i;
        if (qj == q)
            ++j;
    }
    return detail::pow_root(acc, p);
}

/// 2-Wasserstein distance between Gaussians:
/// W2^2 = ||mu_a - mu_b||^2 + tr(S_a + S_b - 2 (S_a^{1/2} S_b S_a^{1/2})^{1/2}),
/// with the trace term clamped at zero to absorb roundoff.
inline double w2_gaussian(const GaussianSummary& a, const GaussianSummary& b)
{
    if (a.dim() != b.dim())
        throw std::invalid_argument("w2_gaussian: dimension mismatch");
    detail::require_psd(a, "w2_gaussian");
    detail::require_psd(b, "w2_gaussian");
    if (a.covariance == b.covariance)
        return (a.mean - b.mean).norm(); // Bures term is exactly zero

    const Eigen::MatrixXd root_a = detail::psd_sqrt(a.covariance);
    const Eigen::MatrixXd cross = detail::psd_sqrt(root_a * b.covariance * root_a);
    const double bures =
        std::max(0.0, (a.covariance + b.covariance - 2.0 * cross).trace());
    return std::sqrt((a.mean - b.mean).squaredNorm() + bures);
}

/// Exact p-Wasserstein distance between equal-size uniformly weighted clouds,
/// solved as a minimal assignment on the p-th-power cost matrix. Clouds of
/// other shapes are unsupported rather than silently approximated.
inline double wp_cloud_exact(const Cloud& mu, const Cloud& nu, double p,
                             Eigen::Index max_points = 256)
{
    if (!(p >= 1.0))
        throw std::invalid_argument("wp_cloud_exact: p must be >= 1");
    if (mu.dim() != nu.dim())
        throw std::invalid_argument("wp_cloud_exact: dimension mismatch");
    const Eigen::Index n = mu.size();
    if (nu.size() != n)
        throw std::invalid_argument("wp_cloud_exact: unsupported case, clouds must have equal size");
    const double uniform = 1.0 / static_cast<double>(n);
    auto is_uniform = [uniform](const Eigen::VectorXd& w) {
        return (w.array() - uniform).abs().maxCoeff() <= 1e-9;
    };
    if (!is_uniform(mu.weights) || !is_uniform(nu.weights))
        throw std::invalid_argument("wp_cloud_exact: unsupported case, weights must be uniform");
    if (n > max_points)
        throw std::runtime_error("wp_cloud_exact: cloud size exceeds the exact-solver cap");

    Eigen::MatrixXd cost(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            cost(i, j) = detail::pow_cost((mu.points.row(i) - nu.points.row(j)).norm(), p);

    std::vector<int> assignment;
    const double total = detail::solve_assignment(cost, assignment);
    return detail::pow_root(total * uniform, p);
}

/// Power-mean of projected 1D distances over a fixed direction set:
/// ((1/m) sum_r W_p(mu_{v_r}, nu_{v_r})^p)^{1/p}.
inline double sliced_wp(const Cloud& mu, const Cloud& nu, const ProjectionBasis& basis, double p)
{
    if (basis.directions.empty())
        throw std::invalid_argument("sliced_wp: basis must be nonempty");
    if (mu.dim() != nu.dim() || basis.dim() != mu.dim())
        throw std::invalid_argument("sliced_wp: dimension mismatch");
    double acc = 0.0;
    for (const Eigen::VectorXd& v : basis.directions)
        acc += detail::pow_cost(wp_1d(project(mu, v), project(nu, v), p), p);
    return detail::pow_root(acc / static_cast<double>(basis.size()), p);
}

/// Closed-form LGW2/GGW2 bounds on GW_2 between Gaussians. Arguments are
/// ordered internally so the higher-dimensional covariance, which must be
/// nonsingular, supplies the reference spectrum D_0; with equal dimensions
/// the residual-spectrum terms vanish as written.
inline GWBounds gw2_gaussian_bounds(const GaussianSummary& a, const GaussianSummary& b)
{
    const GaussianSummary& hi = (a.dim() >= b.dim()) ? a : b;
    const GaussianSummary& lo = (a.dim() >= b.dim()) ? b : a;
    detail::require_psd(hi, "gw2_gaussian_bounds");
    detail::require_psd(lo, "gw2_gaussian_bounds");

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_hi(hi.covariance, Eigen::EigenvaluesOnly);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_lo(lo.covariance, Eigen::EigenvaluesOnly);
    const Eigen::VectorXd d0 = eig_hi.eigenvalues().reverse().cwiseMax(0.0);
    const Eigen::VectorXd d1 = eig_lo.eigenvalues().reverse().cwiseMax(0.0);
    if (d0.minCoeff() <= 1e-12)
        throw std::invalid_argument("gw2_gaussian_bounds: reference covariance is singular");

    const Eigen::Index d = d1.size();
    const double tr_gap = d0.sum() - d1.sum();
    const double f0 = d0.norm();
    const double f1 = d1.norm();
    const double f0_head = d0.head(d).norm();
    const double head_gap_sq = (d0.head(d) - d1).squaredNorm();

    const double lower_sq = 4.0 * tr_gap * tr_gap + 4.0 * (f0 - f1) * (f0 - f1) +
                            4.0 * head_gap_sq + 4.0 * (f0 - f0_head) * (f0 - f0_head);
    const double upper_sq = 4.0 * tr_gap * tr_gap + 8.0 * head_gap_sq +
                            8.0 * (f0 * f0 - f0_head * f0_head);

    return {std::sqrt(std::max(0.0, lower_sq)), std::sqrt(std::max(0.0, upper_sq))};
}

} // namespace otgp
