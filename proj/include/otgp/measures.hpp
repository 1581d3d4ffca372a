// Empirical probability measures on R^d and their 1D projections.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace otgp {

/// A finite weighted sample set representing an empirical probability
/// measure: n points in R^d with nonnegative weights summing to 1.
struct Cloud {
    Eigen::MatrixXd points;  // n x d
    Eigen::VectorXd weights; // n, sums to 1

    Eigen::Index size() const { return points.rows(); }
    Eigen::Index dim() const { return points.cols(); }
};

/// A measure on R represented through its quantile function: atom locations
/// sorted ascending with strictly increasing cumulative weights ending at 1.
struct Marginal1D {
    std::vector<double> values;
    std::vector<double> cum_weights;

    std::size_t size() const { return values.size(); }
};

/// Gaussian moment summary (mean, covariance) of a measure on R^d.
struct GaussianSummary {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;

    Eigen::Index dim() const { return mean.size(); }
};

/// A fixed set of unit projection directions in R^d.
struct ProjectionBasis {
    std::vector<Eigen::VectorXd> directions;

    std::size_t size() const { return directions.size(); }
    Eigen::Index dim() const { return directions.empty() ? 0 : directions.front().size(); }
};

/// Builds a Cloud from raw samples. Missing weights default to uniform;
/// given weights are normalized to sum 1.
inline Cloud from_samples(const Eigen::MatrixXd& points,
                          const std::optional<Eigen::VectorXd>& weights = std::nullopt)
{
    const Eigen::Index n = points.rows();
    if (n < 1 || points.cols() < 1)
        throw std::invalid_argument("from_samples: need at least one sample and one dimension");
    if (!points.allFinite())
        throw std::invalid_argument("from_samples: non-finite coordinate");

    Cloud c;
    c.points = points;
    if (weights) {
        if (weights->size() != n)
            throw std::invalid_argument("from_samples: weight count does not match sample count");
        if (!weights->allFinite() || (weights->array() < 0.0).any())
            throw std::invalid_argument("from_samples: weights must be finite and nonnegative");
        const double total = weights->sum();
        if (total <= 0.0)
            throw std::invalid_argument("from_samples: weights sum to zero");
        c.weights = *weights / total;
    } else {
        c.weights = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    }
    return c;
}

namespace detail {

// Sorts (value, weight) atoms, merges ties by weight addition, drops
// zero-weight atoms and normalizes the cumulative sequence to end at 1.
inline Marginal1D make_marginal(std::vector<std::pair<double, double>>& atoms)
{
    std::sort(atoms.begin(), atoms.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    Marginal1D m;
    m.values.reserve(atoms.size());
    m.cum_weights.reserve(atoms.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        double w = atoms[i].second;
        while (i + 1 < atoms.size() && atoms[i + 1].first == atoms[i].first) {
            w += atoms[i + 1].second;
            ++i;
        }
        if (w <= 0.0)
            continue;
        acc += w;
        m.values.push_back(atoms[i].first);
        m.cum_weights.push_back(acc);
    }
    if (m.values.empty())
        throw std::invalid_argument("marginal: measure has no positive-weight atoms");
    for (double& q : m.cum_weights)
        q /= acc;
    m.cum_weights.back() = 1.0;
    return m;
}

} // namespace detail

/// Coordinate-axis marginal of a cloud.
inline Marginal1D marginal(const Cloud& c, Eigen::Index axis)
{
    if (axis < 0 || axis >= c.dim())
        throw std::invalid_argument("marginal: axis out of range");
    std::vector<std::pair<double, double>> atoms(static_cast<std::size_t>(c.size()));
    for (Eigen::Index j = 0; j < c.size(); ++j)
        atoms[static_cast<std::size_t>(j)] = {c.points(j, axis), c.weights(j)};
    return detail::make_marginal(atoms);
}

/// Push-forward of a cloud through x -> v^T x for a unit direction v.
inline Marginal1D project(const Cloud& c, const Eigen::VectorXd& v)
{
    if (v.size() != c.dim())
        throw std::invalid_argument("project: direction dimension mismatch");
    if (std::abs(v.norm() - 1.0) > 1e-10)
        throw std::invalid_argument("project: direction must be a unit vector");
    std::vector<std::pair<double, double>> atoms(static_cast<std::size_t>(c.size()));
    for (Eigen::Index j = 0; j < c.size(); ++j)
        atoms[static_cast<std::size_t>(j)] = {v.dot(c.points.row(j)), c.weights(j)};
    return detail::make_marginal(atoms);
}

/// Generalized inverse CDF: F^{-1}(q) = inf{x : F(x) >= q}. q = 0 returns the
/// smallest atom, q = 1 the largest.
inline double quantile(const Marginal1D& m, double q)
{
    if (!(q >= 0.0) || !(q <= 1.0))
        throw std::invalid_argument("quantile: q must be in [0, 1]");
    const auto it = std::lower_bound(m.cum_weights.begin(), m.cum_weights.end(), q);
    if (it == m.cum_weights.end())
        return m.values.back();
    return m.values[static_cast<std::size_t>(it - m.cum_weights.begin())];
}

/// Weighted mean and weighted covariance of a cloud. The covariance uses the
/// sum-of-weights denominator (biased form), so a singleton cloud has
/// covariance zero.
inline GaussianSummary gaussian_summary(const Cloud& c)
{
    GaussianSummary g;
    g.mean = c.points.transpose() * c.weights;
    const Eigen::MatrixXd centered = c.points.rowwise() - g.mean.transpose();
    g.covariance = centered.transpose() * c.weights.asDiagonal() * centered;
    // Exact symmetry regardless of accumulation order.
    g.covariance = 0.5 * (g.covariance + g.covariance.transpose()).eval();
    return g;
}

/// Top-m principal directions of the pooled design: the clouds are pooled as
/// an equal-weight mixture and the eigenvectors of its covariance are
/// returned with descending eigenvalues. Each direction's sign is fixed so
/// its largest-magnitude entry is positive, making the basis deterministic.
inline ProjectionBasis pca_directions(std::span<const Cloud> clouds, int m)
{
    if (clouds.empty())
        throw std::invalid_argument("pca_directions: need at least one cloud");
    const Eigen::Index d = clouds.front().dim();
    if (m < 1 || m > d)
        throw std::invalid_argument("pca_directions: m must be in [1, d]");

    Eigen::Index pooled = 0;
    for (const Cloud& c : clouds) {
        if (c.dim() != d)
            throw std::invalid_argument("pca_directions: clouds must share dimension");
        pooled += c.size();
    }
    if (pooled < d)
        throw std::invalid_argument("pca_directions: pooled sample count below dimension");

    const double cloud_weight = 1.0 / static_cast<double>(clouds.size());
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
    for (const Cloud& c : clouds)
        mean += cloud_weight * (c.points.transpose() * c.weights);
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
    for (const Cloud& c : clouds) {
        const Eigen::MatrixXd centered = c.points.rowwise() - mean.transpose();
        cov += cloud_weight * (centered.transpose() * c.weights.asDiagonal() * centered);
    }
    cov = 0.5 * (cov + cov.transpose()).eval();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success)
        throw std::runtime_error("pca_directions: eigendecomposition failed");

    ProjectionBasis basis;
    basis.directions.reserve(static_cast<std::size_t>(m));
    // SelfAdjointEigenSolver sorts ascending; take from the top.
    for (int r = 0; r < m; ++r) {
        Eigen::VectorXd v = eig.eigenvectors().col(d - 1 - r);
        Eigen::Index imax = 0;
        v.cwiseAbs().maxCoeff(&imax);
        if (v(imax) < 0.0)
            v = -v;
        basis.directions.push_back(v / v.norm());
    }
    return basis;
}

} // namespace otgp
