// Uniform-error-band machinery: covering nets over Lipschitz-quantile
// classes, the computable Lipschitz constants of a fitted model, the
// beta/gamma band parameters, the conservative-interval condition, and the
// analytic undercoverage of input-noise-blind intervals.
#pragma once

#include "otgp/gp.hpp"
#include "otgp/normal.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace otgp {

/// A class of 1D measures supported on [a, b] whose quantile functions share
/// the Lipschitz bound `quantile_lipschitz`. The covering-rate constants are
/// carried for reporting only; net sizes are always counted exactly.
struct MeasureClassSpec {
    double support_lo = 0.0;
    double support_hi = 1.0;
    double quantile_lipschitz = 1.0;
    double covering_c = 0.0;      // optional rate constant C
    double covering_alpha0 = 0.0; // optional rate exponent alpha_0
};

struct QuantileNet {
    std::vector<Marginal1D> members;
    std::uint64_t size = 0;
};

struct BandCertificate {
    double tau = 0.0;
    double delta = 0.0;
    std::uint64_t net_size = 0;
    double beta = 0.0;
    double gamma = 0.0;
    double l_f = 0.0;
    double l_k = 0.0;
    double l_nu = 0.0;  // posterior-mean Lipschitz constant
    double omega = 0.0; // sigma_N modulus at tau
};

struct ConservativeVerdict {
    bool conservative = false;
    double margin = -std::numeric_limits<double>::infinity();
};

namespace detail {

inline std::uint64_t nondecreasing_sequence_count(std::uint64_t levels, std::uint64_t cells,
                                                  std::uint64_t cap)
{
    // C(levels + cells - 1, cells), saturating at cap.
    std::uint64_t result = 1;
    for (std::uint64_t i = 1; i <= cells; ++i) {
        const std::uint64_t num = levels - 1 + i;
        result = result / i * num + result % i * num / i; // exact: i consecutive factors
        if (result > cap)
            return cap + 1;
    }
    return result;
}

} // namespace detail

/// Explicit tau-net of the class in W_1: quantile functions piecewise
/// constant on a uniform q-grid of step tau/(2 ell) with values on a uniform
/// [a, b]-grid of step tau/2, restricted to nondecreasing sequences. By the
/// W_1 = L^1-of-quantiles identity every class member lies within tau of the
/// net. When a single central atom already covers the class the net is that
/// singleton.
inline QuantileNet quantile_net(const MeasureClassSpec& cls, double tau,
                                std::uint64_t max_members = 2'000'000)
{
    if (!(tau > 0.0))
        throw std::invalid_argument("quantile_net: tau must be positive");
    if (!(cls.support_hi > cls.support_lo) || !(cls.quantile_lipschitz > 0.0))
        throw std::invalid_argument("quantile_net: invalid class spec");

    const double width = cls.support_hi - cls.support_lo;
    QuantileNet net;
    if (tau >= 0.5 * width) {
        Marginal1D center;
        center.values = {cls.support_lo + 0.5 * width};
        center.cum_weights = {1.0};
        net.members.push_back(std::move(center));
        net.size = 1;
        return net;
    }

    const double h = std::min(1.0, tau / (2.0 * cls.quantile_lipschitz));
    const std::uint64_t cells = static_cast<std::uint64_t>(std::ceil(1.0 / h - 1e-12));
    const double value_step = 0.5 * tau;
    const std::uint64_t levels = static_cast<std::uint64_t>(std::floor(width / value_step)) + 1;

    net.size = detail::nondecreasing_sequence_count(levels, cells, max_members);
    if (net.size > max_members)
        throw std::runtime_error("quantile_net: net would exceed the member cap, use a larger tau");

    std::vector<double> widths(cells, h);
    widths.back() = 1.0 - h * static_cast<double>(cells - 1);

    std::vector<std::uint64_t> level(cells, 0);
    net.members.reserve(net.size);
    while (true) {
        Marginal1D m;
        double acc = 0.0;
        for (std::size_t c = 0; c < cells; ++c) {
            const double v = cls.support_lo + value_step * static_cast<double>(level[c]);
            acc += widths[c];
            if (!m.values.empty() && m.values.back() == v)
                m.cum_weights.back() = acc;
            else {
                m.values.push_back(v);
                m.cum_weights.push_back(acc);
            }
        }
        m.cum_weights.back() = 1.0;
        net.members.push_back(std::move(m));

        // Next nondecreasing sequence in lexicographic order.
        std::size_t c = cells;
        while (c > 0 && level[c - 1] == levels - 1)
            --c;
        if (c == 0)
            break;
        const std::uint64_t bumped = level[c - 1] + 1;
        for (std::size_t k = c - 1; k < cells; ++k)
            level[k] = bumped;
    }
    if (net.members.size() != net.size)
        throw std::runtime_error("quantile_net: enumeration does not match the counted size");
    return net;
}

/// Tight global W_1 Lipschitz constant of the p = 1 WGP kernel,
/// |d/dt lambda e^{-sigma t}| <= lambda sigma.
inline double kernel_lipschitz_w1(const KernelSpec& spec)
{
    if (spec.family != KernelFamily::WGP || spec.p != 1.0)
        throw std::invalid_argument("kernel_lipschitz_w1: requires the WGP family with p = 1");
    const double sigma = spec.scales.empty() ? 1.0 : spec.scales.front();
    if (!(spec.amplitude > 0.0) || sigma < 0.0)
        throw std::invalid_argument("kernel_lipschitz_w1: invalid hyperparameters");
    return spec.amplitude * sigma;
}

/// L_{nu_N} = N * L_k * ||alpha||_inf.
inline double posterior_mean_lipschitz(const GPModel& model, double l_k)
{
    return static_cast<double>(model.train_size()) * l_k *
           model.alpha.cwiseAbs().maxCoeff();
}

/// Hoelder-1/2 modulus for sigma_N: omega(tau) = sqrt(L_{sigma^2} tau) with
/// L_{sigma^2} = L_k (1 + 2 N ||(K + sigma_*^2 I)^{-1}||_inf lambda), using
/// |sqrt(s) - sqrt(t)| <= sqrt(|s - t|).
inline double sigma_modulus(const GPModel& model, double l_k, double tau)
{
    if (tau < 0.0)
        throw std::invalid_argument("sigma_modulus: tau must be nonnegative");
    if (tau == 0.0)
        return 0.0;
    const Eigen::Index n = model.train_size();
    const Eigen::MatrixXd inv =
        model.chol.triangularView<Eigen::Lower>().transpose().solve(
            model.chol.triangularView<Eigen::Lower>().solve(
                Eigen::MatrixXd::Identity(n, n)));
    const double inv_inf_norm = inv.cwiseAbs().rowwise().sum().maxCoeff();
    const double l_sigma_sq =
        l_k * (1.0 + 2.0 * static_cast<double>(n) * inv_inf_norm * model.spec.amplitude);
    return std::sqrt(l_sigma_sq * tau);
}

/// beta(tau) = [Phi^{-1}(1 - delta/(2M))]^2 and
/// gamma(tau) = (L_f + L_{nu_N}) tau + sqrt(beta) omega.
inline BandCertificate band(double tau, double delta, std::uint64_t net_size, double l_f,
                            double l_nu, double omega)
{
    if (!(delta > 0.0) || !(delta < 1.0))
        throw std::invalid_argument("band: delta must be in (0, 1)");
    if (net_size < 1)
        throw std::invalid_argument("band: net size must be at least 1");
    const double tail = delta / (2.0 * static_cast<double>(net_size));
    if (tail >= 1.0)
        throw std::invalid_argument("band: delta/(2M) must be below 1");
    BandCertificate cert;
    cert.tau = tau;
    cert.delta = delta;
    cert.net_size = net_size;
    cert.l_f = l_f;
    cert.l_nu = l_nu;
    cert.omega = omega;
    const double z = normal_quantile_upper(tail);
    cert.beta = z * z;
    cert.gamma = (l_f + l_nu) * tau + z * omega;
    return cert;
}

/// Conservative-interval test: the nominal interval with critical value z is
/// conservative iff z > sqrt(beta) and sigma_N >= gamma / (z - sqrt(beta)).
/// The margin is the slack sigma_N - gamma / (z - sqrt(beta)).
inline ConservativeVerdict conservative_condition(double z, const BandCertificate& cert,
                                                  double sigma_n)
{
    if (!(z > 0.0))
        throw std::invalid_argument("conservative_condition: z must be positive");
    ConservativeVerdict verdict;
    const double root_beta = std::sqrt(cert.beta);
    if (z <= root_beta)
        return verdict;
    verdict.margin = sigma_n - cert.gamma / (z - root_beta);
    verdict.conservative = verdict.margin >= 0.0;
    return verdict;
}

/// Weighted-projection metric D(mu, nu) = (sum_r a_r W_1(mu_{v_r}, nu_{v_r})^2)^{1/2}.
inline double pcpwa_metric(const Cloud& mu, const Cloud& nu, const ProjectionBasis& basis,
                           std::span<const double> weights)
{
    if (weights.size() != basis.size() || basis.directions.empty())
        throw std::invalid_argument("pcpwa_metric: weights must match the basis directions");
    double acc = 0.0;
    for (std::size_t r = 0; r < basis.size(); ++r) {
        if (!(weights[r] > 0.0))
            throw std::invalid_argument("pcpwa_metric: weights must be positive");
        const double w1 = wp_1d(project(mu, basis.directions[r]), project(nu, basis.directions[r]), 1.0);
        acc += weights[r] * w1 * w1;
    }
    return std::sqrt(acc);
}

/// Coverage of the nominal (1-alpha) interval that ignores input noise, under
/// the linear-Gaussian errors-in-variables model:
/// 2 Phi(z_{1-alpha/2} sigma / sqrt(sigma^2 + w^T Sigma_X w)) - 1.
inline double naive_coverage(const Eigen::VectorXd& w, const Eigen::MatrixXd& sigma_x,
                             double sigma, double alpha)
{
    if (!(sigma > 0.0))
        throw std::invalid_argument("naive_coverage: sigma must be positive");
    if (sigma_x.rows() != w.size() || sigma_x.cols() != w.size())
        throw std::invalid_argument("naive_coverage: dimension mismatch");
    const double input_var = std::max(0.0, w.dot(sigma_x * w));
    const double z = two_sided_z(alpha);
    return 2.0 * normal_cdf(z * sigma / std::sqrt(sigma * sigma + input_var)) - 1.0;
}

} // namespace otgp
