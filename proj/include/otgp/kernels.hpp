// Covariance kernels on points, clouds and Gaussian summaries, plus Gram
// assembly. Transport families follow k = lambda * exp(-sigma * W_p^p); the
// projected families (PWA along coordinate axes, PCPWA along a fixed
// orthonormal basis, SWGP over random slices) reduce every evaluation to
// closed-form 1D distances.
#pragma once

#include "otgp/measures.hpp"
#include "otgp/random.hpp"
#include "otgp/transport.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace otgp {

enum class KernelFamily { RBF, Matern32, Matern52, Exponential, WGP, SWGP, PWA, PCPWA, UIGP, KME, MMD };

inline const char* family_name(KernelFamily f)
{
    switch (f) {
    case KernelFamily::RBF: return "rbf";
    case KernelFamily::Matern32: return "matern32";
    case KernelFamily::Matern52: return "matern52";
    case KernelFamily::Exponential: return "exponential";
    case KernelFamily::WGP: return "wgp";
    case KernelFamily::SWGP: return "swgp";
    case KernelFamily::PWA: return "pwa";
    case KernelFamily::PCPWA: return "pcpwa";
    case KernelFamily::UIGP: return "uigp";
    case KernelFamily::KME: return "kme";
    case KernelFamily::MMD: return "mmd";
    }
    return "?";
}

/// Kernel family plus hyperparameters. `scales` holds the transport rates
/// sigma_i (one per factor) for the Wasserstein families and the per-dimension
/// lengthscales for UIGP; `base_lengthscale` is the Euclidean lengthscale of
/// the point kernels and of the KME/MMD base kernel.
struct KernelSpec {
    KernelFamily family = KernelFamily::RBF;
    double amplitude = 1.0;
    std::vector<double> scales;
    double p = 1.0;
    double base_lengthscale = 1.0;
    std::optional<ProjectionBasis> basis;
    int slice_count = 1;
    std::uint64_t slice_seed = 0;
};

using MeasureInput = std::variant<Eigen::VectorXd, Cloud, GaussianSummary>;

struct GramMatrix {
    Eigen::MatrixXd entries;
    KernelSpec spec;
};

inline void validate_spec(const KernelSpec& spec)
{
    if (!(spec.amplitude > 0.0))
        throw std::invalid_argument("KernelSpec: amplitude must be positive");
    for (const double s : spec.scales)
        if (!(s > 0.0))
            throw std::invalid_argument("KernelSpec: scales must be positive");
    if (!(spec.p >= 1.0))
        throw std::invalid_argument("KernelSpec: p must be >= 1");
    if (!(spec.base_lengthscale > 0.0))
        throw std::invalid_argument("KernelSpec: base lengthscale must be positive");
    if (spec.family == KernelFamily::SWGP && spec.slice_count < 1)
        throw std::invalid_argument("KernelSpec: SWGP needs at least one slice");
    if ((spec.family == KernelFamily::PCPWA) != spec.basis.has_value())
        throw std::invalid_argument("KernelSpec: projection basis is required for PCPWA and only PCPWA");
}

/// The frozen direction set a SWGP spec uses for every pair: a pure function
/// of (slice_seed, slice_count, d), so single evaluations and whole-Gram
/// assemblies see identical slices.
inline ProjectionBasis slice_directions(const KernelSpec& spec, Eigen::Index d)
{
    RandomStream stream(spec.slice_seed, "swgp-slices", 0, "direction");
    ProjectionBasis basis;
    basis.directions.reserve(static_cast<std::size_t>(spec.slice_count));
    for (int r = 0; r < spec.slice_count; ++r)
        basis.directions.push_back(stream.sphere_direction(d));
    return basis;
}

namespace detail {

inline double point_profile(KernelFamily family, double u)
{
    switch (family) {
    case KernelFamily::RBF:
        return std::exp(-0.5 * u * u);
    case KernelFamily::Matern32: {
        const double s = std::numbers::sqrt3 * u;
        return (1.0 + s) * std::exp(-s);
    }
    case KernelFamily::Matern52: {
        const double s = std::sqrt(5.0) * u;
        return (1.0 + s + s * s / 3.0) * std::exp(-s);
    }
    case KernelFamily::Exponential:
        return std::exp(-u);
    default:
        throw std::invalid_argument("point_profile: not a point kernel family");
    }
}

inline bool is_point_family(KernelFamily f)
{
    return f == KernelFamily::RBF || f == KernelFamily::Matern32 ||
           f == KernelFamily::Matern52 || f == KernelFamily::Exponential;
}

// Shared by PWA and PCPWA so that the two families agree bitwise whenever
// their per-direction marginals coincide.
inline double weighted_marginal_exponent(std::span<const double> scales,
                                         std::span<const Marginal1D> a,
                                         std::span<const Marginal1D> b, double p)
{
    double e = 0.0;
    for (std::size_t r = 0; r < scales.size(); ++r)
        e += scales[r] * pow_cost(wp_1d(a[r], b[r], p), p);
    return e;
}

inline double kme_double_sum(const Cloud& mu, const Cloud& nu, double lengthscale)
{
    const double inv = 1.0 / (2.0 * lengthscale * lengthscale);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < mu.size(); ++i) {
        double row = 0.0;
        for (Eigen::Index j = 0; j < nu.size(); ++j)
            row += nu.weights(j) *
                   std::exp(-(mu.points.row(i) - nu.points.row(j)).squaredNorm() * inv);
        acc += mu.weights(i) * row;
    }
    return acc;
}

// Per-input state reused across all pairs of a Gram assembly.
struct PreparedInput {
    const Eigen::VectorXd* point = nullptr;
    const Cloud* cloud = nullptr;
    const GaussianSummary* gauss = nullptr;
    std::vector<Marginal1D> margs;
    double self_kme = 0.0; // MMD only: cached k_kme(mu, mu)
};

inline PreparedInput prepare(const KernelSpec& spec, const MeasureInput& input,
                             const ProjectionBasis* slices)
{
    PreparedInput prep;
    if (const auto* x = std::get_if<Eigen::VectorXd>(&input)) {
        if (!is_point_family(spec.family))
            throw std::invalid_argument("kernel: point inputs require a point kernel family");
        prep.point = x;
        return prep;
    }
    if (const auto* g = std::get_if<GaussianSummary>(&input)) {
        if (spec.family != KernelFamily::WGP && spec.family != KernelFamily::UIGP)
            throw std::invalid_argument("kernel: Gaussian summaries require the WGP or UIGP family");
        prep.gauss = g;
        return prep;
    }
    const Cloud& c = std::get<Cloud>(input);
    prep.cloud = &c;
    switch (spec.family) {
    case KernelFamily::WGP:
        if (c.dim() == 1)
            prep.margs.push_back(marginal(c, 0));
        break;
    case KernelFamily::PWA:
        if (static_cast<Eigen::Index>(spec.scales.size()) != c.dim())
            throw std::invalid_argument("k_pwa: need one scale per input dimension");
        for (Eigen::Index i = 0; i < c.dim(); ++i)
            prep.margs.push_back(marginal(c, i));
        break;
    case KernelFamily::PCPWA: {
        const ProjectionBasis& basis = *spec.basis;
        if (spec.scales.size() != basis.size())
            throw std::invalid_argument("k_pcpwa: need one scale per basis direction");
        if (basis.dim() != c.dim())
            throw std::invalid_argument("k_pcpwa: basis dimension mismatch");
        for (const Eigen::VectorXd& v : basis.directions)
            prep.margs.push_back(project(c, v));
        break;
    }
    case KernelFamily::SWGP:
        for (const Eigen::VectorXd& v : slices->directions)
            prep.margs.push_back(project(c, v));
        break;
    case KernelFamily::KME:
        break;
    case KernelFamily::MMD:
        prep.self_kme = kme_double_sum(c, c, spec.base_lengthscale);
        break;
    default:
        throw std::invalid_argument("kernel: cloud inputs not supported by this family");
    }
    return prep;
}

inline double uigp_value(const GaussianSummary& a, const GaussianSummary& b,
                         const KernelSpec& spec)
{
    const Eigen::Index d = a.dim();
    if (b.dim() != d)
        throw std::invalid_argument("k_uigp: dimension mismatch");
    if (static_cast<Eigen::Index>(spec.scales.size()) != d)
        throw std::invalid_argument("k_uigp: need one lengthscale per dimension");
    require_psd(a, "k_uigp");
    require_psd(b, "k_uigp");

    Eigen::VectorXd lam(d);
    for (Eigen::Index i = 0; i < d; ++i)
        lam(i) = spec.scales[static_cast<std::size_t>(i)] * spec.scales[static_cast<std::size_t>(i)];
    Eigen::MatrixXd total = a.covariance + b.covariance;
    total.diagonal() += lam;

    const Eigen::LLT<Eigen::MatrixXd> llt(total);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("k_uigp: lengthscale-plus-covariance matrix is not invertible");
    // |I + (Sa+Sb) Lam^{-1}|^{-1/2} written as sqrt(|Lam| / |Lam + Sa + Sb|).
    double log_ratio = 0.0;
    for (Eigen::Index i = 0; i < d; ++i)
        log_ratio += std::log(lam(i)) - 2.0 * std::log(llt.matrixL()(i, i));
    const Eigen::VectorXd diff = a.mean - b.mean;
    const double quad = diff.dot(llt.solve(diff));
    return spec.amplitude * std::exp(0.5 * log_ratio - 0.5 * quad);
}

inline double pair_value(const KernelSpec& spec, const PreparedInput& a, const PreparedInput& b)
{
    switch (spec.family) {
    case KernelFamily::RBF:
    case KernelFamily::Matern32:
    case KernelFamily::Matern52:
    case KernelFamily::Exponential: {
        if (a.point->size() != b.point->size())
            throw std::invalid_argument("k_point: dimension mismatch");
        const double r = (*a.point - *b.point).norm();
        return spec.amplitude * point_profile(spec.family, r / spec.base_lengthscale);
    }
    case KernelFamily::WGP: {
        const double sigma = spec.scales.empty() ? 1.0 : spec.scales.front();
        double w;
        if (a.gauss != nullptr) {
            if (spec.p != 2.0)
                throw std::invalid_argument("k_wgp: Gaussian summaries use the W2 closed form, so p must be 2");
            w = w2_gaussian(*a.gauss, *b.gauss);
        } else if (!a.margs.empty()) {
            w = wp_1d(a.margs.front(), b.margs.front(), spec.p);
        } else {
            w = wp_cloud_exact(*a.cloud, *b.cloud, spec.p);
        }
        return spec.amplitude * std::exp(-sigma * pow_cost(w, spec.p));
    }
    case KernelFamily::PWA:
    case KernelFamily::PCPWA:
        return spec.amplitude *
               std::exp(-weighted_marginal_exponent(spec.scales, a.margs, b.margs, spec.p));
    case KernelFamily::SWGP: {
        const double sigma = spec.scales.empty() ? 1.0 : spec.scales.front();
        double mean_cost = 0.0;
        for (std::size_t r = 0; r < a.margs.size(); ++r)
            mean_cost += pow_cost(wp_1d(a.margs[r], b.margs[r], spec.p), spec.p);
        mean_cost /= static_cast<double>(a.margs.size());
        return spec.amplitude * std::exp(-sigma * mean_cost);
    }
    case KernelFamily::UIGP:
        return uigp_value(*a.gauss, *b.gauss, spec);
    case KernelFamily::KME:
        if (a.cloud->dim() != b.cloud->dim())
            throw std::invalid_argument("k_kme: dimension mismatch");
        return spec.amplitude * kme_double_sum(*a.cloud, *b.cloud, spec.base_lengthscale);
    case KernelFamily::MMD: {
        if (a.cloud->dim() != b.cloud->dim())
            throw std::invalid_argument("k_mmd: dimension mismatch");
        const double sigma = spec.scales.empty() ? 1.0 : spec.scales.front();
        const double m2 =
            std::max(0.0, a.self_kme + b.self_kme -
                              2.0 * kme_double_sum(*a.cloud, *b.cloud, spec.base_lengthscale));
        return spec.amplitude * std::exp(-sigma * m2);
    }
    }
    throw std::invalid_argument("kernel: unknown family");
}

inline std::vector<PreparedInput> prepare_all(const KernelSpec& spec,
                                              std::span<const MeasureInput> inputs,
                                              const ProjectionBasis* slices)
{
    if (inputs.empty())
        throw std::invalid_argument("gram: need at least one input");
    const std::size_t kind = inputs.front().index();
    std::vector<PreparedInput> prepared;
    prepared.reserve(inputs.size());
    for (const MeasureInput& input : inputs) {
        if (input.index() != kind)
            throw std::invalid_argument("gram: heterogeneous input representations");
        prepared.push_back(prepare(spec, input, slices));
    }
    return prepared;
}

} // namespace detail

// Single-pair evaluations -----------------------------------------------

inline double k_point(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const KernelSpec& spec)
{
    validate_spec(spec);
    if (!detail::is_point_family(spec.family))
        throw std::invalid_argument("k_point: spec is not a point kernel family");
    if (x.size() != y.size())
        throw std::invalid_argument("k_point: dimension mismatch");
    const double r = (x - y).norm();
    return spec.amplitude * detail::point_profile(spec.family, r / spec.base_lengthscale);
}

inline double kernel_value(const KernelSpec& spec, const MeasureInput& a, const MeasureInput& b)
{
    validate_spec(spec);
    if (a.index() != b.index())
        throw std::invalid_argument("kernel_value: heterogeneous input representations");
    std::optional<ProjectionBasis> slices;
    if (spec.family == KernelFamily::SWGP)
        slices = slice_directions(spec, std::get<Cloud>(a).dim());
    const detail::PreparedInput pa = detail::prepare(spec, a, slices ? &*slices : nullptr);
    const detail::PreparedInput pb = detail::prepare(spec, b, slices ? &*slices : nullptr);
    return detail::pair_value(spec, pa, pb);
}

inline double k_wgp(const Cloud& mu, const Cloud& nu, const KernelSpec& spec)
{
    return kernel_value(spec, mu, nu);
}

inline double k_wgp(const GaussianSummary& a, const GaussianSummary& b, const KernelSpec& spec)
{
    return kernel_value(spec, a, b);
}

inline double k_pwa(const Cloud& mu, const Cloud& nu, const KernelSpec& spec)
{
    return kernel_value(spec, mu, nu);
}

inline double k_pcpwa(const Cloud& mu, const Cloud& nu, const KernelSpec& spec)
{
    return kernel_value(spec, mu, nu);
}

inline double k_swgp(const Cloud& mu, const Cloud& nu, const KernelSpec& spec)
{
    return kernel_value(spec, mu, nu);
}

inline double k_uigp(const GaussianSummary& a, const GaussianSummary& b, const KernelSpec& spec)
{
    validate_spec(spec);
    return detail::uigp_value(a, b, spec);
}

/// RKHS mean-embedding inner product with a Gaussian base kernel; plain
/// weighted double sum, no amplitude factor.
inline double k_kme(const Cloud& mu, const Cloud& nu, const KernelSpec& spec)
{
    validate_spec(spec);
    if (mu.dim() != nu.dim())
        throw std::invalid_argument("k_kme: dimension mismatch");
    return detail::kme_double_sum(mu, nu, spec.base_lengthscale);
}

/// Squared maximum mean discrepancy, clamped at zero.
inline double mmd2(const Cloud& mu, const Cloud& nu, const KernelSpec& spec)
{
    validate_spec(spec);
    if (mu.dim() != nu.dim())
        throw std::invalid_argument("mmd2: dimension mismatch");
    return std::max(0.0, detail::kme_double_sum(mu, mu, spec.base_lengthscale) +
                             detail::kme_double_sum(nu, nu, spec.base_lengthscale) -
                             2.0 * detail::kme_double_sum(mu, nu, spec.base_lengthscale));
}

inline double k_mmd(const Cloud& mu, const Cloud& nu, const KernelSpec& spec)
{
    const double sigma = spec.scales.empty() ? 1.0 : spec.scales.front();
    return spec.amplitude * std::exp(-sigma * mmd2(mu, nu, spec));
}

// Gram assembly ----------------------------------------------------------

/// Symmetric Gram matrix over homogeneous inputs. The upper triangle is
/// computed and mirrored, so symmetry is exact; SWGP reuses one direction set
/// for every entry.
inline GramMatrix gram(std::span<const MeasureInput> inputs, const KernelSpec& spec)
{
    validate_spec(spec);
    std::optional<ProjectionBasis> slices;
    if (spec.family == KernelFamily::SWGP) {
        if (const auto* c = std::get_if<Cloud>(&inputs.front()))
            slices = slice_directions(spec, c->dim());
    }
    const auto prepared = detail::prepare_all(spec, inputs, slices ? &*slices : nullptr);

    const Eigen::Index n = static_cast<Eigen::Index>(inputs.size());
    GramMatrix g{Eigen::MatrixXd(n, n), spec};
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i; j < n; ++j) {
            const double value = detail::pair_value(spec, prepared[static_cast<std::size_t>(i)],
                                                    prepared[static_cast<std::size_t>(j)]);
            g.entries(i, j) = value;
            g.entries(j, i) = value;
        }
    }
    return g;
}

/// Rectangular matrix of k(test_i, train_j) values.
inline Eigen::MatrixXd cross_gram(std::span<const MeasureInput> train,
                                  std::span<const MeasureInput> test, const KernelSpec& spec)
{
    validate_spec(spec);
    if (train.empty() || test.empty())
        throw std::invalid_argument("cross_gram: need at least one input on each side");
    if (train.front().index() != test.front().index())
        throw std::invalid_argument("cross_gram: heterogeneous input representations");
    std::optional<ProjectionBasis> slices;
    if (spec.family == KernelFamily::SWGP) {
        if (const auto* c = std::get_if<Cloud>(&train.front()))
            slices = slice_directions(spec, c->dim());
    }
    const auto ptrain = detail::prepare_all(spec, train, slices ? &*slices : nullptr);
    const auto ptest = detail::prepare_all(spec, test, slices ? &*slices : nullptr);

    Eigen::MatrixXd k(static_cast<Eigen::Index>(test.size()), static_cast<Eigen::Index>(train.size()));
    for (Eigen::Index i = 0; i < k.rows(); ++i)
        for (Eigen::Index j = 0; j < k.cols(); ++j)
            k(i, j) = detail::pair_value(spec, ptest[static_cast<std::size_t>(i)],
                                         ptrain[static_cast<std::size_t>(j)]);
    return k;
}

inline double min_eigenvalue(const GramMatrix& g)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g.entries, Eigen::EigenvaluesOnly);
    return eig.eigenvalues().minCoeff();
}

} // namespace otgp
