// Marginal-likelihood hyperparameter search: multi-start Nelder-Mead over
// log-transformed positive hyperparameters. The transport exponent p is a
// fixed per-run modeling choice and is never optimized.
#pragma once

#include "otgp/gp.hpp"
#include "otgp/random.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace otgp {

struct NelderMeadOptions {
    int max_iterations = 200;
    double tolerance = 1e-6; // simplex diameter triggering convergence
    double initial_step = 0.5;
};

struct NelderMeadResult {
    Eigen::VectorXd x;
    double value = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
};

/// Standard simplex minimization (reflection 1, expansion 2, contraction 0.5,
/// shrink 0.5). With max_iterations = 0 the start point is returned unchanged.
template <typename F>
NelderMeadResult nelder_mead(F&& objective, const Eigen::VectorXd& start,
                             const NelderMeadOptions& opts)
{
    const Eigen::Index n = start.size();
    if (opts.max_iterations <= 0)
        return {start, objective(start), 0, false};

    std::vector<Eigen::VectorXd> xs(static_cast<std::size_t>(n) + 1, start);
    std::vector<double> fs(static_cast<std::size_t>(n) + 1);
    for (Eigen::Index i = 0; i < n; ++i)
        xs[static_cast<std::size_t>(i) + 1](i) += opts.initial_step;
    for (std::size_t i = 0; i < xs.size(); ++i)
        fs[i] = objective(xs[i]);

    auto order = [&] {
        std::vector<std::size_t> idx(xs.size());
        for (std::size_t i = 0; i < idx.size(); ++i)
            idx[i] = i;
        std::stable_sort(idx.begin(), idx.end(),
                         [&](std::size_t a, std::size_t b) { return fs[a] < fs[b]; });
        std::vector<Eigen::VectorXd> xs2(xs.size());
        std::vector<double> fs2(fs.size());
        for (std::size_t i = 0; i < idx.size(); ++i) {
            xs2[i] = xs[idx[i]];
            fs2[i] = fs[idx[i]];
        }
        xs.swap(xs2);
        fs.swap(fs2);
    };

    NelderMeadResult result;
    int iter = 0;
    for (; iter < opts.max_iterations; ++iter) {
        order();
        double diameter = 0.0;
        for (std::size_t i = 1; i < xs.size(); ++i)
            diameter = std::max(diameter, (xs[i] - xs[0]).cwiseAbs().maxCoeff());
        if (diameter < opts.tolerance) {
            result.converged = true;
            break;
        }

        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
        for (std::size_t i = 0; i + 1 < xs.size(); ++i)
            centroid += xs[i];
        centroid /= static_cast<double>(n);

        const Eigen::VectorXd reflected = centroid + (centroid - xs.back());
        const double f_reflected = objective(reflected);
        if (f_reflected < fs[0]) {
            const Eigen::VectorXd expanded = centroid + 2.0 * (centroid - xs.back());
            const double f_expanded = objective(expanded);
            if (f_expanded < f_reflected) {
                xs.back() = expanded;
                fs.back() = f_expanded;
            } else {
                xs.back() = reflected;
                fs.back() = f_reflected;
            }
            continue;
        }
        if (f_reflected < fs[fs.size() - 2]) {
            xs.back() = reflected;
            fs.back() = f_reflected;
            continue;
        }
        const bool outside = f_reflected < fs.back();
        const Eigen::VectorXd contracted =
            outside ? Eigen::VectorXd(centroid + 0.5 * (reflected - centroid))
                    : Eigen::VectorXd(centroid + 0.5 * (xs.back() - centroid));
        const double f_contracted = objective(contracted);
        if (f_contracted < (outside ? f_reflected : fs.back())) {
            xs.back() = contracted;
            fs.back() = f_contracted;
            continue;
        }
        for (std::size_t i = 1; i < xs.size(); ++i) {
            xs[i] = xs[0] + 0.5 * (xs[i] - xs[0]);
            fs[i] = objective(xs[i]);
        }
    }
    order();
    result.x = xs[0];
    result.value = fs[0];
    result.iterations = iter;
    return result;
}

struct OptimizerConfig {
    int restarts = 5;
    int max_iterations = 200;
    double tolerance = 1e-6;
    double initial_step = 0.5;
    std::uint64_t seed = 0;
    double transport_p = 1.0;
    int slice_count = 20;
    std::uint64_t slice_seed = 0;
    std::optional<ProjectionBasis> basis; // PCPWA only
    double noise_floor = 1e-8;
    // When set, sigma_*^2 is held at this value instead of being optimized
    // jointly (e.g. a known observation-noise level).
    std::optional<double> fixed_noise_variance;
};

struct FitResult {
    KernelSpec spec;
    double noise_variance = 0.0;
    double log_marginal_likelihood = -std::numeric_limits<double>::infinity();
};

namespace detail {

// One optimizable scalar, all in linear space. Initial draws are log-uniform
// over [center*init_lo, center*init_hi]; hard bounds are wider.
struct Slot {
    double center = 1.0;
    double init_lo = 0.1;
    double init_hi = 10.0;
    double bound_lo = 1e-6;
    double bound_hi = 1e6;
};

inline double median_of(std::vector<double> xs, double fallback)
{
    std::erase_if(xs, [](double v) { return !(v > 0.0) || !std::isfinite(v); });
    if (xs.empty())
        return fallback;
    std::nth_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(xs.size() / 2), xs.end());
    return xs[xs.size() / 2];
}

// theta layout: [log lambda, log scale_0.., (log ell), (log noise)].
struct HyperProblem {
    KernelSpec base;
    int n_scales = 0;
    bool has_lengthscale = false;
    std::optional<double> fixed_noise;
    std::vector<Slot> slots;
    std::function<Eigen::MatrixXd(const KernelSpec&)> build_gram;

    int dim() const
    {
        return 1 + n_scales + (has_lengthscale ? 1 : 0) + (fixed_noise ? 0 : 1);
    }

    KernelSpec unpack(const Eigen::VectorXd& theta, double& noise) const
    {
        KernelSpec spec = base;
        int at = 0;
        spec.amplitude = std::exp(theta(at++));
        spec.scales.resize(static_cast<std::size_t>(n_scales));
        for (int s = 0; s < n_scales; ++s)
            spec.scales[static_cast<std::size_t>(s)] = std::exp(theta(at++));
        if (has_lengthscale)
            spec.base_lengthscale = std::exp(theta(at++));
        noise = fixed_noise ? *fixed_noise : std::exp(theta(at));
        return spec;
    }
};

inline HyperProblem make_problem(std::span<const MeasureInput> inputs, const Eigen::VectorXd& y,
                                 KernelFamily family, const OptimizerConfig& config)
{
    HyperProblem prob;
    prob.base.family = family;
    prob.base.p = config.transport_p;
    const double var_y = std::max((y.array() - y.mean()).square().mean(), 1e-12);

    const bool point_family = is_point_family(family);
    const bool exponent_cached = family == KernelFamily::WGP || family == KernelFamily::SWGP ||
                                 family == KernelFamily::PWA || family == KernelFamily::PCPWA;

    switch (family) {
    case KernelFamily::RBF:
    case KernelFamily::Matern32:
    case KernelFamily::Matern52:
    case KernelFamily::Exponential:
    case KernelFamily::KME:
        prob.has_lengthscale = true;
        break;
    case KernelFamily::MMD:
        prob.n_scales = 1;
        prob.has_lengthscale = true;
        break;
    case KernelFamily::WGP:
    case KernelFamily::SWGP:
        prob.n_scales = 1;
        break;
    case KernelFamily::PWA:
        prob.n_scales = static_cast<int>(std::get<Cloud>(inputs.front()).dim());
        break;
    case KernelFamily::PCPWA: {
        if (!config.basis)
            throw std::invalid_argument("optimize_hyperparams: PCPWA requires a projection basis");
        prob.base.basis = config.basis;
        prob.n_scales = static_cast<int>(config.basis->size());
        break;
    }
    case KernelFamily::UIGP:
        prob.n_scales = static_cast<int>(std::get<GaussianSummary>(inputs.front()).dim());
        break;
    }
    if (family == KernelFamily::SWGP) {
        prob.base.slice_count = config.slice_count;
        prob.base.slice_seed = config.slice_seed;
    }
    prob.base.scales.assign(static_cast<std::size_t>(prob.n_scales), 1.0);

    const Eigen::Index n = static_cast<Eigen::Index>(inputs.size());

    if (exponent_cached) {
        // K_ij = lambda * exp(-<scales, phi_ij>) with hyperparameter-free
        // features phi, so each objective call reduces to exponentials plus a
        // Cholesky factorization.
        KernelSpec probe = prob.base;
        probe.amplitude = 1.0;
        std::optional<ProjectionBasis> slices;
        if (family == KernelFamily::SWGP)
            slices = slice_directions(probe, std::get<Cloud>(inputs.front()).dim());
        std::vector<PreparedInput> prepared = prepare_all(probe, inputs, slices ? &*slices : nullptr);

        auto features = std::make_shared<std::vector<Eigen::MatrixXd>>(
            static_cast<std::size_t>(prob.n_scales), Eigen::MatrixXd::Zero(n, n));
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = i; j < n; ++j) {
                const auto& pi = prepared[static_cast<std::size_t>(i)];
                const auto& pj = prepared[static_cast<std::size_t>(j)];
                if (family == KernelFamily::WGP && pi.margs.empty()) {
                    const double w = wp_cloud_exact(*pi.cloud, *pj.cloud, probe.p);
                    (*features)[0](i, j) = (*features)[0](j, i) = pow_cost(w, probe.p);
                } else if (family == KernelFamily::SWGP) {
                    double mean_cost = 0.0;
                    for (std::size_t r = 0; r < pi.margs.size(); ++r)
                        mean_cost += pow_cost(wp_1d(pi.margs[r], pj.margs[r], probe.p), probe.p);
                    (*features)[0](i, j) = (*features)[0](j, i) =
                        mean_cost / static_cast<double>(pi.margs.size());
                } else {
                    for (int s = 0; s < prob.n_scales; ++s) {
                        const std::size_t su = static_cast<std::size_t>(s);
                        const double w = wp_1d(pi.margs[su], pj.margs[su], probe.p);
                        (*features)[su](i, j) = (*features)[su](j, i) = pow_cost(w, probe.p);
                    }
                }
            }
        }

        prob.build_gram = [features, n](const KernelSpec& spec) {
            Eigen::MatrixXd exponent = Eigen::MatrixXd::Zero(n, n);
            for (std::size_t s = 0; s < spec.scales.size(); ++s)
                exponent += spec.scales[s] * (*features)[s];
            return Eigen::MatrixXd(spec.amplitude * (-exponent).array().exp());
        };

        for (int s = 0; s < prob.n_scales; ++s) {
            std::vector<double> offdiag;
            offdiag.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
            for (Eigen::Index i = 0; i < n; ++i)
                for (Eigen::Index j = i + 1; j < n; ++j)
                    offdiag.push_back((*features)[static_cast<std::size_t>(s)](i, j));
            const double med = median_of(std::move(offdiag), 1.0);
            prob.slots.push_back(Slot{1.0 / med, 0.01, 100.0, 1e-4 / med, 1e4 / med});
        }
    } else if (point_family) {
        auto dist = std::make_shared<Eigen::MatrixXd>(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j)
                (*dist)(i, j) = (std::get<Eigen::VectorXd>(inputs[static_cast<std::size_t>(i)]) -
                                 std::get<Eigen::VectorXd>(inputs[static_cast<std::size_t>(j)]))
                                    .norm();
        prob.build_gram = [dist, family](const KernelSpec& spec) {
            return Eigen::MatrixXd((*dist).unaryExpr([&](double r) {
                return spec.amplitude * point_profile(family, r / spec.base_lengthscale);
            }));
        };
    } else if (family == KernelFamily::KME || family == KernelFamily::MMD) {
        // The embedding double sums dominate the fit, so cache the pairwise
        // squared sample distances once and re-exponentiate per call with
        // vectorized array ops. Falls back to plain re-evaluation when the
        // blocks would not fit in memory.
        std::size_t total_entries = 0;
        std::vector<const Cloud*> clouds(inputs.size());
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            clouds[i] = &std::get<Cloud>(inputs[i]);
            for (std::size_t j = i; j < inputs.size(); ++j)
                total_entries += static_cast<std::size_t>(clouds[i]->size()) *
                                 static_cast<std::size_t>(std::get<Cloud>(inputs[j]).size());
        }
        if (total_entries <= 32'000'000) {
            struct KmeCache {
                std::vector<Eigen::MatrixXd> dist_sq; // blocks for i <= j
                std::vector<Eigen::VectorXd> weights;
                Eigen::Index count = 0;
            };
            auto cache = std::make_shared<KmeCache>();
            cache->count = n;
            cache->weights.reserve(inputs.size());
            for (const Cloud* c : clouds)
                cache->weights.push_back(c->weights);
            cache->dist_sq.reserve(inputs.size() * (inputs.size() + 1) / 2);
            for (std::size_t i = 0; i < inputs.size(); ++i) {
                for (std::size_t j = i; j < inputs.size(); ++j) {
                    const Cloud& a = *clouds[i];
                    const Cloud& b = *clouds[j];
                    Eigen::MatrixXd block(a.size(), b.size());
                    for (Eigen::Index r = 0; r < a.size(); ++r)
                        block.row(r) =
                            (b.points.rowwise() - a.points.row(r)).rowwise().squaredNorm();
                    cache->dist_sq.push_back(std::move(block));
                }
            }
            const bool is_mmd = family == KernelFamily::MMD;
            prob.build_gram = [cache, is_mmd, n](const KernelSpec& spec) {
                const double inv = 1.0 / (2.0 * spec.base_lengthscale * spec.base_lengthscale);
                Eigen::MatrixXd embed(n, n);
                std::size_t at = 0;
                for (Eigen::Index i = 0; i < n; ++i) {
                    for (Eigen::Index j = i; j < n; ++j, ++at) {
                        const double s =
                            cache->weights[static_cast<std::size_t>(i)].transpose() *
                            (-inv * cache->dist_sq[at].array()).exp().matrix() *
                            cache->weights[static_cast<std::size_t>(j)];
                        embed(i, j) = s;
                        embed(j, i) = s;
                    }
                }
                if (!is_mmd)
                    return Eigen::MatrixXd(spec.amplitude * embed);
                const double sigma = spec.scales.empty() ? 1.0 : spec.scales.front();
                Eigen::MatrixXd k(n, n);
                for (Eigen::Index i = 0; i < n; ++i) {
                    k(i, i) = spec.amplitude;
                    for (Eigen::Index j = i + 1; j < n; ++j) {
                        const double m2 =
                            std::max(0.0, embed(i, i) + embed(j, j) - 2.0 * embed(i, j));
                        k(i, j) = k(j, i) = spec.amplitude * std::exp(-sigma * m2);
                    }
                }
                return k;
            };
        } else {
            std::vector<MeasureInput> owned(inputs.begin(), inputs.end());
            prob.build_gram = [owned](const KernelSpec& spec) {
                return gram(owned, spec).entries;
            };
        }
    } else {
        std::vector<MeasureInput> owned(inputs.begin(), inputs.end());
        prob.build_gram = [owned](const KernelSpec& spec) {
            return gram(owned, spec).entries;
        };
    }

    // Remaining slot centers: amplitude tracks var(y); lengthscales track the
    // median of the relevant pairwise distances.
    std::vector<Slot>& slots = prob.slots;
    std::vector<Slot> ordered;
    ordered.push_back(Slot{var_y, 0.1, 10.0, 1e-3 * var_y, 1e3 * var_y});

    if (family == KernelFamily::UIGP) {
        const Eigen::Index d = std::get<GaussianSummary>(inputs.front()).dim();
        std::vector<double> all;
        for (Eigen::Index c = 0; c < d; ++c) {
            std::vector<double> gaps;
            for (std::size_t i = 0; i < inputs.size(); ++i)
                for (std::size_t j = i + 1; j < inputs.size(); ++j)
                    gaps.push_back(std::abs(std::get<GaussianSummary>(inputs[i]).mean(c) -
                                            std::get<GaussianSummary>(inputs[j]).mean(c)));
            all.insert(all.end(), gaps.begin(), gaps.end());
            const double med = median_of(std::move(gaps), 0.0);
            ordered.push_back(Slot{med, 0.01, 100.0, 0.0, 0.0}); // bounds fixed below
        }
        const double fallback = median_of(std::move(all), 1.0);
        for (std::size_t s = 1; s < ordered.size(); ++s) {
            if (!(ordered[s].center > 0.0))
                ordered[s].center = fallback;
            ordered[s].bound_lo = 1e-3 * ordered[s].center;
            ordered[s].bound_hi = 1e3 * ordered[s].center;
        }
    } else {
        ordered.insert(ordered.end(), slots.begin(), slots.end());
    }

    if (prob.has_lengthscale) {
        std::vector<double> dists;
        if (point_family) {
            for (std::size_t i = 0; i < inputs.size(); ++i)
                for (std::size_t j = i + 1; j < inputs.size(); ++j)
                    dists.push_back((std::get<Eigen::VectorXd>(inputs[i]) -
                                     std::get<Eigen::VectorXd>(inputs[j]))
                                        .norm());
        } else {
            // Pooled-sample distance median for the KME/MMD base kernel,
            // subsampled for large designs.
            std::vector<Eigen::VectorXd> pool;
            RandomStream pick(config.seed, "hyperopt", 0, "lengthscale-pool");
            for (const MeasureInput& input : inputs) {
                const Cloud& c = std::get<Cloud>(input);
                for (Eigen::Index r = 0; r < c.size(); ++r)
                    if (pool.size() < 512 || pick.uniform() < 0.05)
                        pool.push_back(c.points.row(r).transpose());
            }
            for (std::size_t i = 0; i < pool.size() && i < 256; ++i)
                for (std::size_t j = i + 1; j < pool.size() && j < 256; ++j)
                    dists.push_back((pool[i] - pool[j]).norm());
        }
        const double med = median_of(std::move(dists), 1.0);
        ordered.push_back(Slot{med, 0.01, 100.0, 1e-3 * med, 1e3 * med});
    }

    // Noise variance, hard-bounded to [noise_floor, var(y)] unless fixed.
    prob.fixed_noise = config.fixed_noise_variance;
    if (!prob.fixed_noise)
        ordered.push_back(Slot{1e-2 * var_y, 0.1, 10.0, config.noise_floor, var_y});

    if (family == KernelFamily::MMD) {
        // The MMD rate has no precomputable feature median; centre it on the
        // squared-MMD scale implied by the lengthscale centre.
        KernelSpec probe = prob.base;
        probe.base_lengthscale =
            ordered[ordered.size() - 1 - (prob.fixed_noise ? 0 : 1)].center;
        std::vector<double> m2s;
        const std::size_t cap = std::min<std::size_t>(inputs.size(), 24);
        for (std::size_t i = 0; i < cap; ++i)
            for (std::size_t j = i + 1; j < cap; ++j)
                m2s.push_back(mmd2(std::get<Cloud>(inputs[i]), std::get<Cloud>(inputs[j]), probe));
        const double med = median_of(std::move(m2s), 1.0);
        ordered.insert(ordered.begin() + 1, Slot{1.0 / med, 0.01, 100.0, 1e-4 / med, 1e4 / med});
    }

    prob.slots = std::move(ordered);
    return prob;
}

} // namespace detail

/// Maximizes the log marginal likelihood over log-transformed positive
/// hyperparameters (amplitude, scales, lengthscale, noise variance) with
/// seeded multi-start Nelder-Mead; returns the best restart. Deterministic
/// given the seed.
inline FitResult optimize_hyperparams(std::span<const MeasureInput> inputs,
                                      const Eigen::VectorXd& y, KernelFamily family,
                                      const OptimizerConfig& config)
{
    if (inputs.empty() || static_cast<Eigen::Index>(inputs.size()) != y.size())
        throw std::invalid_argument("optimize_hyperparams: inputs and responses must match");
    if (config.restarts < 1)
        throw std::invalid_argument("optimize_hyperparams: need at least one restart");

    detail::HyperProblem prob = detail::make_problem(inputs, y, family, config);
    const int dim = prob.dim();

    Eigen::VectorXd lo(dim), hi(dim);
    for (int i = 0; i < dim; ++i) {
        lo(i) = std::log(prob.slots[static_cast<std::size_t>(i)].bound_lo);
        hi(i) = std::log(prob.slots[static_cast<std::size_t>(i)].bound_hi);
    }

    const Eigen::Index n = y.size();
    const double norm_const = 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
    auto negative_lml = [&](const Eigen::VectorXd& theta) {
        const Eigen::VectorXd clamped = theta.cwiseMax(lo).cwiseMin(hi);
        const double out_of_bounds = (theta - clamped).squaredNorm();
        double noise = 0.0;
        const KernelSpec spec = prob.unpack(clamped, noise);
        Eigen::MatrixXd a = prob.build_gram(spec);
        a.diagonal().array() += noise;
        const Eigen::LLT<Eigen::MatrixXd> llt(a);
        if (llt.info() != Eigen::Success)
            return 1e300;
        double log_det_half = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
            log_det_half += std::log(llt.matrixL()(i, i));
        const double lml = -0.5 * y.dot(llt.solve(y)) - log_det_half - norm_const;
        if (!std::isfinite(lml))
            return 1e300;
        return -lml + 1e3 * out_of_bounds;
    };

    NelderMeadOptions nm;
    nm.max_iterations = config.max_iterations;
    nm.tolerance = config.tolerance;
    nm.initial_step = config.initial_step;

    NelderMeadResult best;
    bool any_finite = false;
    for (int restart = 0; restart < config.restarts; ++restart) {
        Eigen::VectorXd start(dim);
        RandomStream stream(config.seed, "hyperopt", static_cast<std::uint64_t>(restart), "init");
        for (int i = 0; i < dim; ++i) {
            const detail::Slot& slot = prob.slots[static_cast<std::size_t>(i)];
            const double factor =
                (restart == 0) ? 1.0
                               : std::exp(stream.uniform(std::log(slot.init_lo), std::log(slot.init_hi)));
            start(i) = std::log(slot.center * factor);
        }
        start = start.cwiseMax(lo).cwiseMin(hi);

        NelderMeadResult r = nelder_mead(negative_lml, start, nm);
        if (r.value < best.value || !any_finite) {
            if (r.value < 1e300) {
                best = std::move(r);
                any_finite = true;
            } else if (!any_finite) {
                best = std::move(r);
            }
        }
    }
    if (!any_finite)
        throw std::runtime_error(
            "optimize_hyperparams: no restart produced a finite objective (family " +
            std::string(family_name(family)) + ", " + std::to_string(config.restarts) +
            " restarts)");

    FitResult result;
    const Eigen::VectorXd theta = best.x.cwiseMax(lo).cwiseMin(hi);
    result.spec = prob.unpack(theta, result.noise_variance);
    result.log_marginal_likelihood = -best.value;
    return result;
}

} // namespace otgp
