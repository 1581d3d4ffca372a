#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "otgp/bounds.hpp"
#include "otgp/random.hpp"
#include "otgp/transport.hpp"

#include <cmath>
#include <limits>
#include <vector>

using namespace otgp;

namespace {

// A random class member: an ell-Lipschitz quantile discretized on a fine
// q-grid (midpoint values), staying inside [a, b].
Marginal1D random_lipschitz_member(RandomStream& stream, double a, double b, double ell,
                                   int cells = 64)
{
    const double h = 1.0 / cells;
    std::vector<double> values(static_cast<std::size_t>(cells));
    double v = stream.uniform(a, b);
    for (int c = 0; c < cells; ++c) {
        values[static_cast<std::size_t>(c)] = v;
        v = std::min(b, v + stream.uniform(0.0, ell * h)); // slope in [0, ell]
    }
    Marginal1D m;
    double acc = 0.0;
    for (int c = 0; c < cells; ++c) {
        acc += h;
        if (!m.values.empty() && m.values.back() == values[static_cast<std::size_t>(c)])
            m.cum_weights.back() = acc;
        else {
            m.values.push_back(values[static_cast<std::size_t>(c)]);
            m.cum_weights.push_back(acc);
        }
    }
    m.cum_weights.back() = 1.0;
    return m;
}

KernelSpec wgp1_spec(double amplitude, double rate)
{
    KernelSpec s;
    s.family = KernelFamily::WGP;
    s.amplitude = amplitude;
    s.scales = {rate};
    s.p = 1.0;
    return s;
}

} // namespace

TEST_CASE("normal cdf and quantile against the libm oracle")
{
    for (double x = -8.0; x <= 8.0; x += 0.173) {
        const double oracle = 0.5 * std::erfc(-x / std::sqrt(2.0));
        CHECK(normal_cdf(x) == doctest::Approx(oracle).epsilon(1e-13));
    }
    CHECK(normal_sf(6.0) == doctest::Approx(std::erfc(6.0 / std::sqrt(2.0)) / 2.0).epsilon(1e-12));

    CHECK(normal_quantile_upper(0.025) == doctest::Approx(1.959963984540054).epsilon(1e-11));
    CHECK(normal_quantile(0.5) == 0.0);
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-11));
    CHECK(normal_quantile(0.025) == doctest::Approx(-1.959963984540054).epsilon(1e-11));

    // Round trips, including far tails.
    for (double tail : {0.25, 0.05, 1e-3, 1e-6, 1e-9, 1e-12}) {
        const double z = normal_quantile_upper(tail);
        CHECK(normal_sf(z) == doctest::Approx(tail).epsilon(1e-10));
    }
    CHECK_THROWS_AS(normal_quantile(0.0), std::invalid_argument);
    CHECK_THROWS_AS(normal_quantile(1.0), std::invalid_argument);
}

TEST_CASE("quantile_net degeneracies and growth")
{
    const MeasureClassSpec cls{0.0, 1.0, 1.0, 0.0, 0.0};

    const QuantileNet whole = quantile_net(cls, 2.0);
    CHECK(whole.size == 1);
    REQUIRE(whole.members.size() == 1);
    CHECK(whole.members[0].values[0] == doctest::Approx(0.5));

    std::uint64_t prev = 0;
    for (double tau : {1.0, 0.5, 0.3, 0.2}) {
        const QuantileNet net = quantile_net(cls, tau);
        CHECK(net.size >= prev);
        CHECK(net.members.size() == net.size);
        prev = net.size;
    }
    CHECK_THROWS_AS(quantile_net(cls, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(quantile_net(cls, 1e-4), std::runtime_error); // member cap
}

TEST_CASE("quantile_net members are valid and sound")
{
    const MeasureClassSpec cls{0.0, 1.0, 1.0, 0.0, 0.0};
    const double tau = 0.4;
    const QuantileNet net = quantile_net(cls, tau);

    for (const Marginal1D& m : net.members) {
        for (std::size_t i = 1; i < m.size(); ++i) {
            CHECK(m.values[i] > m.values[i - 1]);
            CHECK(m.cum_weights[i] > m.cum_weights[i - 1]);
        }
        CHECK(m.cum_weights.back() == 1.0);
    }

    // Every Lipschitz-quantile member is within tau of some net point.
    RandomStream stream(3, "bounds", 0, "net");
    for (int rep = 0; rep < 100; ++rep) {
        const Marginal1D member = random_lipschitz_member(stream, 0.0, 1.0, 1.0);
        double best = std::numeric_limits<double>::infinity();
        for (const Marginal1D& candidate : net.members)
            best = std::min(best, wp_1d(member, candidate, 1.0));
        CHECK(best <= tau + 1e-12);
    }
}

TEST_CASE("kernel_lipschitz_w1")
{
    CHECK(kernel_lipschitz_w1(wgp1_spec(2.0, 3.0)) == 6.0);
    CHECK(kernel_lipschitz_w1(wgp1_spec(1.0, 0.0)) == 0.0);

    KernelSpec p2 = wgp1_spec(1.0, 1.0);
    p2.p = 2.0;
    CHECK_THROWS_AS(kernel_lipschitz_w1(p2), std::invalid_argument);
    KernelSpec rbf;
    rbf.family = KernelFamily::RBF;
    CHECK_THROWS_AS(kernel_lipschitz_w1(rbf), std::invalid_argument);

    // Sampled supremum never exceeds the bound.
    RandomStream stream(5, "bounds", 1, "lip");
    const KernelSpec spec = wgp1_spec(1.7, 2.3);
    const double l_k = kernel_lipschitz_w1(spec);
    for (int rep = 0; rep < 2000; ++rep) {
        const Marginal1D mu = random_lipschitz_member(stream, 0.0, 1.0, 1.0, 16);
        const Marginal1D mu2 = random_lipschitz_member(stream, 0.0, 1.0, 1.0, 16);
        const Marginal1D nu = random_lipschitz_member(stream, 0.0, 1.0, 1.0, 16);
        const double w = wp_1d(mu, mu2, 1.0);
        if (w < 1e-12)
            continue;
        const double ka = spec.amplitude * std::exp(-spec.scales[0] * wp_1d(mu, nu, 1.0));
        const double kb = spec.amplitude * std::exp(-spec.scales[0] * wp_1d(mu2, nu, 1.0));
        CHECK(std::abs(ka - kb) / w <= l_k + 1e-9);
    }
}

namespace {

struct FittedOnClass {
    GPModel model;
    std::vector<Marginal1D> train_members;
};

FittedOnClass fit_wgp_on_class(RandomStream& stream, int n, const KernelSpec& spec, double noise)
{
    std::vector<Marginal1D> members;
    std::vector<MeasureInput> inputs;
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        const Marginal1D m = random_lipschitz_member(stream, 0.0, 1.0, 1.0, 24);
        members.push_back(m);
        Eigen::MatrixXd pts(static_cast<Eigen::Index>(m.size()), 1);
        // Rebuild a weighted cloud carrying exactly this marginal.
        Eigen::VectorXd w(static_cast<Eigen::Index>(m.size()));
        double prev = 0.0;
        for (std::size_t k = 0; k < m.size(); ++k) {
            pts(static_cast<Eigen::Index>(k), 0) = m.values[k];
            w(static_cast<Eigen::Index>(k)) = m.cum_weights[k] - prev;
            prev = m.cum_weights[k];
        }
        inputs.emplace_back(from_samples(pts, w));
        y(i) = std::sin(3.0 * m.values.front()) + 0.1 * stream.normal();
    }
    return {fit(std::move(inputs), y, spec, noise), std::move(members)};
}

} // namespace

TEST_CASE("posterior lipschitz constants hold empirically")
{
    RandomStream stream(7, "bounds", 2, "post");
    const KernelSpec spec = wgp1_spec(1.0, 2.0);
    const double l_k = kernel_lipschitz_w1(spec);
    FittedOnClass fitted = fit_wgp_on_class(stream, 10, spec, 0.05);
    const GPModel& model = fitted.model;

    const double l_nu = posterior_mean_lipschitz(model, l_k);
    CHECK(l_nu == doctest::Approx(10.0 * l_k * model.alpha.cwiseAbs().maxCoeff()));

    // y = 0 gives alpha = 0 and a zero constant.
    GPModel zero = fit(model.train_inputs, Eigen::VectorXd::Zero(10), spec, 0.05);
    CHECK(posterior_mean_lipschitz(zero, l_k) == 0.0);

    CHECK(sigma_modulus(model, l_k, 0.0) == 0.0);
    double prev_omega = 0.0;
    double prev_gap = std::numeric_limits<double>::infinity();
    for (double tau : {0.05, 0.1, 0.15, 0.2}) {
        const double omega = sigma_modulus(model, l_k, tau);
        CHECK(omega >= prev_omega);      // nondecreasing
        CHECK(omega - prev_omega < prev_gap + 1e-12); // concave increments
        prev_gap = omega - prev_omega;
        prev_omega = omega;
    }

    // Empirical Lipschitz/modulus checks over random pairs.
    for (int rep = 0; rep < 400; ++rep) {
        const Marginal1D a = random_lipschitz_member(stream, 0.0, 1.0, 1.0, 24);
        const Marginal1D b = random_lipschitz_member(stream, 0.0, 1.0, 1.0, 24);
        const double w = wp_1d(a, b, 1.0);

        auto to_input = [](const Marginal1D& m) {
            Eigen::MatrixXd pts(static_cast<Eigen::Index>(m.size()), 1);
            Eigen::VectorXd wts(static_cast<Eigen::Index>(m.size()));
            double prev = 0.0;
            for (std::size_t k = 0; k < m.size(); ++k) {
                pts(static_cast<Eigen::Index>(k), 0) = m.values[k];
                wts(static_cast<Eigen::Index>(k)) = m.cum_weights[k] - prev;
                prev = m.cum_weights[k];
            }
            return MeasureInput(from_samples(pts, wts));
        };
        const PredictiveSummary pa = predict(model, to_input(a));
        const PredictiveSummary pb = predict(model, to_input(b));
        CHECK(std::abs(pa.mean - pb.mean) <= l_nu * w + 1e-9);
        CHECK(std::abs(pa.sd() - pb.sd()) <= sigma_modulus(model, l_k, w) + 1e-9);
    }
}

TEST_CASE("band parameters")
{
    const BandCertificate cert = band(0.0, 0.05, 1, 0.0, 0.0, 0.0);
    CHECK(cert.beta == doctest::Approx(3.841458820694124).epsilon(1e-9));
    CHECK(cert.beta == doctest::Approx(3.84146).epsilon(1e-5));
    CHECK(cert.gamma == 0.0);

    double prev = 0.0;
    for (std::uint64_t m : {1ull, 2ull, 10ull, 1000ull}) {
        const double beta = band(0.1, 0.05, m, 0.0, 0.0, 0.0).beta;
        CHECK(beta >= prev);
        prev = beta;
    }

    const BandCertificate full = band(0.2, 0.1, 50, 1.5, 2.5, 0.3);
    const double root = std::sqrt(full.beta);
    CHECK(full.gamma == doctest::Approx((1.5 + 2.5) * 0.2 + root * 0.3).epsilon(1e-12));

    CHECK_THROWS_AS(band(0.1, 0.0, 1, 0, 0, 0), std::invalid_argument);
    CHECK_THROWS_AS(band(0.1, 1.0, 1, 0, 0, 0), std::invalid_argument);
    CHECK_THROWS_AS(band(0.1, 0.5, 0, 0, 0, 0), std::invalid_argument);
}

TEST_CASE("conservative_condition")
{
    BandCertificate cert;
    cert.beta = 1.0;
    cert.gamma = 0.0;
    CHECK(conservative_condition(2.0, cert, 0.0).conservative);

    cert.gamma = 0.5;
    CHECK_FALSE(conservative_condition(0.5, cert, 100.0).conservative); // z <= sqrt(beta)

    const ConservativeVerdict v = conservative_condition(2.0, cert, 0.6);
    CHECK(v.conservative);
    CHECK(v.margin == doctest::Approx(0.1).epsilon(1e-12));
    CHECK_FALSE(conservative_condition(2.0, cert, 0.4).conservative);

    // Enlarging z never flips a true verdict to false.
    for (double sigma_n : {0.0, 0.2, 0.5, 0.9}) {
        bool was = conservative_condition(1.5, cert, sigma_n).conservative;
        for (double z : {2.0, 3.0, 5.0}) {
            const bool now = conservative_condition(z, cert, sigma_n).conservative;
            if (was)
                CHECK(now);
            was = was || now;
        }
    }
}

TEST_CASE("pcpwa_metric is a metric")
{
    RandomStream stream(11, "bounds", 3, "pcpwa");
    ProjectionBasis basis;
    basis.directions = {Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1)};
    const std::vector<double> weights = {0.7, 1.4};

    auto random_cloud2 = [&stream](int n) {
        Eigen::MatrixXd pts(n, 2);
        for (int i = 0; i < n; ++i) {
            pts(i, 0) = stream.normal();
            pts(i, 1) = stream.normal();
        }
        return from_samples(pts);
    };

    const Cloud a = random_cloud2(5);
    CHECK(pcpwa_metric(a, a, basis, weights) == 0.0);

    ProjectionBasis single;
    single.directions = {Eigen::Vector2d(0, 1)};
    const std::vector<double> one = {1.0};
    const Cloud b = random_cloud2(4);
    CHECK(pcpwa_metric(a, b, single, one) ==
          doctest::Approx(wp_1d(marginal(a, 1), marginal(b, 1), 1.0)).epsilon(1e-13));

    for (int rep = 0; rep < 50; ++rep) {
        const Cloud x = random_cloud2(4);
        const Cloud y = random_cloud2(5);
        const Cloud z = random_cloud2(3);
        CHECK(pcpwa_metric(x, y, basis, weights) ==
              doctest::Approx(pcpwa_metric(y, x, basis, weights)).epsilon(1e-12));
        CHECK(pcpwa_metric(x, z, basis, weights) <=
              pcpwa_metric(x, y, basis, weights) + pcpwa_metric(y, z, basis, weights) + 1e-10);
    }

    const std::vector<double> negative = {1.0, -1.0};
    CHECK_THROWS_AS(pcpwa_metric(a, b, basis, negative), std::invalid_argument);
    CHECK_THROWS_AS(pcpwa_metric(a, b, basis, one), std::invalid_argument);
}

TEST_CASE("naive_coverage formula")
{
    const Eigen::VectorXd w0 = Eigen::VectorXd::Zero(2);
    const Eigen::MatrixXd sigma = Eigen::MatrixXd::Identity(2, 2);
    CHECK(naive_coverage(w0, sigma, 1.0, 0.1) == doctest::Approx(0.9).epsilon(1e-12));

    const Eigen::VectorXd w1 = Eigen::VectorXd::Constant(1, 1.0);
    const Eigen::MatrixXd s1 = Eigen::MatrixXd::Identity(1, 1);
    // Oracle value 2 Phi(z_{0.95}/sqrt(2)) - 1 computed with libm erfc and a
    // bisection inverse; a 1e6-draw simulation agrees to 0.002.
    CHECK(naive_coverage(w1, s1, 1.0, 0.1) == doctest::Approx(0.7552058563466).epsilon(1e-9));
    CHECK(std::abs(naive_coverage(w1, s1, 1.0, 0.1) - 0.755) < 0.002);

    // Strictly below nominal whenever the input noise is active, and
    // monotonically vanishing as it grows.
    double prev = 1.0;
    for (double scale : {0.1, 0.5, 1.0, 5.0, 50.0, 5000.0}) {
        const double cov = naive_coverage(w1, scale * s1, 1.0, 0.1);
        CHECK(cov < 0.9);
        CHECK(cov < prev);
        prev = cov;
    }
    CHECK(prev < 0.05);
}

TEST_CASE("deterministic net extension holds for synthetic Lipschitz targets")
{
    RandomStream stream(13, "bounds", 4, "thm");
    const KernelSpec spec = wgp1_spec(1.0, 1.5);
    const double noise = 0.01;
    const MeasureClassSpec cls{0.0, 1.0, 1.0, 0.0, 0.0};
    const double tau = 0.3;
    const QuantileNet net = quantile_net(cls, tau);

    // Synthetic 1-Lipschitz target: W1 distance to a reference member.
    const Marginal1D reference = random_lipschitz_member(stream, 0.0, 1.0, 1.0, 24);
    const double l_f = 1.0;

    std::vector<Marginal1D> train_members;
    std::vector<MeasureInput> inputs;
    Eigen::VectorXd y(12);
    auto to_input = [](const Marginal1D& m) {
        Eigen::MatrixXd pts(static_cast<Eigen::Index>(m.size()), 1);
        Eigen::VectorXd wts(static_cast<Eigen::Index>(m.size()));
        double prev = 0.0;
        for (std::size_t k = 0; k < m.size(); ++k) {
            pts(static_cast<Eigen::Index>(k), 0) = m.values[k];
            wts(static_cast<Eigen::Index>(k)) = m.cum_weights[k] - prev;
            prev = m.cum_weights[k];
        }
        return MeasureInput(from_samples(pts, wts));
    };
    for (int i = 0; i < 12; ++i) {
        const Marginal1D m = random_lipschitz_member(stream, 0.0, 1.0, 1.0, 24);
        train_members.push_back(m);
        inputs.push_back(to_input(m));
        y(i) = wp_1d(m, reference, 1.0);
    }
    const GPModel model = fit(inputs, y, spec, noise);

    const double l_k = kernel_lipschitz_w1(spec);
    const double l_nu = posterior_mean_lipschitz(model, l_k);
    const double omega = sigma_modulus(model, l_k, tau);

    // B chosen so the finite-net inequalities hold by construction.
    double b = 0.0;
    std::vector<PredictiveSummary> net_preds;
    for (const Marginal1D& m : net.members)
        net_preds.push_back(predict(model, to_input(m)));
    for (std::size_t j = 0; j < net.members.size(); ++j) {
        const double gap = std::abs(wp_1d(net.members[j], reference, 1.0) - net_preds[j].mean);
        const double sd = net_preds[j].sd();
        if (sd > 1e-12)
            b = std::max(b, gap / sd);
    }
    b += 1e-9;
    for (std::size_t j = 0; j < net.members.size(); ++j)
        CHECK(std::abs(wp_1d(net.members[j], reference, 1.0) - net_preds[j].mean) <=
              b * net_preds[j].sd() + 1e-9);

    // The extension inequality then holds for every class member.
    for (int rep = 0; rep < 200; ++rep) {
        const Marginal1D m = random_lipschitz_member(stream, 0.0, 1.0, 1.0, 24);
        const PredictiveSummary p = predict(model, to_input(m));
        const double truth = wp_1d(m, reference, 1.0);
        CHECK(std::abs(truth - p.mean) <=
              b * p.sd() + (l_f + l_nu) * tau + b * omega + 1e-8);
    }
}
