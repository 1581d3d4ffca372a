#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "otgp/random.hpp"
#include "otgp/transport.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

using namespace otgp;

namespace {

// Independent oracle: minimum over all n! assignment permutations.
double wp_bruteforce(const Cloud& a, const Cloud& b, double p)
{
    const int n = static_cast<int>(a.size());
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double total = 0.0;
        for (int i = 0; i < n; ++i)
            total += std::pow((a.points.row(i) - b.points.row(perm[static_cast<std::size_t>(i)])).norm(), p);
        best = std::min(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return std::pow(best / n, 1.0 / p);
}

Cloud uniform_cloud(RandomStream& stream, int n, int d, double spread = 1.0)
{
    Eigen::MatrixXd pts(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j)
            pts(i, j) = spread * stream.normal();
    return from_samples(pts);
}

Cloud cloud1d(std::initializer_list<double> xs)
{
    Eigen::MatrixXd pts(static_cast<Eigen::Index>(xs.size()), 1);
    Eigen::Index i = 0;
    for (double x : xs)
        pts(i++, 0) = x;
    return from_samples(pts);
}

GaussianSummary gauss1d(double mean, double var)
{
    GaussianSummary g;
    g.mean = Eigen::VectorXd::Constant(1, mean);
    g.covariance = Eigen::MatrixXd::Constant(1, 1, var);
    return g;
}

} // namespace

TEST_CASE("wp_1d point masses")
{
    const Marginal1D a = marginal(cloud1d({0.0}), 0);
    const Marginal1D b = marginal(cloud1d({-2.5}), 0);
    for (double p : {1.0, 1.5, 2.0, 3.0})
        CHECK(wp_1d(a, b, p) == doctest::Approx(2.5).epsilon(1e-14));
}

TEST_CASE("wp_1d hand examples against brute force")
{
    const Cloud a = cloud1d({1, 2, 3});
    const Cloud b = cloud1d({2, 3, 4});
    CHECK(wp_1d(marginal(a, 0), marginal(b, 0), 1.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(wp_bruteforce(a, b, 1.0) == doctest::Approx(1.0).epsilon(1e-12));

    const Cloud c = cloud1d({0, 0});
    const Cloud d = cloud1d({0, 1});
    const double expected = std::sqrt(0.5);
    CHECK(wp_1d(marginal(c, 0), marginal(d, 0), 2.0) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(wp_bruteforce(c, d, 2.0) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("wp_1d rejects p below 1")
{
    const Marginal1D m = marginal(cloud1d({0.0, 1.0}), 0);
    CHECK_THROWS_AS(wp_1d(m, m, 0.5), std::invalid_argument);
}

TEST_CASE("wp_1d equals the assignment oracle on random uniform pairs")
{
    RandomStream stream(3, "transport", 0, "oracle");
    for (int rep = 0; rep < 60; ++rep) {
        const int n = 2 + static_cast<int>(stream.next_u64() % 5);
        const Cloud a = uniform_cloud(stream, n, 1);
        const Cloud b = uniform_cloud(stream, n, 1);
        for (double p : {1.0, 2.0}) {
            const double closed = wp_1d(marginal(a, 0), marginal(b, 0), p);
            CHECK(closed == doctest::Approx(wp_bruteforce(a, b, p)).epsilon(1e-10));
            CHECK(closed ==
                  doctest::Approx(wp_cloud_exact(a, b, p)).epsilon(1e-10));
        }
    }
}

TEST_CASE("wp_1d metric axioms on random triples")
{
    RandomStream stream(5, "transport", 1, "metric");
    for (int rep = 0; rep < 100; ++rep) {
        const Marginal1D a = marginal(uniform_cloud(stream, 5, 1), 0);
        const Marginal1D b = marginal(uniform_cloud(stream, 4, 1), 0);
        const Marginal1D c = marginal(uniform_cloud(stream, 6, 1), 0);
        for (double p : {1.0, 2.0}) {
            CHECK(wp_1d(a, b, p) == wp_1d(b, a, p));
            CHECK(wp_1d(a, a, p) == 0.0);
            CHECK(wp_1d(a, c, p) <= wp_1d(a, b, p) + wp_1d(b, c, p) + 1e-10);
        }
    }
}

TEST_CASE("w2_gaussian closed form")
{
    const GaussianSummary a = gauss1d(0.0, 1.0);
    CHECK(w2_gaussian(a, a) == 0.0);

    // Equal covariances reduce to the mean distance.
    GaussianSummary b = gauss1d(3.0, 1.0);
    CHECK(w2_gaussian(a, b) == doctest::Approx(3.0).epsilon(1e-12));

    // N(0,1) vs N(0,4): trace term 1 + 4 - 2*2 = 1.
    CHECK(w2_gaussian(a, gauss1d(0.0, 4.0)) == doctest::Approx(1.0).epsilon(1e-10));

    GaussianSummary bad = gauss1d(0.0, -1.0);
    CHECK_THROWS_AS(w2_gaussian(a, bad), std::invalid_argument);
}

TEST_CASE("w2_gaussian matches empirical 1D quantile distance")
{
    RandomStream stream(7, "transport", 2, "empirical");
    const int n = 20000;
    Eigen::MatrixXd xs(n, 1), ys(n, 1);
    for (int i = 0; i < n; ++i) {
        xs(i, 0) = 1.0 + 0.5 * stream.normal();
        ys(i, 0) = -1.0 + 2.0 * stream.normal();
    }
    const double empirical =
        wp_1d(marginal(from_samples(xs), 0), marginal(from_samples(ys), 0), 2.0);
    const double closed = w2_gaussian(gauss1d(1.0, 0.25), gauss1d(-1.0, 4.0));
    CHECK(std::abs(empirical - closed) / closed < 0.02);
}

TEST_CASE("wp_cloud_exact basics")
{
    const Cloud x = from_samples(Eigen::MatrixXd::Constant(1, 2, 0.0));
    Eigen::MatrixXd ypt(1, 2);
    ypt << 3.0, 4.0;
    CHECK(wp_cloud_exact(x, from_samples(ypt), 2.0) == doctest::Approx(5.0).epsilon(1e-12));

    Eigen::MatrixXd a(2, 2), b(2, 2);
    a << 0, 0, 1, 0;
    b << 1, 0, 0, 0;
    CHECK(wp_cloud_exact(from_samples(a), from_samples(b), 2.0) == 0.0);
}

TEST_CASE("wp_cloud_exact equals permutation enumeration")
{
    RandomStream stream(11, "transport", 3, "assign");
    for (int rep = 0; rep < 40; ++rep) {
        const int n = 2 + static_cast<int>(stream.next_u64() % 4);
        const Cloud a = uniform_cloud(stream, n, 2);
        const Cloud b = uniform_cloud(stream, n, 2);
        for (double p : {1.0, 2.0})
            CHECK(wp_cloud_exact(a, b, p) ==
                  doctest::Approx(wp_bruteforce(a, b, p)).epsilon(1e-10));
    }
}

TEST_CASE("wp_cloud_exact is permutation invariant")
{
    RandomStream stream(13, "transport", 4, "perm");
    const Cloud a = uniform_cloud(stream, 6, 2);
    const Cloud b = uniform_cloud(stream, 6, 2);
    Eigen::MatrixXd shuffled = a.points;
    shuffled.row(0).swap(shuffled.row(4));
    shuffled.row(2).swap(shuffled.row(5));
    const double base = wp_cloud_exact(a, b, 2.0);
    CHECK(wp_cloud_exact(from_samples(shuffled), b, 2.0) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("wp_cloud_exact unsupported shapes")
{
    const Cloud a = cloud1d({0, 1});
    const Cloud b = cloud1d({0, 1, 2});
    CHECK_THROWS_AS(wp_cloud_exact(a, b, 1.0), std::invalid_argument);

    Eigen::MatrixXd pts(2, 1);
    pts << 0, 1;
    const Cloud weighted = from_samples(pts, Eigen::Vector2d(0.3, 0.7));
    CHECK_THROWS_AS(wp_cloud_exact(weighted, weighted, 1.0), std::invalid_argument);

    RandomStream stream(17, "transport", 5, "cap");
    const Cloud big = uniform_cloud(stream, 10, 1);
    CHECK_THROWS_AS(wp_cloud_exact(big, big, 1.0, 8), std::runtime_error);
}

TEST_CASE("sliced_wp composition and reflection invariance")
{
    RandomStream stream(19, "transport", 6, "sliced");
    const Cloud a = uniform_cloud(stream, 7, 2);
    const Cloud b = uniform_cloud(stream, 5, 2);
    CHECK(sliced_wp(a, a, ProjectionBasis{{Eigen::Vector2d(1, 0)}}, 2.0) == 0.0);

    // Canonical axes: power mean of the coordinate marginal distances.
    ProjectionBasis axes;
    axes.directions = {Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1)};
    const double w0 = wp_1d(marginal(a, 0), marginal(b, 0), 2.0);
    const double w1 = wp_1d(marginal(a, 1), marginal(b, 1), 2.0);
    const double expected = std::sqrt(0.5 * (w0 * w0 + w1 * w1));
    CHECK(sliced_wp(a, b, axes, 2.0) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(sliced_wp(a, b, axes, 2.0) <= std::max(w0, w1) + 1e-12);

    // d = 1 with the reflected direction equals the unprojected distance.
    const Cloud u = uniform_cloud(stream, 6, 1);
    const Cloud v = uniform_cloud(stream, 8, 1);
    ProjectionBasis reflect;
    reflect.directions = {Eigen::VectorXd::Constant(1, -1.0)};
    CHECK(sliced_wp(u, v, reflect, 1.0) ==
          doctest::Approx(wp_1d(marginal(u, 0), marginal(v, 0), 1.0)).epsilon(1e-12));

    CHECK_THROWS_AS(sliced_wp(u, b, reflect, 1.0), std::invalid_argument);
}

TEST_CASE("gw2_gaussian_bounds closed forms")
{
    GaussianSummary a;
    a.mean = Eigen::VectorXd::Zero(2);
    a.covariance = Eigen::Vector2d(2.0, 1.0).asDiagonal();
    const GWBounds same = gw2_gaussian_bounds(a, a);
    CHECK(same.lower == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(same.upper == doctest::Approx(0.0).epsilon(1e-12));

    // 1D spectra {4} vs {1}: every term collapses and both bounds are sqrt(108).
    const GWBounds hand = gw2_gaussian_bounds(gauss1d(0.0, 4.0), gauss1d(5.0, 1.0));
    CHECK(hand.lower == doctest::Approx(std::sqrt(108.0)).epsilon(1e-10));
    CHECK(hand.upper == doctest::Approx(std::sqrt(108.0)).epsilon(1e-10));

    GaussianSummary singular = gauss1d(0.0, 0.0);
    CHECK_THROWS_AS(gw2_gaussian_bounds(singular, gauss1d(0.0, 1.0)), std::invalid_argument);
}

TEST_CASE("gw2_gaussian_bounds ordering on random pairs")
{
    RandomStream stream(23, "transport", 7, "gw");
    for (int rep = 0; rep < 300; ++rep) {
        const int m = 1 + static_cast<int>(stream.next_u64() % 3);
        const int d = 1 + static_cast<int>(stream.next_u64() % static_cast<unsigned>(m));
        Eigen::MatrixXd ra(m, m), rb(d, d);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j)
                ra(i, j) = stream.normal();
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                rb(i, j) = stream.normal();
        GaussianSummary a, b;
        a.mean = Eigen::VectorXd::Zero(m);
        a.covariance = ra * ra.transpose() + 0.1 * Eigen::MatrixXd::Identity(m, m);
        b.mean = Eigen::VectorXd::Zero(d);
        b.covariance = rb * rb.transpose();
        const GWBounds gw = gw2_gaussian_bounds(a, b);
        CHECK(gw.lower >= 0.0);
        CHECK(gw.lower <= gw.upper + 1e-10);
    }
}
