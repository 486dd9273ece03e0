#include <catch2/catch_amalgamated.hpp>

#include "lbl/gaussian.hpp"
#include "support.hpp"

using namespace lbl;

TEST_CASE("diag gaussian construction invariants") {
    CHECK_THROWS(DiagGaussian({}, {}));
    CHECK_THROWS(DiagGaussian({0.0}, {0.0, 0.0}));
    DiagGaussian g({0.0, 0.0}, {-25.0, 25.0});
    CHECK(g.log_var[0] == kLogVarMin);
    CHECK(g.log_var[1] == kLogVarMax);
}

TEST_CASE("gaussian nll at the mode of a standard normal") {
    DiagGaussian g = DiagGaussian::standard(1);
    CHECK(gaussian_nll(g, {0.0}) == Catch::Approx(0.9189385).epsilon(1e-6));

    DiagGaussian g3({0.3, -1.0, 2.0}, {0.0, 0.0, 0.0});
    CHECK(gaussian_nll(g3, {0.3, -1.0, 2.0}) == Catch::Approx(3 * 0.91893853).epsilon(1e-6));

    CHECK_THROWS(gaussian_nll(g3, {0.0}));
}

TEST_CASE("gaussian nll agrees with a pointwise density oracle") {
    DiagGaussian g({1.0, -1.0}, {std::log(0.5), std::log(2.0)});
    const Vec x = {0.0, 0.0};
    // oracle: evaluate the two univariate pdfs with exp, multiply, -log
    auto pdf = [](double v, double mu, double var) {
        return std::exp(-(v - mu) * (v - mu) / (2.0 * var)) / std::sqrt(2.0 * M_PI * var);
    };
    const double oracle = -std::log(pdf(0.0, 1.0, 0.5) * pdf(0.0, -1.0, 2.0));
    CHECK(gaussian_nll(g, x) == Catch::Approx(oracle).epsilon(1e-10));
}

TEST_CASE("kl to the standard normal") {
    CHECK(kl_to_standard(DiagGaussian::standard(5)) == Catch::Approx(0.0).margin(1e-15));
    CHECK(kl_to_standard(DiagGaussian({1.0}, {0.0})) == Catch::Approx(0.5).epsilon(1e-12));

    // derived value against a Monte-Carlo KL estimate
    DiagGaussian g({0.0}, {std::log(2.0)});
    const double analytic = kl_to_standard(g);
    CHECK(analytic == Catch::Approx(0.5 * (2.0 - std::log(2.0) - 1.0)).epsilon(1e-12));

    Rng rng(123);
    const std::size_t n = 1000000;
    double sum = 0.0, sum2 = 0.0;
    const DiagGaussian ref = DiagGaussian::standard(1);
    for (std::size_t i = 0; i < n; ++i) {
        Vec z = sample(g, rng);
        const double t = gaussian_nll(ref, z) - gaussian_nll(g, z);
        sum += t;
        sum2 += t * t;
    }
    const double mc = sum / n;
    const double se = std::sqrt((sum2 / n - mc * mc) / n);
    CHECK(std::abs(mc - analytic) < 3.0 * se);
}

TEST_CASE("kl between diagonal gaussians") {
    Rng rng(9);
    Vec mu1(4), lv1(4), mu2(4), lv2(4);
    for (int i = 0; i < 4; ++i) {
        mu1[i] = rng.normal();
        lv1[i] = 0.5 * rng.normal();
        mu2[i] = rng.normal();
        lv2[i] = 0.5 * rng.normal();
    }
    DiagGaussian g1(mu1, lv1), g2(mu2, lv2);

    CHECK(kl_diag(g1, g1) == Catch::Approx(0.0).margin(1e-14));
    CHECK(kl_diag(g1, DiagGaussian::standard(4)) ==
          Catch::Approx(kl_to_standard(g1)).epsilon(1e-12));
    CHECK_THROWS(kl_diag(g1, DiagGaussian::standard(3)));

    // Monte-Carlo oracle
    const double analytic = kl_diag(g1, g2);
    CHECK(analytic >= 0.0);
    const std::size_t n = 500000;
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        Vec z = sample(g1, rng);
        const double t = gaussian_nll(g2, z) - gaussian_nll(g1, z);
        sum += t;
        sum2 += t * t;
    }
    const double mc = sum / n;
    const double se = std::sqrt((sum2 / n - mc * mc) / n);
    CHECK(std::abs(mc - analytic) < 3.0 * se);
}

TEST_CASE("poe fusion closed forms") {
    DiagGaussian a({0.0}, {0.0}), b({2.0}, {0.0});
    DiagGaussian f = poe_fuse(a, b);
    CHECK(f.mean[0] == Catch::Approx(1.0).epsilon(1e-12));
    CHECK(std::exp(f.log_var[0]) == Catch::Approx(0.5).epsilon(1e-12));

    // near-flat prior leaves the informative expert unchanged
    DiagGaussian g({0.7, -0.3}, {std::log(0.2), std::log(1.7)});
    DiagGaussian flat({5.0, -5.0}, {10.0, 10.0});
    DiagGaussian r = poe_fuse(g, flat);
    for (int i = 0; i < 2; ++i) {
        CHECK(std::abs(r.mean[i] - g.mean[i]) < 1e-3);
        CHECK(std::abs(std::exp(r.log_var[i]) - std::exp(g.log_var[i])) < 1e-3);
    }
}

TEST_CASE("poe fusion matches the grid-product oracle") {
    Rng rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        DiagGaussian g1({rng.normal()}, {0.8 * rng.normal()});
        DiagGaussian g2({rng.normal()}, {0.8 * rng.normal()});
        DiagGaussian fused = poe_fuse(g1, g2);

        // pointwise multiply the densities on a fine grid spanning both
        const double s1 = std::exp(0.5 * g1.log_var[0]), s2 = std::exp(0.5 * g2.log_var[0]);
        const double lo = std::min(g1.mean[0] - 6 * s1, g2.mean[0] - 6 * s2);
        const double hi = std::max(g1.mean[0] + 6 * s1, g2.mean[0] + 6 * s2);
        const std::size_t n = 200001;
        const double dx = (hi - lo) / (n - 1);
        double mass = 0.0, m1 = 0.0, m2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double x = lo + dx * i;
            const double p =
                std::exp(-gaussian_nll(g1, {x})) * std::exp(-gaussian_nll(g2, {x}));
            mass += p;
            m1 += p * x;
            m2 += p * x * x;
        }
        m1 /= mass;
        m2 /= mass;
        CHECK(std::abs(fused.mean[0] - m1) < 1e-4);
        CHECK(std::abs(std::exp(fused.log_var[0]) - (m2 - m1 * m1)) < 1e-4);
    }
}

TEST_CASE("1-d poe equals the kalman measurement update exactly") {
    Rng rng(77);
    for (int trial = 0; trial < 20; ++trial) {
        const double mu_prior = rng.normal(), p = std::exp(0.6 * rng.normal());
        const double y = rng.normal(), r = std::exp(0.6 * rng.normal());
        DiagGaussian fused =
            poe_fuse(DiagGaussian({mu_prior}, {std::log(p)}), DiagGaussian({y}, {std::log(r)}));
        const double k = p / (p + r);
        const double mu_post = mu_prior + k * (y - mu_prior);
        const double p_post = (1.0 - k) * p;
        CHECK(std::abs(fused.mean[0] - mu_post) < 1e-12);
        CHECK(std::abs(std::exp(fused.log_var[0]) - p_post) < 1e-12);
    }
}

TEST_CASE("poe fusion is commutative and associative") {
    Rng rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        Vec mu(3), lv(3);
        auto rand_g = [&]() {
            for (int i = 0; i < 3; ++i) {
                mu[i] = rng.normal();
                lv[i] = rng.normal();
            }
            return DiagGaussian(mu, lv);
        };
        DiagGaussian a = rand_g(), b = rand_g(), c = rand_g();
        DiagGaussian ab = poe_fuse(a, b), ba = poe_fuse(b, a);
        for (int i = 0; i < 3; ++i) {
            CHECK(std::abs(ab.mean[i] - ba.mean[i]) < 1e-10);
            CHECK(std::abs(ab.log_var[i] - ba.log_var[i]) < 1e-10);
        }
        DiagGaussian left = poe_fuse(poe_fuse(a, b), c);
        DiagGaussian right = poe_fuse(a, poe_fuse(b, c));
        for (int i = 0; i < 3; ++i) {
            CHECK(std::abs(left.mean[i] - right.mean[i]) < 1e-10);
            CHECK(std::abs(left.log_var[i] - right.log_var[i]) < 1e-10);
        }
    }
}

TEST_CASE("kl_to_standard vanishes only at the standard normal") {
    Rng rng(17);
    CHECK(kl_to_standard(DiagGaussian::standard(3)) < 1e-12);
    for (int trial = 0; trial < 50; ++trial) {
        Vec mu(3, 0.0), lv(3, 0.0);
        mu[static_cast<std::size_t>(rng.next_u64() % 3)] = 0.3 + rng.uniform();
        DiagGaussian g(mu, lv);
        CHECK(kl_to_standard(g) > 1e-12);
        Vec mu2(3, 0.0), lv2(3, 0.0);
        lv2[static_cast<std::size_t>(rng.next_u64() % 3)] = 0.3 + rng.uniform();
        CHECK(kl_to_standard(DiagGaussian(mu2, lv2)) > 1e-12);
    }
}

TEST_CASE("sampling: determinism, clamp floor, law of large numbers") {
    DiagGaussian tight({3.0, -2.0}, {-10.0, -10.0});
    Rng rng(5);
    for (int i = 0; i < 1000; ++i) {
        Vec z = sample(tight, rng);
        CHECK(std::abs(z[0] - 3.0) < 0.04);
        CHECK(std::abs(z[1] + 2.0) < 0.04);
    }

    Rng r1(99), r2(99);
    DiagGaussian g({0.5}, {0.3});
    for (int i = 0; i < 10; ++i) {
        CHECK(sample(g, r1)[0] == sample(g, r2)[0]);
    }

    // empirical mean within 4 standard errors
    Rng r3(7);
    const std::size_t n = 100000;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += sample(g, r3)[0];
    const double se = std::exp(0.5 * 0.3) / std::sqrt(static_cast<double>(n));
    CHECK(std::abs(acc / n - 0.5) < 4.0 * se);
}

TEST_CASE("expected quadratic cost") {
    Rng rng(21);
    // near-deterministic limit
    DiagGaussian tight({1.0, 2.0}, {-10.0, -10.0});
    Matrix q = Matrix::identity(2);
    const Vec z_star = {0.0, 0.0};
    CHECK(expected_quadratic_cost(tight, q, z_star) == Catch::Approx(5.0).margin(1e-3));

    // pure trace term: mu = z*, Q = I, var = c
    const double c = 0.7;
    DiagGaussian g({0.3, 0.3, 0.3}, Vec(3, std::log(c)));
    CHECK(expected_quadratic_cost(g, Matrix::identity(3), {0.3, 0.3, 0.3}) ==
          Catch::Approx(3.0 * c).epsilon(1e-12));

    CHECK_THROWS(expected_quadratic_cost(g, Matrix::identity(2), {0.3, 0.3, 0.3}));

    // Monte-Carlo oracle on a random instance
    Vec mu(3), lv(3), zs(3);
    for (int i = 0; i < 3; ++i) {
        mu[i] = rng.normal();
        lv[i] = 0.5 * rng.normal();
        zs[i] = rng.normal();
    }
    DiagGaussian gr(mu, lv);
    Matrix qr = testutil::random_spd(3, rng);
    const double analytic = expected_quadratic_cost(gr, qr, zs);
    const std::size_t n = 1000000;
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        Vec z = sample(gr, rng);
        double v = 0.0;
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) v += (z[a] - zs[a]) * qr(a, b) * (z[b] - zs[b]);
        sum += v;
        sum2 += v * v;
    }
    const double mc = sum / n;
    const double se = std::sqrt((sum2 / n - mc * mc) / n);
    CHECK(std::abs(mc - analytic) < 3.0 * se);
}

TEST_CASE("expected quadratic cost matches monte carlo over many instances") {
    Rng rng(33);
    for (int trial = 0; trial < 50; ++trial) {
        Vec mu(2), lv(2), zs(2);
        for (int i = 0; i < 2; ++i) {
            mu[i] = rng.normal();
            lv[i] = 0.5 * rng.normal();
            zs[i] = rng.normal();
        }
        DiagGaussian g(mu, lv);
        Matrix q = testutil::random_spd(2, rng);
        const double analytic = expected_quadratic_cost(g, q, zs);
        const std::size_t n = 20000;
        double sum = 0.0, sum2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            Vec z = sample(g, rng);
            double v = 0.0;
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b) v += (z[a] - zs[a]) * q(a, b) * (z[b] - zs[b]);
            sum += v;
            sum2 += v * v;
        }
        const double mc = sum / n;
        const double se = std::sqrt((sum2 / n - mc * mc) / n);
        CHECK(std::abs(mc - analytic) < 3.0 * se + 1e-12);
    }
}

TEST_CASE("nll of a near-dirac gaussian is minimal at its mean") {
    DiagGaussian g({0.4}, {kLogVarMin});
    const double at_mean = gaussian_nll(g, {0.4});
    for (double x = -2.0; x <= 2.0; x += 0.05) {
        if (std::abs(x - 0.4) < 1e-9) continue;
        CHECK(gaussian_nll(g, {x}) >= at_mean);
    }
}

TEST_CASE("gaussian mutual information closed forms") {
    // independent blocks
    Matrix block = Matrix::identity(4);
    block(0, 1) = block(1, 0) = 0.3;
    block(2, 3) = block(3, 2) = -0.2;
    CHECK(gaussian_mutual_information(block, 2, 2) == Catch::Approx(0.0).margin(1e-12));

    // bivariate with correlation 0.5
    Matrix rho = Matrix::identity(2);
    rho(0, 1) = rho(1, 0) = 0.5;
    const double mi = gaussian_mutual_information(rho, 1, 1);
    CHECK(mi == Catch::Approx(-0.5 * std::log(0.75)).epsilon(1e-10));
    CHECK(mi == Catch::Approx(0.14384).epsilon(1e-3));

    // numerical double-integration oracle for the same value
    const double s = 6.0;
    const std::size_t n = 400;
    const double h = 2.0 * s / n;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = -s + h * (i + 0.5);
        for (std::size_t j = 0; j < n; ++j) {
            const double y = -s + h * (j + 0.5);
            const double det = 0.75;
            const double quad = (x * x - 2 * 0.5 * x * y + y * y) / det;
            const double pj = std::exp(-0.5 * quad) / (2.0 * M_PI * std::sqrt(det));
            const double px = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
            const double py = std::exp(-0.5 * y * y) / std::sqrt(2.0 * M_PI);
            if (pj > 1e-300) acc += pj * std::log(pj / (px * py)) * h * h;
        }
    }
    CHECK(mi == Catch::Approx(acc).margin(1e-4));

    // degenerate covariance is rejected
    Matrix sing = Matrix::identity(2);
    sing(0, 1) = sing(1, 0) = 1.0 - 1e-15;
    CHECK_THROWS(gaussian_mutual_information(sing, 1, 1));
}

TEST_CASE("variational bound never exceeds analytic mi and is tight for the true conditional") {
    Rng rng(2024);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t d1 = 1 + rng.next_u64() % 3;
        const std::size_t d2 = 1 + rng.next_u64() % 3;
        Matrix joint = testutil::random_spd(d1 + d2, rng, 1.0);
        const double mi = gaussian_mutual_information(joint, d1, d2);

        testutil::GaussianConditional truth(joint, d1, d2);
        auto [bound, se] = testutil::mi_bound_mc(joint, d1, d2, truth, 40000, rng);
        CHECK(bound <= mi + 3.0 * se);
        CHECK(bound >= mi - 3.0 * se);

        // perturbed predictor: bound drops below MI by the KL gap
        testutil::GaussianConditional wrong = truth;
        for (double& v : wrong.gain.storage()) v += 0.25;
        for (double& v : wrong.offset) v += 0.3;
        auto [bound_w, se_w] = testutil::mi_bound_mc(joint, d1, d2, wrong, 40000, rng);
        CHECK(bound_w < mi + 3.0 * se_w);
        CHECK(bound_w < bound);
    }
}
