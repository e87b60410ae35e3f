#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "coopperc/core_math.hpp"
#include "coopperc/error.hpp"
#include "coopperc/fd_fit.hpp"
#include "coopperc/rng.hpp"
#include "support/synthetic.hpp"

using namespace coopperc;
using testsupport::fd_noise_free;
using testsupport::fd_noisy;

TEST_CASE("noise-free recovery across exponents") {
    for (double theta : {0.5, 1.0, kLn3, 2.0}) {
        auto obs = fd_noise_free(1000, theta, 80.0, 102.2, 5.0, 75.0, 17);

        ThetaFit profiled = fit_theta(obs, 80.0, VfPolicy::profile());
        CHECK(std::abs(profiled.theta_hat - theta) <= 1e-6);
        CHECK(profiled.r2 >= 1.0 - 1e-9);
        CHECK(profiled.rmse <= 1e-5);
        CHECK(profiled.v_f_used == doctest::Approx(102.2).epsilon(1e-7));
        CHECK(profiled.n_obs == 1000);

        ThetaFit given = fit_theta(obs, 80.0, VfPolicy::given(102.2));
        CHECK(std::abs(given.theta_hat - theta) <= 1e-6);
    }
}

TEST_CASE("greenshields data with exact v_f recovers theta = 1") {
    auto obs = fd_noise_free(500, 1.0, 80.0, 100.0, 2.0, 78.0, 3);
    ThetaFit fit = fit_theta(obs, 80.0, VfPolicy::given(100.0));
    CHECK(std::abs(fit.theta_hat - 1.0) <= 1e-6);
}

TEST_CASE("observations at or beyond jam density are rejected and counted") {
    auto obs = fd_noise_free(50, 1.0, 80.0, 100.0, 10.0, 70.0, 4);
    obs.push_back({80.0, 0.0, 1.0});
    obs.push_back({95.0, 0.0, 1.0});
    ThetaFit fit = fit_theta(obs, 80.0, VfPolicy::profile());
    CHECK(fit.n_obs == 50);
    CHECK(fit.n_rejected == 2);
}

TEST_CASE("fit errors") {
    auto few = fd_noise_free(5, 1.0, 80.0, 100.0, 10.0, 70.0, 5);
    CHECK_THROWS_AS(fit_theta(few, 80.0, VfPolicy::profile()), SampleError);

    std::vector<FDObservation> flat;
    for (int i = 0; i < 20; ++i) flat.push_back({40.0, 50.0 + i * 0.1, 1.0});
    CHECK_THROWS_AS(fit_theta(flat, 80.0, VfPolicy::profile()), NumericError);

    std::vector<FDObservation> constant_speed;
    for (int i = 0; i < 20; ++i) constant_speed.push_back({10.0 + i, 60.0, 1.0});
    CHECK_THROWS_AS(fit_theta(constant_speed, 80.0, VfPolicy::profile()), DomainError);

    std::vector<FDObservation> invalid = {{-1.0, 50.0, 1.0}};
    CHECK_THROWS_AS(fit_theta(invalid, 80.0, VfPolicy::profile()), DomainError);
}

TEST_CASE("noisy fit covers the generating exponent") {
    // Small-sample version of the coverage experiment; the acceptance suite
    // runs the full 100-seed protocol.
    int covered = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto obs = fd_noisy(20000, kLn3, 80.0, 102.2, 5.0, 60.0, 5.0, 100 + seed);
        ThetaFit fit = fit_theta(obs, 80.0, VfPolicy::profile());
        if (fit.ci_lo <= kLn3 && kLn3 <= fit.ci_hi) ++covered;
    }
    CHECK(covered >= 8);
}

TEST_CASE("bootstrap sigma agrees with the linearized sigma in scale") {
    auto obs = fd_noisy(3000, kLn3, 80.0, 102.2, 5.0, 60.0, 5.0, 57);
    ThetaFit fit = fit_theta(obs, 80.0, VfPolicy::profile());
    double bs = bootstrap_sigma(obs, 80.0, VfPolicy::profile(), 60, 99);
    CHECK(bs == doctest::Approx(fit.sigma).epsilon(0.35));
    CHECK_THROWS_AS(bootstrap_sigma(obs, 80.0, VfPolicy::profile(), 1, 99), DomainError);
}

TEST_CASE("metrics_at is consistent with fit_theta") {
    auto obs = fd_noisy(5000, kLn3, 80.0, 102.2, 5.0, 60.0, 5.0, 42);
    ThetaFit fit = fit_theta(obs, 80.0, VfPolicy::profile());
    FixedThetaMetrics at_hat = metrics_at(obs, fit.theta_hat, 80.0, VfPolicy::profile());
    CHECK(at_hat.r2 == doctest::Approx(fit.r2).epsilon(1e-14));
    CHECK(at_hat.rmse == doctest::Approx(fit.rmse).epsilon(1e-14));

    auto perfect = fd_noise_free(100, kLn3, 80.0, 102.2, 5.0, 75.0, 43);
    FixedThetaMetrics m = metrics_at(perfect, kLn3, 80.0, VfPolicy::given(102.2));
    CHECK(m.r2 >= 1.0 - 1e-12);
    CHECK(m.rmse <= 1e-8);
}

TEST_CASE("profiled v_f matches the closed-form solution at the optimum") {
    auto obs = fd_noisy(2000, 1.3, 90.0, 110.0, 5.0, 70.0, 4.0, 7);
    ThetaFit fit = fit_theta(obs, 90.0, VfPolicy::profile());

    double swvg = 0.0, swg2 = 0.0;
    for (const FDObservation& o : obs) {
        if (o.rho >= 90.0) continue;
        double g = 1.0 - std::pow(o.rho / 90.0, fit.theta_hat);
        swvg += o.weight * o.v * g;
        swg2 += o.weight * g * g;
    }
    CHECK(fit.v_f_used == doctest::Approx(swvg / swg2).epsilon(1e-10));
}

TEST_CASE("objective is locally optimal at theta_hat") {
    auto obs = fd_noisy(3000, kLn3, 80.0, 102.2, 5.0, 60.0, 5.0, 11);
    ThetaFit fit = fit_theta(obs, 80.0, VfPolicy::profile());

    auto rss_at = [&](double theta) {
        FixedThetaMetrics m = metrics_at(obs, theta, 80.0, VfPolicy::profile());
        double sum_w = 0.0;
        for (const FDObservation& o : obs) {
            if (o.rho < 80.0) sum_w += o.weight;
        }
        return m.rmse * m.rmse * sum_w;
    };
    double at_hat = rss_at(fit.theta_hat);
    for (double delta : {1e-6, 1e-4, 1e-2}) {
        CHECK(at_hat <= rss_at(fit.theta_hat + delta) + 1e-12 * at_hat);
        CHECK(at_hat <= rss_at(fit.theta_hat - delta) + 1e-12 * at_hat);
    }
}

TEST_CASE("analytic objective gradient matches central differences") {
    auto obs = fd_noisy(500, kLn3, 80.0, 102.2, 5.0, 60.0, 5.0, 13);
    const double v_f = 102.2;

    auto rss = [&](double theta) {
        double s = 0.0;
        for (const FDObservation& o : obs) {
            double r = o.v - v_f * (1.0 - std::pow(o.rho / 80.0, theta));
            s += o.weight * r * r;
        }
        return s;
    };
    auto grad = [&](double theta) {
        // d rss / d theta = sum w * 2 r * (-dm/dtheta), dm/dtheta = -v_f u^theta ln u
        double s = 0.0;
        for (const FDObservation& o : obs) {
            double u = o.rho / 80.0;
            double m = v_f * (1.0 - std::pow(u, theta));
            double dm = -v_f * std::pow(u, theta) * std::log(u);
            s += o.weight * 2.0 * (o.v - m) * -dm;
        }
        return s;
    };
    for (double theta : {0.7, 1.0, 1.5, 2.5}) {
        double h = 1e-6;
        double fd = (rss(theta + h) - rss(theta - h)) / (2.0 * h);
        CHECK(grad(theta) == doctest::Approx(fd).epsilon(1e-4));
    }
}

TEST_CASE("r2 and rmse are invariant under reordering and weight splitting") {
    auto obs = fd_noisy(400, 1.0, 80.0, 100.0, 5.0, 70.0, 3.0, 19);
    FixedThetaMetrics base = metrics_at(obs, 1.0, 80.0, VfPolicy::profile());

    auto reversed = obs;
    std::reverse(reversed.begin(), reversed.end());
    FixedThetaMetrics rev = metrics_at(reversed, 1.0, 80.0, VfPolicy::profile());
    CHECK(rev.r2 == doctest::Approx(base.r2).epsilon(1e-12));
    CHECK(rev.rmse == doctest::Approx(base.rmse).epsilon(1e-12));

    std::vector<FDObservation> split;
    for (const FDObservation& o : obs) {
        split.push_back({o.rho, o.v, o.weight / 2.0});
        split.push_back({o.rho, o.v, o.weight / 2.0});
    }
    FixedThetaMetrics dup = metrics_at(split, 1.0, 80.0, VfPolicy::profile());
    CHECK(dup.r2 == doctest::Approx(base.r2).epsilon(1e-12));
    CHECK(dup.rmse == doctest::Approx(base.rmse).epsilon(1e-12));
}

TEST_CASE("compare_models orders fixed exponents correctly") {
    auto ln3_data = fd_noise_free(800, kLn3, 80.0, 102.2, 5.0, 75.0, 23);
    ModelComparison cmp = compare_models(ln3_data, 80.0, VfPolicy::profile());
    CHECK(std::abs(cmp.delta_r2_best_ln3) <= 1e-9);
    CHECK(cmp.ln3.r2 > cmp.greenshields.r2);

    auto gs_data = fd_noisy(5000, 1.0, 80.0, 100.0, 5.0, 70.0, 2.0, 29);
    ModelComparison gs_cmp = compare_models(gs_data, 80.0, VfPolicy::profile());
    CHECK(gs_cmp.greenshields.r2 > gs_cmp.ln3.r2);
}

TEST_CASE("sensitivity table is sharpest at the true jam density") {
    auto obs = fd_noisy(20000, kLn3, 80.0, 102.2, 5.0, 60.0, 3.0, 31);
    std::vector<double> grid = {70.0, 80.0, 90.0, 100.0};
    auto rows = sensitivity_table(obs, grid, VfPolicy::profile());
    REQUIRE(rows.size() == 4);

    std::size_t best = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].deviation_sigmas < rows[best].deviation_sigmas) best = i;
    }
    CHECK(rows[best].rho_j == 80.0);
    for (const auto& row : rows) {
        CHECK(row.deviation_sigmas == doctest::Approx(std::abs(row.theta_hat - kLn3) / row.sigma));
    }

    auto single = sensitivity_table(obs, std::vector<double>{80.0}, VfPolicy::profile());
    CHECK(single.size() == 1);
}
