#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "ranknet/errors.hpp"
#include "ranknet/loss.hpp"
#include "oracles.hpp"

using namespace ranknet;

namespace {

LossConfig lupi_cfg(double lambda, double tau = 1.0) {
    return {LossVariant::lupi, lambda, tau};
}

// frozen high-precision references
constexpr double kLn2 = 0.69314718055994530942;
constexpr double kSoftplusMinus4 = 0.018149927917809740355;

} // namespace

TEST_CASE("bce closed forms") {
    const PairLossResult r = bce_pair_loss(0.0, 0.0, 1);
    CHECK(r.loss == doctest::Approx(kLn2).epsilon(1e-15));
    CHECK(r.grad_hx == doctest::Approx(-0.5).epsilon(1e-15));
    CHECK(r.grad_hxp == doctest::Approx(0.5).epsilon(1e-15));

    CHECK(bce_pair_loss(4.0, 0.0, 1).loss == doctest::Approx(kSoftplusMinus4).epsilon(1e-12));
}

TEST_CASE("bce label/argument swap symmetry") {
    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> dist(-20.0, 20.0);
    for (int k = 0; k < 200; ++k) {
        const double hx = dist(gen), hxp = dist(gen);
        CHECK(bce_pair_loss(hx, hxp, 1).loss == bce_pair_loss(hxp, hx, 0).loss);
    }
}

TEST_CASE("bce input validation") {
    CHECK_THROWS_AS(bce_pair_loss(0.0, 0.0, 2), InputError);
    CHECK_THROWS_AS(bce_pair_loss(std::nan(""), 0.0, 1), NumericError);
}

TEST_CASE("lupi: matched teacher scores collapse to lambda * bce") {
    const LossConfig cfg = lupi_cfg(0.7, 2.0);
    const PairLossResult r = lupi_pair_loss(3.0, -1.0, 1, 3.0, -1.0, cfg);
    const PairLossResult b = bce_pair_loss(3.0, -1.0, 1);
    CHECK(r.loss == 0.7 * b.loss);
}

TEST_CASE("lupi anchor scenario value") {
    // t=1, gz=8, gzp=4, lambda=0.5, tau=1, evaluated at (8, 4)
    const PairLossResult r = lupi_pair_loss(8.0, 4.0, 1, 8.0, 4.0, lupi_cfg(0.5));
    CHECK(r.loss == doctest::Approx(0.5 * kSoftplusMinus4).epsilon(1e-12));
}

TEST_CASE("lupi with lambda=1 is bit-equal to plain bce") {
    std::mt19937_64 gen(2);
    std::uniform_real_distribution<double> dist(-10.0, 10.0);
    const LossConfig cfg = lupi_cfg(1.0);
    for (int k = 0; k < 500; ++k) {
        const double hx = dist(gen), hxp = dist(gen), gz = dist(gen), gzp = dist(gen);
        const int t = k % 2;
        const PairLossResult a = lupi_pair_loss(hx, hxp, t, gz, gzp, cfg);
        const PairLossResult b = bce_pair_loss(hx, hxp, t);
        CHECK(a.loss == b.loss);
        CHECK(a.grad_hx == b.grad_hx);
        CHECK(a.grad_hxp == b.grad_hxp);
    }
}

TEST_CASE("lupi with lambda=0 keeps only the privileged terms") {
    const LossConfig cfg = lupi_cfg(0.0, 1.5);
    const PairLossResult r = lupi_pair_loss(2.0, 1.0, 1, 5.0, 1.0, cfg);
    const double expect = std::tanh(9.0 / 1.5); // only the hx residual is non-zero
    CHECK(r.loss == doctest::Approx(expect).epsilon(1e-15));
    CHECK(r.grad_hxp == 0.0);
}

TEST_CASE("loss gradients match central finite differences") {
    std::mt19937_64 gen(3);
    // scores in [-3,3]: central differences resolve the gradient to ~1e-7
    // relative here, so the 1e-6 check is meaningful
    std::uniform_real_distribution<double> score(-3.0, 3.0);
    std::uniform_real_distribution<double> lam(0.0, 1.0);
    std::uniform_real_distribution<double> tau(0.5, 3.0);
    const double step = 1e-6;
    for (int k = 0; k < 400; ++k) {
        double hx = score(gen), hxp = score(gen);
        const double gz = score(gen), gzp = score(gen);
        const int t = k % 2;
        const LossConfig cfg = (k % 3 == 0) ? LossConfig{LossVariant::plain, 1.0, 1.0}
                                            : lupi_cfg(lam(gen), tau(gen));
        const PairLossResult r = pair_loss(hx, hxp, t, gz, gzp, cfg);
        const double fd_hx = oracle::central_difference(
            [&] { return pair_loss(hx, hxp, t, gz, gzp, cfg).loss; }, hx, step);
        const double fd_hxp = oracle::central_difference(
            [&] { return pair_loss(hx, hxp, t, gz, gzp, cfg).loss; }, hxp, step);
        CHECK(oracle::relative_error(r.grad_hx, fd_hx, 5e-3) < 1e-6);
        CHECK(oracle::relative_error(r.grad_hxp, fd_hxp, 5e-3) < 1e-6);
    }
}

TEST_CASE("loss gradients hold on the wide domain at FD resolution") {
    std::mt19937_64 gen(30);
    std::uniform_real_distribution<double> score(-12.0, 12.0);
    std::uniform_real_distribution<double> lam(0.0, 1.0);
    std::uniform_real_distribution<double> tau(0.2, 3.0);
    for (int k = 0; k < 300; ++k) {
        double hx = score(gen), hxp = score(gen);
        const double gz = score(gen), gzp = score(gen);
        const int t = k % 2;
        const LossConfig cfg = (k % 3 == 0) ? LossConfig{LossVariant::plain, 1.0, 1.0}
                                            : lupi_cfg(lam(gen), tau(gen));
        const PairLossResult r = pair_loss(hx, hxp, t, gz, gzp, cfg);
        const double fd_hx = oracle::central_difference(
            [&] { return pair_loss(hx, hxp, t, gz, gzp, cfg).loss; }, hx, 1e-5);
        const double fd_hxp = oracle::central_difference(
            [&] { return pair_loss(hx, hxp, t, gz, gzp, cfg).loss; }, hxp, 1e-5);
        CHECK(oracle::relative_error(r.grad_hx, fd_hx, 1e-3) < 1e-4);
        CHECK(oracle::relative_error(r.grad_hxp, fd_hxp, 1e-3) < 1e-4);
    }
}

TEST_CASE("privileged terms stay in [0,1) and bound the total from below") {
    std::mt19937_64 gen(4);
    std::uniform_real_distribution<double> dist(-30.0, 30.0);
    for (int k = 0; k < 300; ++k) {
        const double hx = dist(gen), hxp = dist(gen), gz = dist(gen), gzp = dist(gen);
        const double lambda = 0.25;
        const LossConfig cfg = lupi_cfg(lambda, 0.7);
        const PairLossResult r = lupi_pair_loss(hx, hxp, 1, gz, gzp, cfg);
        const double bce = bce_pair_loss(hx, hxp, 1).loss;
        const double phi1 = std::tanh((hx - gz) * (hx - gz) / cfg.tau);
        const double phi2 = std::tanh((hxp - gzp) * (hxp - gzp) / cfg.tau);
        // each term lies in [0,1); saturation may round it to exactly 1.0
        CHECK(phi1 >= 0.0);
        CHECK(phi2 >= 0.0);
        CHECK(phi1 <= 1.0);
        CHECK(phi2 <= 1.0);
        if (std::fabs(hx - gz) < 2.0) CHECK(phi1 < 1.0);
        CHECK(r.loss == doctest::Approx(lambda * bce + (1.0 - lambda) * (phi1 + phi2))
                            .epsilon(1e-12));
        CHECK(r.loss >= lambda * bce - 1e-15);
    }
}

TEST_CASE("extreme score gaps stay finite") {
    for (const double gap : {500.0, -500.0}) {
        const PairLossResult p = bce_pair_loss(gap, 0.0, 1);
        CHECK(std::isfinite(p.loss));
        CHECK(std::isfinite(p.grad_hx));
        CHECK(p.loss >= 0.0);
        const PairLossResult l = lupi_pair_loss(gap, 0.0, 0, 1.0, -1.0, lupi_cfg(0.5));
        CHECK(std::isfinite(l.loss));
        CHECK(std::isfinite(l.grad_hx));
        CHECK(std::isfinite(l.grad_hxp));
    }
}

TEST_CASE("loss config validation") {
    CHECK_THROWS_AS(lupi_pair_loss(0, 0, 1, 0, 0, lupi_cfg(0.5, 0.0)), ConfigError);
    CHECK_THROWS_AS(lupi_pair_loss(0, 0, 1, 0, 0, lupi_cfg(0.5, -1.0)), ConfigError);
    CHECK_THROWS_AS(lupi_pair_loss(0, 0, 1, 0, 0, lupi_cfg(1.5)), ConfigError);
    CHECK_THROWS_AS(lupi_pair_loss(0, 0, 1, 0, 0, LossConfig{LossVariant::plain, 1.0, 1.0}),
                    ConfigError);
}

TEST_CASE("batch_risk mean semantics") {
    const LossConfig cfg = lupi_cfg(0.4);
    const PairTerm one{1.2, -0.3, 1, 2.0, -1.0};
    const BatchRisk single = batch_risk(std::vector<PairTerm>{one}, cfg);
    CHECK(single.mean_loss == lupi_pair_loss(1.2, -0.3, 1, 2.0, -1.0, cfg).loss);
    CHECK(single.per_pair.size() == 1);

    const std::vector<PairTerm> same(7, one);
    const BatchRisk rep = batch_risk(same, cfg);
    CHECK(rep.mean_loss == doctest::Approx(single.mean_loss).epsilon(1e-12));

    CHECK_THROWS_AS(batch_risk(std::vector<PairTerm>{}, cfg), InputError);
}

TEST_CASE("batch_risk matches an independent summation oracle") {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> dist(-5.0, 5.0);
    std::vector<PairTerm> pairs;
    for (int k = 0; k < 257; ++k)
        pairs.push_back({dist(gen), dist(gen), k % 2, dist(gen), dist(gen)});
    const LossConfig cfg = lupi_cfg(0.6, 1.3);
    const BatchRisk r = batch_risk(pairs, cfg);

    long double sum = 0.0L;
    for (const auto& p : pairs) sum += lupi_pair_loss(p.hx, p.hxp, p.t, p.gz, p.gzp, cfg).loss;
    const double expect = static_cast<double>(sum / static_cast<long double>(pairs.size()));
    CHECK(r.mean_loss == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("surface: privileged panel is exactly zero at the teacher point") {
    SurfaceSpec spec;
    spec.panel = SurfacePanel::privileged_only;
    const SurfaceGrid grid = export_surface(1, 8.0, 4.0, lupi_cfg(0.5), spec);
    REQUIRE(grid.n_hx == 101);
    REQUIRE(grid.n_hxp == 101);
    CHECK(grid.hx_axis.value(80) == 8.0);
    CHECK(grid.hxp_axis.value(40) == 4.0);
    CHECK(grid.at(80, 40) == 0.0);
    // and only there
    std::size_t zero_cells = 0;
    for (double v : grid.values)
        if (v <= 1e-12) ++zero_cells;
    CHECK(zero_cells == 1);
}

TEST_CASE("surface: plain loss is monotone along hx - hxp for t=1") {
    SurfaceSpec spec;
    spec.panel = SurfacePanel::plain;
    const SurfaceGrid grid = export_surface(1, 0.0, 0.0, LossConfig{}, spec);
    for (std::size_t i = 0; i < grid.n_hx; ++i)
        for (std::size_t j = 0; j + 1 < grid.n_hxp; ++j)
            CHECK(grid.at(i, j) < grid.at(i, j + 1)); // larger hxp = smaller gap = larger loss
}

TEST_CASE("surface: normalization hits 0 and 1") {
    SurfaceSpec spec;
    spec.panel = SurfacePanel::lupi;
    spec.normalize = true;
    const SurfaceGrid grid = export_surface(1, 8.0, 4.0, lupi_cfg(0.5), spec);
    const auto [lo, hi] = std::minmax_element(grid.values.begin(), grid.values.end());
    CHECK(*lo == 0.0);
    CHECK(*hi == 1.0);
    CHECK(grid.normalized);
}

TEST_CASE("surface: lupi argmin sits next to the teacher scores") {
    SurfaceSpec spec;
    spec.panel = SurfacePanel::lupi;
    const SurfaceGrid grid = export_surface(1, 8.0, 4.0, lupi_cfg(0.5), spec);
    std::size_t best = 0;
    for (std::size_t k = 1; k < grid.values.size(); ++k)
        if (grid.values[k] < grid.values[best]) best = k;
    const double hx = grid.hx_axis.value(best / grid.n_hxp);
    const double hxp = grid.hxp_axis.value(best % grid.n_hxp);
    CHECK(hx > hxp);
    CHECK(std::fabs(hx - 8.0) <= 0.1 + 1e-12);
}

TEST_CASE("surface: degenerate axis specs are rejected") {
    SurfaceSpec spec;
    spec.hx_axis = {5.0, 5.0, 0.1};
    CHECK_THROWS_AS(export_surface(1, 8.0, 4.0, lupi_cfg(0.5), spec), InputError);
    spec.hx_axis = {0.0, 10.0, 0.0};
    CHECK_THROWS_AS(export_surface(1, 8.0, 4.0, lupi_cfg(0.5), spec), InputError);
}

TEST_CASE("surface CSV layout") {
    SurfaceSpec spec;
    spec.hx_axis = {0.0, 1.0, 0.5};
    spec.hxp_axis = {0.0, 1.0, 0.5};
    spec.panel = SurfacePanel::plain;
    const SurfaceGrid grid = export_surface(1, 0.0, 0.0, LossConfig{}, spec);
    std::ostringstream out;
    write_surface_csv(grid, out);
    std::istringstream in(out.str());
    std::string line;
    std::size_t comments = 0, data = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        if (line.rfind("#", 0) == 0) {
            ++comments;
        } else if (line == "hx,hxp,loss") {
            saw_header = true;
        } else if (!line.empty()) {
            ++data;
        }
    }
    CHECK(saw_header);
    CHECK(comments >= 3);
    CHECK(data == 9); // 3x3 grid
    CHECK(out.str().find("0,0,0.693147181") != std::string::npos); // 9 sig digits of ln 2
}

TEST_CASE("surface panels differ from each other") {
    SurfaceSpec spec;
    const LossConfig cfg = lupi_cfg(0.5);
    spec.panel = SurfacePanel::plain;
    const SurfaceGrid plain = export_surface(1, 8.0, 4.0, cfg, spec);
    spec.panel = SurfacePanel::lupi;
    const SurfaceGrid lupi = export_surface(1, 8.0, 4.0, cfg, spec);
    spec.panel = SurfacePanel::privileged_only;
    const SurfaceGrid priv = export_surface(1, 8.0, 4.0, cfg, spec);
    auto differing = [](const SurfaceGrid& a, const SurfaceGrid& b) {
        std::size_t n = 0;
        for (std::size_t k = 0; k < a.values.size(); ++k)
            if (a.values[k] != b.values[k]) ++n;
        return n;
    };
    const std::size_t half = plain.values.size() / 2;
    CHECK(differing(plain, lupi) > half);
    CHECK(differing(plain, priv) > half);
    CHECK(differing(lupi, priv) > half);
}
