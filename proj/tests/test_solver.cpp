#include <doctest.h>

#include <cmath>

#include "metastab/colehopf.hpp"
#include "metastab/diagnostics.hpp"
#include "metastab/error.hpp"
#include "metastab/experiments.hpp"
#include "metastab/manifolds.hpp"
#include "metastab/solver.hpp"

using namespace metastab;

namespace {

constexpr double kMu = 0.05;

Field bump(const Grid& g) {
    return Field::sample(g, [](double v) {
        return 0.5 * std::exp(-(v - 0.8) * (v - 0.8) / 0.32) - 0.7 * std::exp(-(v + 0.8) * (v + 0.8) / 0.32);
    });
}

}  // namespace

TEST_CASE("zero data stays zero") {
    const Grid g = Grid::symmetric(5.0, 501);
    const auto traj = evolve(Field::zeros(g), kMu, 1.0, SolverConfig{}, 0.25);
    CHECK(traj.snapshots.size() == 5);
    for (const auto& s : traj.snapshots) CHECK(s.w.max_abs() == 0.0);
}

TEST_CASE("trajectory bookkeeping") {
    const Grid g = Grid::symmetric(6.0, 1201);
    const Field w0 = bump(g);
    const auto traj = evolve(w0, kMu, 0.7, SolverConfig{}, 0.25);
    REQUIRE(traj.snapshots.size() == 4);
    CHECK(traj.snapshots.back().tau == doctest::Approx(0.7));
    for (std::size_t i = 1; i < traj.snapshots.size(); ++i) CHECK(traj.snapshots[i].tau > traj.snapshots[i - 1].tau);
    REQUIRE(traj.mass_ledger.size() == traj.snapshots.size());
    for (std::size_t i = 0; i < traj.snapshots.size(); ++i) {
        CHECK(traj.mass_ledger[i] == integrate(traj.snapshots[i].w));
    }
    CHECK(traj.steps > 0);
}

TEST_CASE("observer can stop a run early") {
    const Grid g = Grid::symmetric(6.0, 1201);
    int calls = 0;
    const auto traj = evolve(bump(g), kMu, 2.0, SolverConfig{}, 0.1, [&](const SimilaritySnapshot&) {
        return ++calls < 3;
    });
    CHECK(traj.snapshots.size() == 3);
}

TEST_CASE("invalid inputs") {
    const Grid g = Grid::symmetric(6.0, 1201);
    const Field w0 = bump(g);
    CHECK_THROWS_AS(evolve(w0, 0.0, 1.0, SolverConfig{}, 0.5), ConfigError);
    CHECK_THROWS_AS(evolve(w0, kMu, -1.0, SolverConfig{}, 0.5), ConfigError);
    CHECK_THROWS_AS(evolve(w0, kMu, 1.0, SolverConfig{}, 0.0), ConfigError);
    CHECK_THROWS_AS(evolve(w0, kMu, 1.0, SolverConfig{0.0, 1.5, 20}, 0.5), ConfigError);
    const Field edge = Field::sample(g, [](double) { return 0.1; });
    CHECK_THROWS_AS(evolve(edge, kMu, 1.0, SolverConfig{}, 0.5), ConfigError);
}

TEST_CASE("an oversized fixed step is refused or halved, never silently accepted") {
    const Grid g = Grid::symmetric(6.0, 1201);
    SolverConfig c;
    c.dt = 10.0;
    c.max_halvings = 0;
    CHECK_THROWS_AS(evolve(bump(g), kMu, 1.0, c, 0.5), SolverFailure);
    c.max_halvings = 20;
    const auto traj = evolve(bump(g), kMu, 0.5, c, 0.5);
    CHECK(traj.snapshots.back().tau == doctest::Approx(0.5));
}

TEST_CASE("CFL limit follows the documented bound") {
    const Grid g = Grid::symmetric(4.0, 801);
    const Field w = bump(g);
    const double h = g.spacing();
    const double expected = 0.4 * std::min(h * h / (2.0 * kMu), h / (w.max_abs() + 2.0));
    CHECK(cfl_limit(w, kMu, 0.4) == doctest::Approx(expected));
}

TEST_CASE("diffusion wave is a fixed point") {
    const Grid g = Grid::symmetric(6.0, 2401);
    const Field a = diffusion_wave(DiffusionWaveParams::from_mass(kMu, 1.0), g);
    const auto traj = evolve(a, kMu, 2.0, SolverConfig{}, 0.5);
    for (const auto& s : traj.snapshots) CHECK(sup_distance(s.w, a) <= 1e-4);
}

TEST_CASE("stationary residual") {
    const Grid g = Grid::symmetric(6.0, 1201);
    CHECK(stationary_residual(Field::zeros(g), kMu) == 0.0);

    const auto dw = DiffusionWaveParams::from_mass(kMu, 1.0);
    const double r1 = stationary_residual(diffusion_wave(dw, Grid::symmetric(6.0, 1201)), kMu);
    const double r2 = stationary_residual(diffusion_wave(dw, Grid::symmetric(6.0, 2401)), kMu);
    CHECK(std::log2(r1 / r2) == doctest::Approx(2.0).epsilon(0.1));

    // The inviscid N-wave is stationary only without viscosity: the residual
    // sits at the jumps, the smooth part only carries the mu-scale term.
    const Grid fine = Grid::symmetric(3.0, 1201);
    const Field N = inviscid_nwave(InviscidNWaveParams(1.0, 0.5), fine);
    CHECK(stationary_residual(N, kMu) >= 0.1 / fine.spacing());
    const Grid interior = Grid::uniform(-0.9, 0.6, 301);
    const Field smooth_part = Field::sample(interior, [](double v) { return v * (0.9 + v) * (0.6 - v); });
    CHECK(stationary_residual(smooth_part, kMu) <= 10.0);
}

TEST_CASE("matches the closed-form solution at tau = 1") {
    const Grid g = Grid::symmetric(6.0, 1201);
    const Field h = bump(g);
    const Field w = evolve(h, kMu, 1.0, SolverConfig{}, 1.0).snapshots.back().w;
    CHECK(sup_distance(w, exact_solution(h, kMu, 1.0, g)) <= 1e-3);
}

TEST_CASE("second-order convergence against the closed form") {
    const auto error = [](std::size_t n) {
        const Grid g = Grid::symmetric(6.0, n);
        const Field h = bump(g);
        return sup_distance(evolve(h, kMu, 1.0, SolverConfig{}, 1.0).snapshots.back().w,
                            exact_solution(h, kMu, 1.0, g));
    };
    CHECK(std::log2(error(601) / error(1201)) >= 1.8);
}

TEST_CASE("mass conservation and entropy decay on random positive data") {
    const Grid g = Grid::symmetric(6.0, 1201);
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const Field w0 = positive_bump_data(g, seed);
        const auto traj = evolve(w0, kMu, 1.0, SolverConfig{}, 0.01);
        const double m0 = traj.mass_ledger.front();
        double previous = entropy(w0, kMu);
        for (std::size_t i = 1; i < traj.snapshots.size(); ++i) {
            CHECK(std::abs(traj.mass_ledger[i] - m0) <= 1e-8 * (1.0 + std::abs(m0)) * traj.snapshots[i].tau);
            const double now = entropy(traj.snapshots[i].w, kMu);
            CHECK(now <= previous + 1e-9);
            previous = now;
        }
    }
}

TEST_CASE("generic data relaxes to the diffusion wave of its mass") {
    // Signed data with a large negative lobe lingers near an N-wave for
    // tau ~ p/(2 mu); positive data has no such phase.
    const Grid g = Grid::symmetric(6.0, 1201);
    const Field w0 = positive_bump_data(g, 11);
    const auto traj = evolve(w0, kMu, 20.0, SolverConfig{}, 20.0);
    const Field a = diffusion_wave(DiffusionWaveParams::from_mass(kMu, integrate(w0)), g);
    CHECK(weighted_distance(traj.snapshots.back().w, a, WeightExponent(2.0)) <= 1e-3);
}
