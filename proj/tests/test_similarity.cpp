#include <doctest.h>

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

#include "metastab/error.hpp"
#include "metastab/manifolds.hpp"
#include "metastab/similarity.hpp"

using namespace metastab;

namespace {

double gauss(double mu, double x) { return std::exp(-x * x / (4.0 * mu)) / std::sqrt(4.0 * std::numbers::pi * mu); }

// Independent oracle: recursive adaptive Simpson on the analytic integrand.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol, int depth = 50) {
    const auto rec = [&](auto&& self, double lo, double hi, double flo, double fmid, double fhi, double whole,
                         double eps, int d) -> double {
        const double mid = 0.5 * (lo + hi);
        const double lm = 0.5 * (lo + mid);
        const double rm = 0.5 * (mid + hi);
        const double flm = f(lm);
        const double frm = f(rm);
        const double left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid);
        const double right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi);
        if (d <= 0 || std::abs(left + right - whole) <= 15.0 * eps) return left + right + (left + right - whole) / 15.0;
        return self(self, lo, mid, flo, flm, fmid, left, eps / 2.0, d - 1) +
               self(self, mid, hi, fmid, frm, fhi, right, eps / 2.0, d - 1);
    };
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    return rec(rec, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, depth);
}

}  // namespace

TEST_CASE("grid validation") {
    CHECK_THROWS_AS(Grid::uniform(1.0, 1.0, 100), ConfigError);
    CHECK_THROWS_AS(Grid::uniform(0.0, 1.0, 15), ConfigError);
    CHECK_THROWS_AS(Grid::uniform(0.0, std::numeric_limits<double>::infinity(), 100), ConfigError);
    const Grid g = Grid::symmetric(2.0, 401);
    CHECK(g.spacing() == doctest::Approx(0.01));
    CHECK(g.node(200) == doctest::Approx(0.0));
}

TEST_CASE("to_similarity: zero field and identity at t = 0") {
    const Grid x = Grid::symmetric(20.0, 2001);
    const Grid xi = Grid::symmetric(5.0, 501);
    const auto s = to_similarity(Field::zeros(x), 5.0, xi);
    CHECK(s.w.max_abs() == 0.0);
    CHECK(s.tau == doctest::Approx(std::log(6.0)).epsilon(1e-15));

    const Field u = Field::sample(x, [](double v) { return std::sin(v) * std::exp(-v * v); });
    const auto s0 = to_similarity(u, 0.0, x);
    CHECK(s0.tau == 0.0);
    CHECK(sup_distance(s0.w, u) <= 1e-15);
}

TEST_CASE("to_similarity of the spreading heat kernel is phi_0") {
    const double mu = 0.05, t = 3.0;
    const Grid x = Grid::symmetric(6.0, 1201);
    const Grid xi = Grid::symmetric(2.5, 501);
    const Field u = Field::sample(x, [&](double v) { return gauss(mu * (1.0 + t), v); });
    const auto s = to_similarity(u, t, xi);
    const Field phi0 = eigenfunction_phi(0, mu, xi);
    // Interpolation error of the physical samples, probed at the midpoints.
    double interp = 0.0;
    for (std::size_t i = 0; i + 1 < x.size(); ++i) {
        const double v = x.node(i) + 0.5 * x.spacing();
        interp = std::max(interp, std::abs(u.at(v) - gauss(mu * (1.0 + t), v)));
    }
    CHECK(sup_distance(s.w, phi0) <= 2.0 * std::sqrt(1.0 + t) * interp + 1e-14);
}

TEST_CASE("from_similarity: tau = 0 and phi_0 at tau = log 6") {
    const double mu = 0.05;
    const Grid xi = Grid::symmetric(4.0, 801);
    const Field phi0 = eigenfunction_phi(0, mu, xi);
    const auto p0 = from_similarity(phi0, 0.0, xi);
    CHECK(p0.t == 0.0);
    CHECK(sup_distance(p0.u, phi0) <= 1e-15);

    const Grid x = Grid::symmetric(9.0, 1801);
    const auto p = from_similarity(phi0, std::log(6.0), x);
    CHECK(p.t == doctest::Approx(5.0).epsilon(1e-15));
    const Field expected = Field::sample(x, [&](double v) { return gauss(mu, v / std::sqrt(6.0)) / std::sqrt(6.0); });
    CHECK(sup_distance(p.u, expected) <= 1e-6);
}

TEST_CASE("similarity roundtrip for t in {0, 1, 10, 100}") {
    const Grid x = Grid::symmetric(65.0, 13001);
    const Field u = Field::sample(x, [](double v) { return std::exp(-0.5 * v * v) * (1.0 + 0.3 * v); });
    for (double t : {0.0, 1.0, 10.0, 100.0}) {
        CAPTURE(t);
        const double stretch = std::sqrt(1.0 + t);
        const Grid xi = Grid::symmetric(65.0 / stretch, 13001);
        const auto s = to_similarity(u, t, xi);
        // One-way interpolation error against the analytic rescaling.
        const Field w_exact = Field::sample(xi, [&](double z) {
            const double v = z * stretch;
            return stretch * std::exp(-0.5 * v * v) * (1.0 + 0.3 * v);
        });
        const double one_way = sup_distance(s.w, w_exact) / stretch;
        const auto back = from_similarity(s.w, s.tau, x);
        CHECK(back.t == doctest::Approx(t).epsilon(1e-14));
        CHECK(sup_distance(back.u, u) <= 10.0 * std::max(one_way, 1e-15));
    }
}

TEST_CASE("tau = log(1+t) inverts through expm1 within 4 ulp") {
    const Grid x = Grid::symmetric(1000.0, 64);
    const Grid xi = Grid::symmetric(1.0, 64);
    const Field u = Field::zeros(x);
    for (double t : {1e-12, 1e-6, 0.1, 1.0, 3.0, 10.0, 100.0, 12345.678}) {
        const double tau = to_similarity(u, t, xi).tau;
        CHECK(std::abs(std::expm1(tau) - t) <= 4.0 * std::numeric_limits<double>::epsilon() * t);
    }
}

TEST_CASE("weighted_norm examples") {
    const Grid g = Grid::symmetric(2.0, 401);
    CHECK(weighted_norm(Field::zeros(g), WeightExponent()) == 0.0);

    const Field hat = Field::sample(g, [](double v) { return std::max(0.0, 1.0 - std::abs(v)); });
    CHECK(weighted_norm(hat, 0.0) == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-10));

    const double mu = 0.05;
    const Grid wide = Grid::symmetric(domain_half_width(mu, 0.0, 0.0), 2001);
    const Field phi0 = eigenfunction_phi(0, mu, wide);
    const double oracle = std::sqrt(adaptive_simpson(
        [&](double v) {
            const double w = 1.0 + v * v;
            return w * w * gauss(mu, v) * gauss(mu, v);
        },
        -20.0 * std::sqrt(mu), 20.0 * std::sqrt(mu), 1e-14));
    CHECK(weighted_norm(phi0, WeightExponent(2.0)) == doctest::Approx(oracle).epsilon(1e-6));
    // The Gaussian moments give the same number in closed form.
    const double closed = std::sqrt(std::sqrt(2.0 * std::numbers::pi * mu) * (1.0 + 2.0 * mu + 3.0 * mu * mu) /
                                    (4.0 * std::numbers::pi * mu));
    CHECK(oracle == doctest::Approx(closed).epsilon(1e-10));
}

TEST_CASE("weighted_distance examples") {
    const double mu = 0.05;
    const Grid g = Grid::symmetric(3.0, 601);
    const Field f = eigenfunction_phi(0, mu, g);
    const Field h = eigenfunction_phi(1, mu, g);
    const WeightExponent m;
    CHECK(weighted_distance(f, f, m) == 0.0);
    CHECK(weighted_distance(f, h, m) == weighted_distance(h, f, m));
    CHECK(weighted_distance(f, Field::zeros(g), m) == weighted_norm(f, m));
    CHECK_THROWS_AS(weighted_distance(f, Field::zeros(Grid::symmetric(3.0, 301)), m), ConfigError);
}

TEST_CASE("weighted_norm is monotone in m") {
    const Grid g = Grid::symmetric(6.0, 1201);
    const Field f = Field::sample(g, [](double v) { return std::cos(3.0 * v) * std::exp(-0.3 * v * v); });
    double previous = 0.0;
    for (double m : {0.0, 0.5, 1.6, 2.0, 3.0, 4.5}) {
        const double n = weighted_norm(f, m);
        CHECK(n >= previous);
        previous = n;
    }
}

TEST_CASE("weight exponent must exceed 3/2") {
    CHECK_THROWS_AS(WeightExponent(1.5), ConfigError);
    CHECK_THROWS_AS(WeightExponent(std::nan("")), ConfigError);
    CHECK(WeightExponent(1.6).value() == 1.6);
}

TEST_CASE("quadrature weights agree with integrate for odd and even sizes") {
    for (std::size_t n : {101u, 100u}) {
        const Grid g = Grid::uniform(-1.0, 2.0, n);
        const Field f = Field::sample(g, [](double v) { return std::exp(v) * std::sin(2.0 * v); });
        const auto w = quadrature_weights(g);
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += w[i] * f[i];
        CHECK(s == doctest::Approx(integrate(f)).epsilon(1e-13));
    }
}

TEST_CASE("domain half-width formula") {
    const double mu = 0.01;
    CHECK(domain_half_width(mu, 1.0, 0.5) ==
          doctest::Approx(1.0 + 10.0 * std::sqrt(mu * std::abs(std::log(mu))) + 5.0));
    CHECK_THROWS_AS(domain_half_width(0.0, 1.0, 1.0), ConfigError);
}
