#include "metastab/manifolds.hpp"

#include <fmt/format.h>

#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include <quadmath.h>

#include "metastab/error.hpp"
#include "metastab/special.hpp"

__extension__ typedef __float128 quad;

namespace metastab {

namespace {

using special::SignedLog;

constexpr double kLogHalf = -std::numbers::ln2;

void require_mu(double mu) {
    if (!(mu > 0.0) || !std::isfinite(mu)) throw ConfigError(fmt::format("mu = {} must be positive", mu));
}

// log|e^x - 1|, accurate for large |x| in either direction.
double log_abs_expm1(double x) {
    if (x > 30.0) return x + std::log1p(-std::exp(-x));
    if (x < -30.0) return std::log1p(-std::exp(x));
    return std::log(std::abs(std::expm1(x)));
}

double log_add_exp(double a, double b) {
    const double top = std::max(a, b);
    if (!std::isfinite(top)) return top;
    return top + std::log(std::exp(a - top) + std::exp(b - top));
}

// Log-space pieces of w_N at one point: w = numer * phi_0 / denom.
struct LineEval {
    SignedLog denom;
    SignedLog numer;  // beta0 - b xi / 2mu
    double log_phi0;
};

LineEval evaluate_line(const NWaveParams& P, double xi) {
    const double mu = P.mu;
    const double s = xi / (2.0 * std::sqrt(mu));
    const double log_q = kLogHalf + special::log_erfc(s);
    const double log_cdf = kLogHalf + special::log_erfc(-s);
    const double log_tail = -P.mass / (2.0 * mu);
    const double log_phi0 = -s * s - 0.5 * std::log(4.0 * std::numbers::pi * mu);
    const double log_2mu = std::log(2.0 * mu);

    const int b_sign = P.beta1 > 0.0 ? 1 : (P.beta1 < 0.0 ? -1 : 0);
    const double log_b = b_sign != 0 ? std::log(std::abs(P.beta1)) - 0.5 * P.tau : 0.0;

    const std::array<SignedLog, 3> dterms{
        SignedLog{1, log_q},
        SignedLog{1, log_tail + log_cdf},
        SignedLog{-b_sign, log_b - log_2mu + log_phi0},
    };

    const int beta0_sign = P.mass > 0.0 ? 1 : (P.mass < 0.0 ? -1 : 0);
    const double log_beta0 = beta0_sign != 0 ? log_2mu + log_abs_expm1(log_tail) : 0.0;
    const int xi_sign = xi > 0.0 ? 1 : (xi < 0.0 ? -1 : 0);
    const std::array<SignedLog, 2> nterms{
        SignedLog{beta0_sign, log_beta0},
        SignedLog{-b_sign * xi_sign, xi_sign != 0 ? log_b + std::log(std::abs(xi)) - log_2mu : 0.0},
    };
    return {special::signed_log_sum(dterms), special::signed_log_sum(nterms), log_phi0};
}

[[noreturn]] void positivity_failure(const char* what, double xi, double margin) {
    throw PositivityError(fmt::format("{}: denominator not positive at xi = {} (value {})", what, xi, margin),
                          xi, margin);
}

double hermite(int n, double s) {
    double h0 = 1.0;
    if (n == 0) return h0;
    double h1 = 2.0 * s;
    for (int k = 1; k < n; ++k) {
        const double h2 = 2.0 * s * h1 - 2.0 * k * h0;
        h0 = h1;
        h1 = h2;
    }
    return h1;
}

}  // namespace

DiffusionWaveParams DiffusionWaveParams::from_mass(double mu, double mass) {
    require_mu(mu);
    if (!std::isfinite(mass)) throw ConfigError("diffusion wave: mass must be finite");
    if (-mass / (2.0 * mu) > 700.0) {
        throw ConfigError(fmt::format("diffusion wave: e^(-M/2mu) overflows for M = {}, mu = {}", mass, mu));
    }
    const double beta0 = -2.0 * mu * std::expm1(-mass / (2.0 * mu));
    return {mu, mass, beta0 / std::sqrt(4.0 * std::numbers::pi * mu), beta0};
}

DiffusionWaveParams DiffusionWaveParams::from_alpha0(double mu, double alpha0) {
    require_mu(mu);
    const double margin = 1.0 - alpha0 * std::sqrt(std::numbers::pi / mu);
    if (!(margin > 0.0)) {
        throw ConfigError(fmt::format("diffusion wave: 1 - alpha0 sqrt(pi/mu) = {} must be positive", margin));
    }
    return from_mass(mu, mass_from_alpha0(alpha0, mu));
}

NWaveParams NWaveParams::from_mass(double mu, double mass, double beta1, double tau) {
    const auto dw = DiffusionWaveParams::from_mass(mu, mass);
    if (!std::isfinite(beta1) || !std::isfinite(tau)) throw ConfigError("N-wave: beta1 and tau must be finite");
    return {mu, mass, dw.beta0, beta1, tau};
}

NWaveParams NWaveParams::from_beta0(double mu, double beta0, double beta1, double tau) {
    require_mu(mu);
    if (!(beta0 < 2.0 * mu)) throw ConfigError("N-wave: beta0 must be below 2 mu");
    return from_mass(mu, -2.0 * mu * std::log1p(-beta0 / (2.0 * mu)), beta1, tau);
}

double NWaveParams::scaled_beta1() const { return beta1 * std::exp(-0.5 * tau); }

NWaveParams NWaveParams::at_time(double new_tau) const {
    NWaveParams out = *this;
    out.tau = new_tau;
    return out;
}

InviscidNWaveParams::InviscidNWaveParams(double p_, double q_) : p(p_), q(q_) {
    if (!(p >= 0.0) || !(q >= 0.0)) throw ConfigError("inviscid N-wave: p and q must be non-negative");
}

double gaussian_cdf(double mu, double xi) { return 0.5 * std::erfc(-xi / (2.0 * std::sqrt(mu))); }

double eigenfunction_phi_at(int n, double mu, double xi) {
    if (n < 0 || n > 6) throw ConfigError(fmt::format("eigenfunction_phi: n = {} outside 0..6", n));
    require_mu(mu);
    const double root = std::sqrt(mu);
    const double s = xi / (2.0 * root);
    const double phi0 = std::exp(-s * s) / std::sqrt(4.0 * std::numbers::pi * mu);
    const double sign = (n % 2 == 0) ? 1.0 : -1.0;
    return sign * std::pow(2.0 * root, -n) * hermite(n, s) * phi0;
}

Field eigenfunction_phi(int n, double mu, const Grid& grid) {
    if (n < 0 || n > 6) throw ConfigError(fmt::format("eigenfunction_phi: n = {} outside 0..6", n));
    require_mu(mu);
    return Field::sample(grid, [&](double xi) { return eigenfunction_phi_at(n, mu, xi); });
}

double alpha0_from_mass(double mass, double mu) {
    require_mu(mu);
    return -std::sqrt(mu / std::numbers::pi) * std::expm1(-mass / (2.0 * mu));
}

double mass_from_alpha0(double alpha0, double mu) {
    require_mu(mu);
    const double x = alpha0 * std::sqrt(std::numbers::pi / mu);
    if (!(x < 1.0)) throw ConfigError("mass_from_alpha0: need alpha0 sqrt(pi/mu) < 1");
    return -2.0 * mu * std::log1p(-x);
}

double mass_alpha0_roundtrip(double mass, double mu) {
    require_mu(mu);
    // For M/2mu beyond ~36 the deficit 1 - alpha0 sqrt(pi/mu) is below double
    // epsilon, and well before that it loses most digits; alpha0 is carried
    // in binary128 for the roundtrip.
    const quad q_mu = mu;
    const quad pi = 4 * atanq(1);
    const quad alpha0 = -sqrtq(q_mu / pi) * expm1q(-quad(mass) / (2 * q_mu));
    const quad x = alpha0 * sqrtq(pi / q_mu);
    if (!(x < 1)) throw ConfigError("mass_alpha0_roundtrip: mass too large for binary128");
    return static_cast<double>(-2 * q_mu * log1pq(-x));
}

double nwave_log_denominator(const NWaveParams& params, double xi) {
    const auto e = evaluate_line(params, xi);
    if (e.denom.sign <= 0) positivity_failure("diffusive N-wave", xi, e.denom.value());
    return e.denom.log_abs;
}

double diffusive_nwave_at(const NWaveParams& params, double xi) {
    const auto e = evaluate_line(params, xi);
    if (e.denom.sign <= 0) positivity_failure("diffusive N-wave", xi, e.denom.value());
    if (e.numer.sign == 0) return 0.0;
    return e.numer.sign * std::exp(e.numer.log_abs + e.log_phi0 - e.denom.log_abs);
}

DenominatorMargin nwave_denominator_margin(const NWaveParams& params, const Grid& grid) {
    DenominatorMargin out{std::numeric_limits<double>::infinity(), grid.xi_min()};
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double xi = grid.node(i);
        const double d = evaluate_line(params, xi).denom.value();
        if (d < out.min_value) out = {d, xi};
    }
    return out;
}

Field diffusive_nwave(const NWaveParams& params, const Grid& grid) {
    require_mu(params.mu);
    return Field::sample(grid, [&](double xi) { return diffusive_nwave_at(params, xi); });
}

Field diffusion_wave(const DiffusionWaveParams& params, const Grid& grid) {
    return diffusive_nwave(NWaveParams{params.mu, params.mass, params.beta0, 0.0, 0.0}, grid);
}

Field diffusion_wave_derivative(const DiffusionWaveParams& params, const Grid& grid) {
    const Field a = diffusion_wave(params, grid);
    std::vector<double> d(grid.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        d[i] = a[i] * (a[i] - grid.node(i)) / (2.0 * params.mu);
    }
    return Field(grid, std::move(d));
}

Field diffusive_nwave_alt(double mass, double alpha1, double tau, double mu, const Grid& grid) {
    const auto dw = DiffusionWaveParams::from_mass(mu, mass);
    const Field a = diffusion_wave(dw, grid);
    const Field da = diffusion_wave_derivative(dw, grid);
    const double c = alpha1 * std::exp(-0.5 * tau);
    std::vector<double> w(grid.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double denom = 1.0 - c * a[i] / (2.0 * mu);
        if (!(denom > 0.0)) positivity_failure("diffusive N-wave (foliation form)", grid.node(i), denom);
        w[i] = a[i] + c * da[i] / denom;
    }
    return Field(grid, std::move(w));
}

Field eigenfunction_Phi(int n, double mass, double mu, const Grid& grid) {
    if (n != 0 && n != 1) throw ConfigError("eigenfunction_Phi: n must be 0 or 1");
    const auto dw = DiffusionWaveParams::from_mass(mu, mass);
    const NWaveParams line{mu, mass, dw.beta0, 0.0, 0.0};
    std::vector<double> v(grid.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double xi = grid.node(i);
        const double inv_d = std::exp(-nwave_log_denominator(line, xi));
        const double a = diffusive_nwave_at(line, xi);
        const double phi_n = eigenfunction_phi_at(n, mu, xi);
        const double prim_n = n == 0 ? gaussian_cdf(mu, xi) : eigenfunction_phi_at(0, mu, xi);
        v[i] = phi_n * inv_d + prim_n * a * inv_d / (2.0 * mu);
    }
    return Field(grid, std::move(v));
}

Field conjugacy_apply(const Field& f, double mass, double mu, Direction direction) {
    const auto dw = DiffusionWaveParams::from_mass(mu, mass);
    const NWaveParams line{mu, mass, dw.beta0, 0.0, 0.0};
    const auto prim = cumulative_integral(f);
    const Grid& grid = f.grid();
    std::vector<double> v(grid.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double xi = grid.node(i);
        const double log_d = nwave_log_denominator(line, xi);
        const double a = diffusive_nwave_at(line, xi);
        if (direction == Direction::forward) {
            const double inv_d = std::exp(-log_d);
            v[i] = f[i] * inv_d + prim[i] * a * inv_d / (2.0 * mu);
        } else {
            v[i] = std::exp(log_d) * (f[i] - prim[i] * a / (2.0 * mu));
        }
    }
    return Field(grid, std::move(v));
}

Field inviscid_nwave(const InviscidNWaveParams& params, const Grid& grid) {
    const double left = -std::sqrt(params.p);
    const double right = std::sqrt(params.q);
    // Jump nodes take the left limit.
    return Field::sample(grid, [&](double xi) { return (xi > left && xi <= right) ? xi : 0.0; });
}

PQ nwave_pq_exact(const NWaveParams& params) {
    require_mu(params.mu);
    const double mu = params.mu;
    const double log_tail = -params.mass / (2.0 * mu);
    // sup_y log D(y): the limits y -> -inf (log 1 = 0) and y -> +inf (log e^{-M/2mu}),
    // and the single interior critical point y*.
    double sup_log_d = std::max(0.0, log_tail);
    const double b = params.scaled_beta1();
    if (params.beta1 != 0.0) {
        double y_star = 0.0;
        if (params.beta0 != 0.0) {
            const double log_y = std::log(2.0 * mu) + std::log(std::abs(params.beta0)) -
                                 (std::log(std::abs(params.beta1)) - 0.5 * params.tau);
            const double sign = (params.beta0 > 0.0) == (b > 0.0) ? 1.0 : -1.0;
            y_star = sign * std::exp(std::min(log_y, 230.0));
        }
        sup_log_d = std::max(sup_log_d, nwave_log_denominator(params, y_star));
    }
    const double p = 4.0 * mu * sup_log_d;
    return {p, p + 2.0 * params.mass};
}

Beta1Asymptotic beta1_asymptotic(double p, double q, double mu, double tau) {
    require_mu(mu);
    if (!(p > 0.0) || !(q > 0.0)) {
        throw ConfigError("beta1_asymptotic: p = 0 or q = 0 gives beta1 = 0 (pure diffusion wave)");
    }
    if (!(q < p)) throw ConfigError("beta1_asymptotic: requires q < p; reflect for q > p");
    const double lead = std::log(4.0 * std::pow(mu, 1.5) * std::sqrt(std::numbers::pi)) + p / (4.0 * mu);
    const double log_abs = log_add_exp(lead, 0.5 * std::log(mu / std::numbers::pi));
    const double log_beta0 = std::log(2.0 * mu) + log_abs_expm1((p - q) / (4.0 * mu));
    Beta1Asymptotic out{};
    out.log_abs_scaled = log_abs;
    out.scaled_beta1 = -std::exp(log_abs);
    out.beta1 = -std::exp(log_abs + 0.5 * tau);
    // beta0 < 0 and beta1 < 0 here, so y* > 0.
    out.y_star = std::exp(std::log(2.0 * mu) + log_beta0 - log_abs);
    return out;
}

NWaveParams beta_from_pq_numeric(double p, double q, double mu) {
    require_mu(mu);
    if (!(p >= 0.0) || !(q >= 0.0) || (p == 0.0 && q == 0.0)) {
        throw ConfigError("beta_from_pq_numeric: need p, q >= 0, not both zero");
    }
    const double mass = 0.5 * (q - p);
    if (p == 0.0 || q == 0.0) return NWaveParams::from_mass(mu, mass, 0.0, 0.0);

    const auto p_of = [&](double log_abs_b) {
        return nwave_pq_exact(NWaveParams::from_mass(mu, mass, -std::exp(log_abs_b), 0.0)).p;
    };
    double lo = -40.0;
    for (int k = 0; k < 20 && p_of(lo) >= p; ++k) lo -= 40.0;
    double hi = p / (4.0 * mu) + 10.0;
    for (int k = 0; k < 40 && p_of(hi) <= p; ++k) hi += 20.0;
    if (!(p_of(lo) < p && p_of(hi) > p)) {
        throw NumericalError(fmt::format("beta_from_pq_numeric: cannot bracket p = {} (mu = {})", p, mu));
    }
    constexpr int kMaxSteps = 200;
    for (int step = 0; step < kMaxSteps; ++step) {
        const double mid = 0.5 * (lo + hi);
        const double pm = p_of(mid);
        if (std::abs(pm - p) <= 1e-14 * p || hi - lo <= 1e-15 * std::max(1.0, std::abs(mid))) {
            return NWaveParams::from_mass(mu, mass, -std::exp(mid), 0.0);
        }
        (pm < p ? lo : hi) = mid;
    }
    throw NumericalError(fmt::format("beta_from_pq_numeric: no convergence after {} bisection steps", kMaxSteps));
}

NWaveParams reflect(const NWaveParams& params) {
    const double factor = std::exp(params.mass / (2.0 * params.mu));
    return NWaveParams::from_mass(params.mu, -params.mass, params.beta1 * factor, params.tau);
}

Field reflect(const Field& w) {
    const Grid& g = w.grid();
    if (std::abs(g.xi_min() + g.xi_max()) > 1e-12 * (g.xi_max() - g.xi_min())) {
        throw ConfigError("reflect: grid must be symmetric about 0");
    }
    const std::size_t n = g.size();
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = -w[n - 1 - i];
    return Field(g, std::move(v));
}

}  // namespace metastab
