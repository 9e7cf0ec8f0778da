#include "metastab/diagnostics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "metastab/colehopf.hpp"
#include "metastab/error.hpp"

namespace metastab {

PQFunctionals pq_functionals(const Field& w) {
    const auto F = cumulative_integral(w);
    const double mass = F.back();
    PQFunctionals out{0.0, 0.0, 0, 0};
    double lowest = F[0];
    double highest_tail = mass - F[0];
    for (std::size_t i = 1; i < F.size(); ++i) {
        if (F[i] < lowest) {
            lowest = F[i];
            out.inf_index = i;
        }
        if (mass - F[i] > highest_tail) {
            highest_tail = mass - F[i];
            out.sup_index = i;
        }
    }
    out.p = -2.0 * std::min(0.0, lowest);
    out.q = 2.0 * std::max(0.0, highest_tail);
    return out;
}

double entropy(const Field& w, double mu) {
    if (!(mu > 0.0)) throw ConfigError("entropy: mu must be positive");
    const Grid& g = w.grid();
    const auto F = cumulative_integral(w);
    std::vector<double> W(w.size());
    double peak = 0.0;
    for (std::size_t i = 0; i < W.size(); ++i) {
        W[i] = w[i] * std::exp(-F[i] / (2.0 * mu));
        peak = std::max(peak, std::abs(W[i]));
    }
    if (peak == 0.0) return 0.0;
    const double floor = 1e-13 * peak;
    const bool positive = std::any_of(W.begin(), W.end(), [&](double v) { return v > floor; });
    const bool negative = std::any_of(W.begin(), W.end(), [&](double v) { return v < -floor; });
    if (positive && negative) {
        const auto bad = std::find_if(W.begin(), W.end(), [&](double v) { return v < -floor; });
        const auto i = static_cast<std::size_t>(bad - W.begin());
        throw NumericalError(fmt::format("entropy: Cole-Hopf image changes sign; first negative node xi = {} (W = {})",
                                         g.node(i), W[i]));
    }
    const double sign = positive ? 1.0 : -1.0;
    std::vector<double> integrand(W.size(), 0.0);
    for (std::size_t i = 0; i < W.size(); ++i) {
        const double v = sign * W[i];
        if (v <= 0.0) continue;
        const double xi = g.node(i);
        // log W = log|w| - F/2mu avoids underflow in W itself.
        integrand[i] = v * (std::log(std::abs(w[i])) - F[i] / (2.0 * mu) + xi * xi / (4.0 * mu));
    }
    return integrate(g, integrand);
}

PhiRemainder phi_remainder(const Field& w, const Field& w_N, double mu) {
    if (!(mu > 0.0)) throw ConfigError("phi_remainder: mu must be positive");
    if (!(w.grid() == w_N.grid())) throw ConfigError("phi_remainder: grids differ");
    const Grid& g = w.grid();
    const auto F = cumulative_integral(w);
    const auto F_N = cumulative_integral(w_N);
    const std::size_t n = w.size();
    std::vector<double> phi(n);
    double delta = std::numeric_limits<double>::infinity();
    std::size_t where = 0;
    for (std::size_t i = 0; i < n; ++i) {
        // Integrated transform: 1 - (1/2mu) int W = e^{-int w / 2mu}.
        const double d_full = std::exp(-F[i] / (2.0 * mu));
        const double d_N = std::exp(-F_N[i] / (2.0 * mu));
        const double V = w_N[i] * d_N;
        const double Psi = w[i] * d_full - V;
        const double int_V = -2.0 * mu * std::expm1(-F_N[i] / (2.0 * mu));
        const double int_Psi = 2.0 * mu * (d_N - d_full);
        phi[i] = -(Psi * int_V - V * int_Psi - 2.0 * mu * Psi) / (2.0 * mu * d_full * d_N);
        const double local = std::min(d_full, d_N);
        if (local < delta) {
            delta = local;
            where = i;
        }
    }
    if (!(delta >= 1e-12)) {
        throw PositivityError(fmt::format("phi_remainder: delta_N = {} at xi = {}", delta, g.node(where)),
                              g.node(where), delta);
    }
    return {Field(g, std::move(phi)), delta};
}

ManifoldDistance dist_to_nwave_manifold(const Field& w, double mu, WeightExponent m) {
    const double mass = integrate(w);
    const Grid& g = w.grid();
    const auto base = NWaveParams::from_mass(mu, mass, 0.0, 0.0);

    const auto distance = [&](double beta1) {
        NWaveParams P = base;
        P.beta1 = beta1;
        try {
            return weighted_distance(w, diffusive_nwave(P, g), m);
        } catch (const PositivityError&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    // Seed the scale from the first moment of the Cole-Hopf image; scan both
    // signs since the optimum need not share the seed's sign.
    const double seed = spectral_project(cole_hopf_forward(w, mu), 1, mu);
    const double s0 = std::log(std::max(std::abs(seed), 1e-300));

    constexpr int kScan = 61;
    constexpr double kHalfRange = 15.0;
    const double step = 2.0 * kHalfRange / (kScan - 1);
    double sign = seed > 0.0 ? 1.0 : -1.0;
    double best_s = s0;
    double best = std::numeric_limits<double>::infinity();
    for (double trial_sign : {sign, -sign}) {
        for (int k = 0; k < kScan; ++k) {
            const double s = s0 - kHalfRange + step * k;
            const double d = distance(trial_sign * std::exp(s));
            if (d < best) {
                best = d;
                best_s = s;
                sign = trial_sign;
            }
        }
    }
    const auto at = [&](double s) { return distance(sign * std::exp(s)); };
    const double zero_dist = distance(0.0);
    if (!std::isfinite(best) && !std::isfinite(zero_dist)) {
        throw NumericalError("dist_to_nwave_manifold: no admissible beta1 in the search bracket");
    }

    double lo = best_s - step;
    double hi = best_s + step;
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - gr * (hi - lo);
    double x2 = lo + gr * (hi - lo);
    double f1 = at(x1);
    double f2 = at(x2);
    constexpr int kMaxIter = 200;
    int it = 0;
    for (; it < kMaxIter && hi - lo > 1e-11 * std::max(1.0, std::abs(best_s)); ++it) {
        if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - gr * (hi - lo);
            f1 = at(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + gr * (hi - lo);
            f2 = at(x2);
        }
    }
    if (it == kMaxIter) throw NumericalError("dist_to_nwave_manifold: golden-section did not converge in 200 iterations");

    double arg_s = f1 < f2 ? x1 : x2;
    double arg_d = std::min(f1, f2);
    if (best < arg_d) {
        arg_d = best;
        arg_s = best_s;
    }
    NWaveParams params = base;
    if (zero_dist <= arg_d) {
        params.beta1 = 0.0;
        return {zero_dist, params};
    }
    params.beta1 = sign * std::exp(arg_s);
    return {arg_d, params};
}

DecayFit fit_decay_rate(const std::vector<std::pair<double, double>>& series, double tau_lo, double tau_hi) {
    if (series.empty()) throw ConfigError("fit_decay_rate: empty series");
    const double floor = 1e3 * std::numeric_limits<double>::epsilon() * std::abs(series.front().second);
    std::vector<double> x, y;
    for (const auto& [tau, value] : series) {
        if (tau < tau_lo || tau > tau_hi) continue;
        if (!(value > 0.0)) throw ConfigError(fmt::format("fit_decay_rate: non-positive value {} at tau = {}", value, tau));
        if (value < floor) continue;
        x.push_back(tau);
        y.push_back(std::log(value));
    }
    if (x.size() < 8) {
        throw ConfigError(fmt::format("fit_decay_rate: {} usable points in [{}, {}], need at least 8", x.size(), tau_lo, tau_hi));
    }
    const LineFit fit = fit_line(x, y);
    return {fit.slope, fit.r_squared, x.size()};
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw ConfigError("fit_line: need two or more paired points");
    const auto n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) throw ConfigError("fit_line: abscissae are all equal");
    const double slope = sxy / sxx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (my + slope * (x[i] - mx));
        ss_res += r * r;
    }
    const double r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
    return {my - slope * mx, slope, r2};
}

double relative_distance_to_inviscid(const Field& w, WeightExponent m) {
    const auto pq = pq_functionals(w);
    const Field N = inviscid_nwave(InviscidNWaveParams(pq.p, pq.q), w.grid());
    const double scale = weighted_norm(N, m);
    if (scale == 0.0) throw NumericalError("relative_distance_to_inviscid: N_{p,q} vanishes");
    return weighted_distance(w, N, m) / scale;
}

TransientTime transient_time(const Trajectory& traj, double delta, double mu, WeightExponent m,
                             const TransientOptions& options) {
    if (!(delta > 0.0)) throw ConfigError("transient_time: delta must be positive");
    if (!(mu > 0.0)) throw ConfigError("transient_time: mu must be positive");
    if (traj.snapshots.empty()) throw ConfigError("transient_time: empty trajectory");

    const auto frozen = pq_functionals(traj.snapshots.front().w);
    TransientTime out{false, std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::infinity(), 0.0};
    for (const auto& snap : traj.snapshots) {
        const auto pq = options.mode == PQMode::frozen ? frozen : pq_functionals(snap.w);
        const Field N = inviscid_nwave(InviscidNWaveParams(pq.p, pq.q), snap.w.grid());
        double d = weighted_distance(snap.w, N, m);
        if (options.relative) {
            const double scale = weighted_norm(N, m);
            d = scale > 0.0 ? d / scale : std::numeric_limits<double>::infinity();
        }
        if (d < out.closest_distance) {
            out.closest_distance = d;
            out.closest_tau = snap.tau;
        }
        if (d <= delta) {
            out.crossed = true;
            out.tau = snap.tau;
            return out;
        }
    }
    return out;
}

}  // namespace metastab
