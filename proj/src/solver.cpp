#include "metastab/solver.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace metastab {

namespace {

constexpr double kGamma = 1.0 - 0.70710678118654752440;  // 1 - 1/sqrt(2)
constexpr double kDelta = 1.0 - 1.0 / (2.0 * kGamma);
constexpr double kTiny = 1e-280;

// Explicit flux xi w/2 - w^2/2 at each midpoint i+1/2, i = 0..n-2. The
// quadratic part is the energy-conservative average.
void explicit_flux(const Grid& g, const std::vector<double>& w, std::vector<double>& f) {
    const double h = g.spacing();
    for (std::size_t i = 0; i + 1 < w.size(); ++i) {
        const double a = w[i];
        const double b = w[i + 1];
        const double xm = g.xi_min() + h * (static_cast<double>(i) + 0.5);
        f[i] = xm * (a + b) / 4.0 - (a * a + a * b + b * b) / 6.0;
    }
}

// E(w)_i = (f_{i+1/2} - f_{i-1/2}) / h on interior nodes; zero at the ends.
void explicit_rhs(const Grid& g, const std::vector<double>& w, std::vector<double>& flux, std::vector<double>& out) {
    explicit_flux(g, w, flux);
    const double h = g.spacing();
    out.front() = 0.0;
    out.back() = 0.0;
    for (std::size_t i = 1; i + 1 < w.size(); ++i) out[i] = (flux[i] - flux[i - 1]) / h;
}

void diffusion_rhs(const Grid& g, const std::vector<double>& w, double mu, std::vector<double>& out) {
    const double c = mu / (g.spacing() * g.spacing());
    out.front() = 0.0;
    out.back() = 0.0;
    for (std::size_t i = 1; i + 1 < w.size(); ++i) out[i] = c * (w[i + 1] - 2.0 * w[i] + w[i - 1]);
}

// LU factors of (1 - r D2) on interior nodes, reused while r is unchanged.
class ImplicitDiffusion {
public:
    void solve(std::vector<double>& x, double r) {
        const std::size_t n = x.size();
        x.front() = 0.0;
        x.back() = 0.0;
        if (n < 3) return;
        if (r != r_ || lower_.size() != n) factor(n, r);
        for (std::size_t i = 1; i + 1 < n; ++i) x[i] = (x[i] + r * x[i - 1]) * inv_pivot_[i];
        for (std::size_t i = n - 2; i-- > 1;) x[i] -= lower_[i] * x[i + 1];
        // Subnormal tails cost far more than they are worth; clip them.
        for (double& v : x) v = std::abs(v) < kTiny ? 0.0 : v;
    }

private:
    void factor(std::size_t n, double r) {
        r_ = r;
        lower_.assign(n, 0.0);
        inv_pivot_.assign(n, 0.0);
        const double diag = 1.0 + 2.0 * r;
        double pivot = diag;
        for (std::size_t i = 1; i + 1 < n; ++i) {
            if (i > 1) pivot = diag - r * r * inv_pivot_[i - 1];
            inv_pivot_[i] = 1.0 / pivot;
            lower_[i] = -r * inv_pivot_[i];
        }
    }

    double r_ = -1.0;
    std::vector<double> lower_;
    std::vector<double> inv_pivot_;
};

bool all_finite(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

double cfl_limit(const Field& w, double mu, double cfl_safety) {
    const Grid& g = w.grid();
    const double h = g.spacing();
    const double reach = std::max(std::abs(g.xi_min()), std::abs(g.xi_max()));
    return cfl_safety * std::min(h * h / (2.0 * mu), h / (w.max_abs() + 0.5 * reach));
}

Trajectory evolve(const Field& w0, double mu, double tau_end, const SolverConfig& config, double snapshot_every) {
    return evolve(w0, mu, tau_end, config, snapshot_every, SnapshotObserver{});
}

Trajectory evolve(const Field& w0, double mu, double tau_end, const SolverConfig& config, double snapshot_every,
                  const SnapshotObserver& keep_going) {
    if (!(mu > 0.0)) throw ConfigError(fmt::format("evolve: mu = {} must be positive", mu));
    if (!(tau_end >= 0.0) || !std::isfinite(tau_end)) throw ConfigError("evolve: tau_end must be finite and >= 0");
    if (!(snapshot_every > 0.0)) throw ConfigError("evolve: snapshot_every must be positive");
    if (!(config.cfl_safety > 0.0 && config.cfl_safety <= 1.0)) throw ConfigError("evolve: cfl_safety must lie in (0, 1]");
    if (config.dt < 0.0) throw ConfigError("evolve: dt must be >= 0");
    const double peak = w0.max_abs();
    const std::size_t n = w0.size();
    if (std::abs(w0[0]) > 1e-10 * peak || std::abs(w0[n - 1]) > 1e-10 * peak) {
        throw ConfigError(fmt::format("evolve: boundary values ({}, {}) exceed 1e-10 of max {}", w0[0], w0[n - 1], peak));
    }

    const Grid& g = w0.grid();
    const double h2 = g.spacing() * g.spacing();

    Trajectory traj;
    const auto record = [&](const std::vector<double>& w, double tau) {
        Field f(g, w);
        traj.mass_ledger.push_back(integrate(f));
        traj.snapshots.push_back({std::move(f), tau});
    };

    std::vector<double> u(w0.values().begin(), w0.values().end());
    u.front() = 0.0;
    u.back() = 0.0;
    record(u, 0.0);
    if (keep_going && !keep_going(traj.snapshots.back())) return traj;

    std::vector<double> u2(n), u3(n), e1(n), e2(n), i2(n), flux(n - 1);
    ImplicitDiffusion implicit;
    double tau = 0.0;
    std::size_t next_snap = 1;
    const double eps = 1e-12 * std::max(1.0, tau_end);

    while (tau < tau_end - eps) {
        const double target = std::min(tau_end, static_cast<double>(next_snap) * snapshot_every);
        double max_abs = 0.0;
        for (double v : u) max_abs = std::max(max_abs, std::abs(v));
        const double reach = std::max(std::abs(g.xi_min()), std::abs(g.xi_max()));
        const double bound = config.cfl_safety * std::min(h2 / (2.0 * mu), g.spacing() / (max_abs + 0.5 * reach));

        // Automatic steps are snapshot_every / 2^k so the implicit factors stay
        // cached and steps land on snapshot times.
        double dt = config.dt > 0.0 ? config.dt : snapshot_every;
        if (config.dt > 0.0) {
            for (int k = 0; dt > bound && k < config.max_halvings; ++k) dt *= 0.5;
        } else {
            while (dt > bound) dt *= 0.5;
        }
        if (dt > bound) {
            throw SolverFailure(fmt::format("evolve: step {} still above CFL bound {} after {} halvings at tau = {}",
                                            dt, bound, config.max_halvings, tau),
                                std::move(traj));
        }
        bool lands = false;
        if (tau + dt >= target - eps) {
            dt = target - tau;
            lands = true;
        }

        // Stage 2.
        explicit_rhs(g, u, flux, e1);
        for (std::size_t i = 0; i < n; ++i) u2[i] = u[i] + dt * kGamma * e1[i];
        implicit.solve(u2, dt * kGamma * mu / h2);
        // Stage 3.
        explicit_rhs(g, u2, flux, e2);
        diffusion_rhs(g, u2, mu, i2);
        for (std::size_t i = 0; i < n; ++i) {
            u3[i] = u[i] + dt * (kDelta * e1[i] + (1.0 - kDelta) * e2[i] + (1.0 - kGamma) * i2[i]);
        }
        implicit.solve(u3, dt * kGamma * mu / h2);

        if (!all_finite(u3)) {
            throw SolverFailure(fmt::format("evolve: non-finite values after step at tau = {} (dt = {})", tau, dt),
                                std::move(traj));
        }
        u.swap(u3);
        ++traj.steps;
        tau = lands ? target : tau + dt;
        if (lands) {
            record(u, tau);
            if (keep_going && !keep_going(traj.snapshots.back())) return traj;
            ++next_snap;
            // A multiple of snapshot_every that coincides with tau_end is recorded once.
            while (static_cast<double>(next_snap) * snapshot_every <= tau + eps) ++next_snap;
        }
    }
    return traj;
}

double stationary_residual(const Field& w, double mu) {
    const Grid& g = w.grid();
    const std::size_t n = w.size();
    const double h = g.spacing();
    std::vector<double> v(w.values().begin(), w.values().end());
    std::vector<double> flux(n - 1);
    explicit_flux(g, v, flux);
    for (std::size_t i = 0; i + 1 < n; ++i) flux[i] += mu * (v[i + 1] - v[i]) / h;
    double worst = 0.0;
    for (std::size_t i = 1; i + 1 < n; ++i) worst = std::max(worst, std::abs((flux[i] - flux[i - 1]) / h));
    return worst;
}

}  // namespace metastab
