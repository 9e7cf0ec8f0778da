#include "metastab/experiments.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <future>
#include <limits>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "metastab/colehopf.hpp"
#include "metastab/diagnostics.hpp"
#include "metastab/error.hpp"
#include "metastab/manifolds.hpp"

#ifndef METASTAB_GIT_DESCRIBE
#define METASTAB_GIT_DESCRIBE "unknown"
#endif

namespace metastab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct StudyInfo {
    const char* name;
    const char* summary;
    std::vector<double> default_mu;
};

const std::vector<StudyInfo>& studies() {
    static const std::vector<StudyInfo> table{
        {"metastability-demo", "bump data at mu = 0.01: N-wave manifold by t = 2, diffusion wave by t = 100", {0.01}},
        {"transient-scaling", "time to reach delta of N_{p,q} across mu, fitted against |log mu|",
         {0.05, 0.02, 0.01, 0.005}},
        {"decay-rates", "e^{-tau} attraction to the N-wave family and e^{-tau/2} drift along it", {0.05}},
        {"lemma1-convergence", "||w_N - N_{p,q}|| in L^2(m) as mu decreases", {0.1, 0.05, 0.02, 0.01}},
        {"oracle-compare", "solver against the Cole-Hopf oracle; fixed point, conservation, entropy", {0.05}},
        {"spectrum-check", "heat-semigroup decay rates of phi_0, phi_1, phi_2", {0.05}},
    };
    return table;
}

const StudyInfo& find_study(const std::string& name) {
    for (const auto& s : studies()) {
        if (name == s.name) return s;
    }
    throw ConfigError(fmt::format("unknown study '{}' (try 'metastab list')", name));
}

double parse_double(const std::string& key, const std::string& text) {
    double v = 0.0;
    const char* first = text.data();
    const char* last = first + text.size();
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) throw ConfigError(fmt::format("{}: '{}' is not a number", key, text));
    return v;
}

std::uint64_t parse_unsigned(const std::string& key, const std::string& text) {
    std::uint64_t v = 0;
    const char* first = text.data();
    const char* last = first + text.size();
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) {
        throw ConfigError(fmt::format("{}: '{}' is not a non-negative integer", key, text));
    }
    return v;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double knob(const ExperimentConfig& c, const std::string& key, double fallback) {
    const auto it = c.extra.find(key);
    return it == c.extra.end() ? fallback : parse_double(key, it->second);
}

std::string knob_text(const ExperimentConfig& c, const std::string& key, const std::string& fallback) {
    const auto it = c.extra.find(key);
    return it == c.extra.end() ? fallback : it->second;
}

double weight_for(const ExperimentConfig& c) { return c.m.value_or(c.name == "decay-rates" ? 3.0 : 2.0); }

// Per-mu grid: truncation from the N-wave support and the viscous layer,
// spacing fine enough to resolve shocks of width ~ mu.
Grid study_grid(const ExperimentConfig& c, double mu, double p, double q, double spacing_cap = 0.01) {
    const double L = c.grid_l.value_or(domain_half_width(mu, p, q));
    if (!(L > 0.0)) throw ConfigError("grid-l must be positive");
    std::size_t n = 0;
    if (c.grid_n) {
        n = *c.grid_n;
    } else {
        const double h = std::min(spacing_cap, mu / 2.0);
        n = static_cast<std::size_t>(std::ceil(2.0 * L / h)) + 1;
    }
    return Grid::symmetric(L, n);
}

std::string describe(const Grid& g) {
    return fmt::format("[{}, {}] n={} h={}", format_value(g.xi_min()), format_value(g.xi_max()), g.size(),
                       format_value(g.spacing()));
}

// Rows and provenance produced by one mu task.
struct TaskOutput {
    double mu = 0.0;
    std::vector<ResultRow> rows;
    std::vector<std::pair<std::string, std::string>> provenance;
    std::string failure;
    bool numerical = false;
};

class Recorder {
public:
    Recorder(TaskOutput& out, std::string experiment, double mu) : out_(out), experiment_(std::move(experiment)), mu_(mu) {}

    void add(double tau, const std::string& metric, double value) {
        out_.rows.push_back({experiment_, mu_, tau, metric, value, {}});
    }
    void note(const std::string& key, const std::string& value) {
        out_.provenance.emplace_back(fmt::format("mu={}:{}", mu_, key), value);
    }

private:
    TaskOutput& out_;
    std::string experiment_;
    double mu_;
};

using StudyTask = std::function<void(double mu, Recorder& rec)>;

// Runs one task per mu concurrently and merges in ascending mu order.
void sweep(const ExperimentConfig& c, const std::vector<double>& mus, StudyResult& result, const StudyTask& task) {
    std::vector<double> sorted = mus;
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::future<TaskOutput>> futures;
    futures.reserve(sorted.size());
    for (double mu : sorted) {
        futures.push_back(std::async(std::launch::async, [&, mu] {
            TaskOutput out;
            out.mu = mu;
            Recorder rec(out, c.name, mu);
            const auto start = std::chrono::steady_clock::now();
            try {
                task(mu, rec);
            } catch (const ConfigError&) {
                throw;
            } catch (const NumericalError& e) {
                out.failure = e.what();
                out.numerical = true;
            } catch (const std::exception& e) {
                out.failure = e.what();
                out.numerical = true;
            }
            const std::chrono::duration<double> spent = std::chrono::steady_clock::now() - start;
            rec.note("seconds", fmt::format("{:.3f}", spent.count()));
            rec.add(0.0, "status", out.failure.empty() ? 1.0 : 0.0);
            return out;
        }));
    }
    std::exception_ptr config_failure;
    for (auto& f : futures) {
        try {
            TaskOutput out = f.get();
            for (auto& r : out.rows) result.rows.push_back(std::move(r));
            for (auto& [k, v] : out.provenance) result.provenance[k] = v;
            if (!out.failure.empty()) {
                result.failures.push_back(fmt::format("mu={}: {}", out.mu, out.failure));
                result.numerical_failure = result.numerical_failure || out.numerical;
            }
        } catch (...) {
            if (!config_failure) config_failure = std::current_exception();
        }
    }
    if (config_failure) std::rethrow_exception(config_failure);
}

BumpSpec bump_from(const ExperimentConfig& c, BumpSpec spec) {
    spec.p = c.p.value_or(spec.p);
    spec.q = c.q.value_or(spec.q);
    spec.sigma = knob(c, "sigma", spec.sigma);
    spec.center_minus = knob(c, "center_minus", spec.center_minus);
    spec.center_plus = knob(c, "center_plus", spec.center_plus);
    spec.jitter = knob(c, "jitter", spec.jitter);
    return spec;
}

void add_summary(StudyResult& result, const std::string& metric, double value) {
    result.rows.push_back({result.experiment, 0.0, 0.0, metric, value, {}});
}

std::vector<double> metric_values(const StudyResult& r, const std::string& metric, std::vector<double>* mus = nullptr) {
    std::vector<double> out;
    for (const auto& row : r.rows) {
        if (row.metric != metric) continue;
        out.push_back(row.value);
        if (mus) mus->push_back(row.mu);
    }
    return out;
}

// ---- spectrum-check -------------------------------------------------------

void spectrum_check(const ExperimentConfig& c, StudyResult& result, const std::vector<double>& mus) {
    const WeightExponent m(weight_for(c));
    sweep(c, mus, result, [&](double mu, Recorder& rec) {
        const Grid g = study_grid(c, mu, 0.0, 0.0);
        rec.note("grid", describe(g));
        for (int n = 0; n <= 2; ++n) {
            const Field phi = eigenfunction_phi(n, mu, g);
            std::vector<std::pair<double, double>> series;
            for (int k = 2; k <= 12; ++k) {
                const double tau = 0.25 * k;
                const Field W = heat_evolve(phi, tau, mu);
                const double norm = weighted_norm(W, m);
                series.emplace_back(tau, norm);
                rec.add(tau, fmt::format("norm_n{}", n), norm);
                if (k == 4) {
                    const Field expected = std::exp(-0.5 * n * tau) * phi;
                    rec.add(tau, fmt::format("rel_error_n{}", n), sup_distance(W, expected) / expected.max_abs());
                }
            }
            const auto fit = fit_decay_rate(series, 0.5, 3.0);
            rec.add(0.0, fmt::format("rate_n{}", n), fit.rate);
            rec.add(0.0, fmt::format("rate_error_n{}", n), std::abs(fit.rate + 0.5 * n));
        }
    });
}

// ---- oracle-compare ---------------------------------------------------------

double sup_drift(const Trajectory& traj, const Field& reference) {
    double worst = 0.0;
    for (const auto& s : traj.snapshots) worst = std::max(worst, sup_distance(s.w, reference));
    return worst;
}

double max_mass_drift_rate(const Trajectory& traj) {
    double worst = 0.0;
    const double m0 = traj.mass_ledger.front();
    for (std::size_t i = 1; i < traj.snapshots.size(); ++i) {
        worst = std::max(worst, std::abs(traj.mass_ledger[i] - m0) / traj.snapshots[i].tau);
    }
    return worst / (1.0 + std::abs(m0));
}

void oracle_compare(const ExperimentConfig& c, StudyResult& result, const std::vector<double>& mus) {
    const BumpSpec spec = bump_from(c, BumpSpec{});
    const double am_mass = c.mass.value_or(1.0);
    const double tau_end = knob(c, "tau_end", 2.0);
    const double long_tau = knob(c, "long_tau", 20.0);
    const int trajectories = static_cast<int>(knob(c, "trajectories", 5.0));
    sweep(c, mus, result, [&](double mu, Recorder& rec) {
        const Grid g = study_grid(c, mu, spec.p, spec.q);
        const Grid fine = Grid::symmetric(g.xi_max(), 2 * (g.size() - 1) + 1);
        rec.note("grid", describe(g));

        // Solver against the closed-form solution.
        const Field h = bump_data(g, spec, c.seed);
        const Trajectory traj = evolve(h, mu, tau_end, c.solver, 0.5);
        for (const auto& s : traj.snapshots) {
            if (s.tau == 0.0) continue;
            const Field exact = exact_solution(h, mu, s.tau, g);
            const double err = sup_distance(s.w, exact);
            rec.add(s.tau, "sup_error", err);
            rec.add(s.tau, "sup_rel_error", err / exact.max_abs());
        }
        rec.add(tau_end, "mass_drift_rate", max_mass_drift_rate(traj));

        // Refinement order at tau = 1.
        {
            const Field h_fine = bump_data(fine, spec, c.seed);
            const auto coarse = evolve(h, mu, 1.0, c.solver, 1.0).snapshots.back().w;
            const auto finer = evolve(h_fine, mu, 1.0, c.solver, 1.0).snapshots.back().w;
            const double e_coarse = sup_distance(coarse, exact_solution(h, mu, 1.0, g));
            const double e_fine = sup_distance(finer, exact_solution(h_fine, mu, 1.0, fine));
            rec.add(1.0, "sup_error_refined", e_fine);
            rec.add(1.0, "observed_order", std::log2(e_coarse / e_fine));
        }

        // Diffusion wave as a fixed point.
        {
            const Grid ga = study_grid(c, mu, 0.0, 2.0 * std::abs(am_mass), 0.005);
            const Grid gf = Grid::symmetric(ga.xi_max(), 2 * (ga.size() - 1) + 1);
            const auto params = DiffusionWaveParams::from_mass(mu, am_mass);
            const Field a = diffusion_wave(params, ga);
            const Field af = diffusion_wave(params, gf);
            const double drift = sup_drift(evolve(a, mu, tau_end, c.solver, 0.25), a);
            const double drift_fine = sup_drift(evolve(af, mu, tau_end, c.solver, 0.25), af);
            const double res = stationary_residual(a, mu);
            const double res_fine = stationary_residual(af, mu);
            rec.add(tau_end, "am_drift", drift);
            rec.add(tau_end, "am_drift_refined", drift_fine);
            rec.add(tau_end, "am_drift_order", std::log2(drift / drift_fine));
            rec.add(0.0, "am_residual", res);
            rec.add(0.0, "am_residual_refined", res_fine);
            rec.add(0.0, "am_residual_order", std::log2(res / res_fine));
        }

        // Conservation and entropy on positive random data.
        for (int k = 0; k < trajectories; ++k) {
            const Field w0 = positive_bump_data(g, c.seed + static_cast<std::uint64_t>(k));
            const Trajectory t = evolve(w0, mu, tau_end, c.solver, 0.01);
            double increase = -std::numeric_limits<double>::infinity();
            double previous = entropy(t.snapshots.front().w, mu);
            const double first = previous;
            for (std::size_t i = 1; i < t.snapshots.size(); ++i) {
                const double now = entropy(t.snapshots[i].w, mu);
                increase = std::max(increase, now - previous);
                previous = now;
            }
            rec.add(static_cast<double>(k), "trajectory_mass_drift_rate", max_mass_drift_rate(t));
            rec.add(static_cast<double>(k), "entropy_max_increase", increase);
            rec.add(static_cast<double>(k), "entropy_change", previous - first);
        }

        // Generic data relaxes to the diffusion wave of its mass.
        {
            const Trajectory t = evolve(h, mu, long_tau, c.solver, long_tau);
            const Field& last = t.snapshots.back().w;
            const Field a = diffusion_wave(DiffusionWaveParams::from_mass(mu, t.mass_ledger.front()), g);
            rec.add(long_tau, "long_time_am_distance", weighted_distance(last, a, WeightExponent(2.0)));
        }
    });
}

// ---- lemma1-convergence -----------------------------------------------------

void lemma1_convergence(const ExperimentConfig& c, StudyResult& result, const std::vector<double>& mus) {
    const double p = c.p.value_or(1.0);
    const double q = c.q.value_or(0.5);
    const WeightExponent m(weight_for(c));
    sweep(c, mus, result, [&](double mu, Recorder& rec) {
        const Grid g = study_grid(c, mu, p, q, mu / 4.0);
        rec.note("grid", describe(g));
        const NWaveParams params = beta_from_pq_numeric(p, q, mu);
        const Field w = diffusive_nwave(params, g);
        const Field N = inviscid_nwave(InviscidNWaveParams(p, q), g);
        const double dist = weighted_distance(w, N, m);
        const double norm = weighted_norm(N, m);
        const auto pq = pq_functionals(w);
        rec.add(0.0, "distance", dist);
        rec.add(0.0, "norm_N", norm);
        rec.add(0.0, "relative_distance", dist / norm);
        rec.add(0.0, "beta0", params.beta0);
        rec.add(0.0, "beta1", params.beta1);
        rec.add(0.0, "p_measured", pq.p);
        rec.add(0.0, "q_measured", pq.q);
        rec.add(0.0, "denominator_margin", nwave_denominator_margin(params, g).min_value);
    });
    std::vector<double> mu_of;
    const auto rel = metric_values(result, "relative_distance", &mu_of);
    bool decreasing = rel.size() == mus.size() && !rel.empty();
    // Rows are in ascending mu; the distance must grow with mu.
    for (std::size_t i = 1; i < rel.size(); ++i) decreasing = decreasing && rel[i] > rel[i - 1];
    add_summary(result, "strictly_decreasing", decreasing ? 1.0 : 0.0);
}

// ---- transient-scaling ------------------------------------------------------

void transient_scaling(const ExperimentConfig& c, StudyResult& result, const std::vector<double>& mus) {
    const BumpSpec spec = bump_from(c, BumpSpec{8.0, 4.0, 0.4, -2.0, 2.0, 0.1});
    const double delta = knob(c, "delta", 0.25);
    const double tau_end = knob(c, "tau_end", 10.0);
    const double every = knob(c, "snapshot_every", 0.05);
    const std::string mode_text = knob_text(c, "pq_mode", "tracking");
    if (mode_text != "tracking" && mode_text != "frozen") throw ConfigError("pq_mode must be tracking or frozen");
    TransientOptions options;
    options.mode = mode_text == "frozen" ? PQMode::frozen : PQMode::tracking;
    const WeightExponent m(weight_for(c));

    sweep(c, mus, result, [&](double mu, Recorder& rec) {
        const Grid g = study_grid(c, mu, spec.p, spec.q);
        rec.note("grid", describe(g));
        const Field w0 = bump_data(g, spec, c.seed);
        const auto pq0 = pq_functionals(w0);
        rec.add(0.0, "p_initial", pq0.p);
        rec.add(0.0, "q_initial", pq0.q);

        // Stop as soon as the threshold is met; transient_time re-reads it.
        const auto distance = [&](const Field& w) {
            const auto pq = options.mode == PQMode::frozen ? pq0 : pq_functionals(w);
            const Field N = inviscid_nwave(InviscidNWaveParams(pq.p, pq.q), g);
            return weighted_distance(w, N, m) / weighted_norm(N, m);
        };
        std::size_t count = 0;
        const Trajectory traj = evolve(w0, mu, tau_end, c.solver, every, [&](const SimilaritySnapshot& s) {
            const double d = distance(s.w);
            if (count++ % 10 == 0) rec.add(s.tau, "relative_distance", d);
            return d > delta;
        });
        const auto t = transient_time(traj, delta, mu, m, options);
        rec.add(0.0, "crossed", t.crossed ? 1.0 : 0.0);
        if (t.crossed) rec.add(t.tau, "transient_time", t.tau);
        rec.add(t.closest_tau, "closest_distance", t.closest_distance);
    });

    std::vector<double> mu_of;
    const auto T = metric_values(result, "transient_time", &mu_of);
    add_summary(result, "fit_points", static_cast<double>(T.size()));
    if (T.size() >= 2) {
        std::vector<double> x;
        for (double mu : mu_of) x.push_back(std::abs(std::log(mu)));
        const auto fit = fit_line(x, T);
        add_summary(result, "fit_intercept", fit.intercept);
        add_summary(result, "fit_slope", fit.slope);
        add_summary(result, "fit_r_squared", fit.r_squared);
    }
}

// ---- metastability-demo -----------------------------------------------------

void metastability_demo(const ExperimentConfig& c, StudyResult& result, const std::vector<double>& mus) {
    const BumpSpec spec = bump_from(c, BumpSpec{0.02, 1.0, 0.2, -0.5, 0.4, 0.1});
    const WeightExponent m(weight_for(c));
    const double tau_early = std::log(knob(c, "t_early", 2.0) + 1.0);
    const double tau_late = std::log(knob(c, "t_late", 100.0) + 1.0);
    if (!(tau_late > tau_early)) throw ConfigError("t_late must exceed t_early");

    sweep(c, mus, result, [&](double mu, Recorder& rec) {
        const Grid g = study_grid(c, mu, spec.p, spec.q);
        rec.note("grid", describe(g));
        const Field w0 = bump_data(g, spec, c.seed);
        const double mass = integrate(w0);
        const Field A = diffusion_wave(DiffusionWaveParams::from_mass(mu, mass), g);

        const Trajectory early = evolve(w0, mu, tau_early, c.solver, tau_early / 4.0);
        const Trajectory late =
            evolve(early.snapshots.back().w, mu, tau_late - tau_early, c.solver, (tau_late - tau_early) / 10.0);

        std::vector<SimilaritySnapshot> path = early.snapshots;
        for (std::size_t i = 1; i < late.snapshots.size(); ++i) {
            path.push_back({late.snapshots[i].w, tau_early + late.snapshots[i].tau});
        }
        path.back().tau = tau_late;
        for (const auto& s : path) {
            const double scale = weighted_norm(s.w, m);
            const auto md = dist_to_nwave_manifold(s.w, mu, m);
            const auto pq = pq_functionals(s.w);
            rec.add(s.tau, "manifold_distance", md.distance / scale);
            rec.add(s.tau, "am_distance", weighted_distance(s.w, A, m) / scale);
            rec.add(s.tau, "beta1", md.params.beta1);
            rec.add(s.tau, "p", pq.p);
            rec.add(s.tau, "q", pq.q);
        }
    });
}

// ---- decay-rates ------------------------------------------------------------

void decay_rates(const ExperimentConfig& c, StudyResult& result, const std::vector<double>& mus) {
    const double mass = c.mass.value_or(0.0);
    const double beta1 = knob(c, "beta1", -0.005);
    const double amplitude = knob(c, "perturbation", 0.01);
    const double center = knob(c, "perturbation_center", 0.5);
    const double width = knob(c, "perturbation_width", 0.3);
    const double tau_end = knob(c, "tau_end", 8.0);
    const WeightExponent m(weight_for(c));

    sweep(c, mus, result, [&](double mu, Recorder& rec) {
        const Grid g = study_grid(c, mu, 1.0, 1.0);
        rec.note("grid", describe(g));
        const auto base = NWaveParams::from_mass(mu, mass, beta1, 0.0);
        const Field A = diffusion_wave(base.diffusion_wave(), g);
        const Field wN0 = diffusive_nwave(base, g);

        Field bump = Field::sample(g, [&](double xi) {
            const double z = (xi - center) / width;
            return std::exp(-0.5 * z * z);
        });
        bump = (amplitude * weighted_norm(wN0, m) / weighted_norm(bump, m)) * bump;
        const Field w0 = wN0 + bump;

        // The matching N-wave: the two slow Cole-Hopf modes of the data.
        const Field W0 = cole_hopf_forward(w0, mu);
        const auto matched =
            NWaveParams::from_beta0(mu, spectral_project(W0, 0, mu), spectral_project(W0, 1, mu), 0.0);
        rec.add(0.0, "matched_beta0", matched.beta0);
        rec.add(0.0, "matched_beta1", matched.beta1);

        std::vector<std::pair<double, double>> phi_series, family_series;
        double delta_min = std::numeric_limits<double>::infinity();
        double phi0 = 0.0;
        double cphi = 0.0;
        for (int k = 0; 0.25 * k <= tau_end + 1e-12; ++k) {
            const double tau = 0.25 * k;
            const Field w = cole_hopf_inverse(heat_evolve(W0, tau, mu), mu);
            const auto rem = phi_remainder(w, diffusive_nwave(matched.at_time(tau), g), mu);
            const double phi_norm = weighted_norm(rem.phi, m);
            if (k == 0) phi0 = phi_norm;
            cphi = std::max(cphi, phi_norm * std::exp(tau) / phi0);
            delta_min = std::min(delta_min, rem.delta_N);
            const double fam = weighted_distance(diffusive_nwave(base.at_time(tau), g), A, m);
            phi_series.emplace_back(tau, phi_norm);
            family_series.emplace_back(tau, fam);
            rec.add(tau, "phi_norm", phi_norm);
            rec.add(tau, "family_distance", fam);
        }
        const auto phi_fit = fit_decay_rate(phi_series, 1.0, 5.0);
        const auto fam_fit = fit_decay_rate(family_series, 1.0, 5.0);
        const auto fam_fit_late = fit_decay_rate(family_series, 2.0, 8.0);
        rec.add(0.0, "phi_rate", phi_fit.rate);
        rec.add(0.0, "phi_rate_r_squared", phi_fit.r_squared);
        rec.add(0.0, "family_rate", fam_fit.rate);
        rec.add(0.0, "family_rate_late", fam_fit_late.rate);
        rec.add(0.0, "delta_N_min", delta_min);
        rec.add(0.0, "c_phi_ratio_max", cphi);
        rec.add(0.0, "c_phi_bound", std::max(1.0, std::exp(mass / (2.0 * mu))) / mu);
    });
}

}  // namespace

Field bump_data(const Grid& grid, const BumpSpec& spec, std::uint64_t seed) {
    if (!(spec.p >= 0.0) || !(spec.q >= 0.0) || spec.p + spec.q == 0.0) {
        throw ConfigError("bump data: need p, q >= 0, not both zero");
    }
    if (!(spec.sigma > 0.0)) throw ConfigError("bump data: sigma must be positive");
    if (!(spec.jitter >= 0.0 && spec.jitter < 1.0)) throw ConfigError("bump data: jitter must lie in [0, 1)");
    const auto unit_gaussian = [&](double center) {
        Field f = Field::sample(grid, [&](double xi) {
            const double z = (xi - center) / spec.sigma;
            return std::exp(-0.5 * z * z);
        });
        return (1.0 / integrate(f)) * f;
    };
    const Field minus = unit_gaussian(spec.center_minus);
    const Field plus = unit_gaussian(spec.center_plus);

    // Overlap makes (p, q) differ from the separate masses; fixed-point rescale.
    double a_minus = 0.5 * spec.p;
    double a_plus = 0.5 * spec.q;
    for (int it = 0; it < 100; ++it) {
        const auto pq = pq_functionals(a_plus * plus - a_minus * minus);
        const double f_minus = spec.p > 0.0 ? spec.p / pq.p : 1.0;
        const double f_plus = spec.q > 0.0 ? spec.q / pq.q : 1.0;
        a_minus *= f_minus;
        a_plus *= f_plus;
        if (std::abs(f_minus - 1.0) < 1e-14 && std::abs(f_plus - 1.0) < 1e-14) break;
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> jitter(-spec.jitter, spec.jitter);
    a_minus *= 1.0 + jitter(rng);
    a_plus *= 1.0 + jitter(rng);
    return a_plus * plus - a_minus * minus;
}

Field positive_bump_data(const Grid& grid, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const int count = 2 + static_cast<int>(unit(rng) * 2.0);
    std::vector<double> centers, widths, weights;
    for (int k = 0; k < count; ++k) {
        centers.push_back(-1.5 + 3.0 * unit(rng));
        widths.push_back(0.25 + 0.35 * unit(rng));
        weights.push_back(0.1 + 0.4 * unit(rng));
    }
    return Field::sample(grid, [&](double xi) {
        double v = 0.0;
        for (int k = 0; k < count; ++k) {
            const double z = (xi - centers[k]) / widths[k];
            v += weights[k] * std::exp(-0.5 * z * z) / (widths[k] * std::sqrt(2.0 * std::numbers::pi));
        }
        return v;
    });
}

std::vector<std::string> registered_studies() {
    std::vector<std::string> out;
    for (const auto& s : studies()) out.emplace_back(s.name);
    return out;
}

std::string study_summary(const std::string& name) { return find_study(name).summary; }

void validate(const ExperimentConfig& config) {
    find_study(config.name);
    for (double mu : config.mu_list) {
        if (!(mu > 0.0) || !std::isfinite(mu)) throw ConfigError(fmt::format("mu = {} must be positive", mu));
    }
    WeightExponent(weight_for(config));
    if (config.p && !(*config.p >= 0.0)) throw ConfigError("p must be >= 0");
    if (config.q && !(*config.q >= 0.0)) throw ConfigError("q must be >= 0");
    if (config.grid_n && *config.grid_n < Grid::kMinPoints) throw ConfigError("grid-n must be at least 16");
    if (config.grid_n && *config.grid_n > 200000) throw ConfigError("grid-n above 200000 is not supported");
    if (!(config.solver.cfl_safety > 0.0 && config.solver.cfl_safety <= 1.0)) {
        throw ConfigError("cfl must lie in (0, 1]");
    }
}

std::string canonical_config(const ExperimentConfig& c) {
    std::map<std::string, std::string> kv = c.extra;
    kv["study"] = c.name;
    std::string mus;
    for (double mu : c.mu_list) mus += (mus.empty() ? "" : ",") + format_value(mu);
    kv["mu"] = mus;
    if (c.mass) kv["mass"] = format_value(*c.mass);
    if (c.p) kv["p"] = format_value(*c.p);
    if (c.q) kv["q"] = format_value(*c.q);
    if (c.m) kv["m"] = format_value(*c.m);
    if (c.grid_n) kv["grid_n"] = std::to_string(*c.grid_n);
    if (c.grid_l) kv["grid_l"] = format_value(*c.grid_l);
    kv["dt"] = format_value(c.solver.dt);
    kv["cfl"] = format_value(c.solver.cfl_safety);
    kv["max_halvings"] = std::to_string(c.solver.max_halvings);
    kv["seed"] = std::to_string(c.seed);
    std::string out;
    for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
    return out;
}

std::string config_hash(const ExperimentConfig& c) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : canonical_config(c)) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return fmt::format("{:016x}", h);
}

void apply_setting(ExperimentConfig& c, const std::string& raw_key, const std::string& raw_value) {
    std::string key = trim(raw_key);
    std::replace(key.begin(), key.end(), '-', '_');
    const std::string value = trim(raw_value);
    if (key == "study" || key == "name") {
        c.name = value;
    } else if (key == "mu") {
        std::vector<double> mus;
        std::stringstream ss(value);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (!trim(item).empty()) mus.push_back(parse_double("mu", trim(item)));
        }
        c.mu_list = std::move(mus);
    } else if (key == "mass") {
        c.mass = parse_double(key, value);
    } else if (key == "p") {
        c.p = parse_double(key, value);
    } else if (key == "q") {
        c.q = parse_double(key, value);
    } else if (key == "m") {
        c.m = parse_double(key, value);
    } else if (key == "grid_n") {
        c.grid_n = static_cast<std::size_t>(parse_unsigned(key, value));
    } else if (key == "grid_l") {
        c.grid_l = parse_double(key, value);
    } else if (key == "out" || key == "output_dir") {
        c.output_dir = value;
    } else if (key == "seed") {
        c.seed = parse_unsigned(key, value);
    } else if (key == "dt") {
        c.solver.dt = parse_double(key, value);
    } else if (key == "cfl") {
        c.solver.cfl_safety = parse_double(key, value);
    } else if (key == "max_halvings") {
        c.solver.max_halvings = static_cast<int>(std::min<std::uint64_t>(parse_unsigned(key, value), 60));
    } else if (key.empty()) {
        throw ConfigError("empty configuration key");
    } else {
        c.extra[key] = value;
    }
}

void load_config_file(ExperimentConfig& c, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("cannot read config file {}", path.string()));
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(fmt::format("{}:{}: expected key=value", path.string(), lineno));
        }
        apply_setting(c, line.substr(0, eq), line.substr(eq + 1));
    }
}

StudyResult run(const ExperimentConfig& config) {
    validate(config);
    const StudyInfo& info = find_study(config.name);
    const std::vector<double> mus = config.mu_list.empty() ? info.default_mu : config.mu_list;

    StudyResult result;
    result.experiment = config.name;
    result.config_hash = config_hash(config);
    result.provenance["weight_m"] = format_value(weight_for(config));
    result.provenance["cfl_safety"] = format_value(config.solver.cfl_safety);
    result.provenance["seed"] = std::to_string(config.seed);

    const std::string& n = config.name;
    if (n == "spectrum-check") {
        spectrum_check(config, result, mus);
    } else if (n == "oracle-compare") {
        oracle_compare(config, result, mus);
    } else if (n == "lemma1-convergence") {
        lemma1_convergence(config, result, mus);
    } else if (n == "transient-scaling") {
        transient_scaling(config, result, mus);
    } else if (n == "metastability-demo") {
        metastability_demo(config, result, mus);
    } else if (n == "decay-rates") {
        decay_rates(config, result, mus);
    }
    for (auto& row : result.rows) row.config_hash = result.config_hash;
    return result;
}

std::string format_value(double v) { return fmt::format("{:.17g}", v); }

namespace {

constexpr const char* kHeader = "experiment,mu,tau,metric,value";

void write_rows(const std::filesystem::path& path, const std::vector<const ResultRow*>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(fmt::format("cannot open {} for writing", path.string()));
    out << kHeader << '\n';
    for (const auto* r : rows) {
        out << r->experiment << ',' << format_value(r->mu) << ',' << format_value(r->tau) << ',' << r->metric << ','
            << format_value(r->value) << '\n';
    }
    if (!out) throw std::runtime_error(fmt::format("write failed for {}", path.string()));
}

}  // namespace

void emit_csv(const StudyResult& result, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error(fmt::format("cannot create {}: {}", dir.string(), ec.message()));

    std::vector<const ResultRow*> all;
    std::map<std::string, std::vector<const ResultRow*>> by_metric;
    for (const auto& r : result.rows) {
        all.push_back(&r);
        by_metric[r.metric].push_back(&r);
    }
    write_rows(dir / (result.experiment + ".csv"), all);
    for (const auto& [metric, rows] : by_metric) write_rows(dir / (result.experiment + "." + metric + ".csv"), rows);

    nlohmann::ordered_json side;
    side["experiment"] = result.experiment;
    side["config_hash"] = result.config_hash;
    side["git_describe"] = METASTAB_GIT_DESCRIBE;
    side["provenance"] = result.provenance;
    side["failures"] = result.failures;
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    side["generated_at_unix"] = static_cast<long long>(now);
    const auto path = dir / (result.experiment + ".provenance.json");
    std::ofstream out(path);
    if (!out) throw std::runtime_error(fmt::format("cannot open {} for writing", path.string()));
    out << side.dump(2) << '\n';
    if (!out) throw std::runtime_error(fmt::format("write failed for {}", path.string()));
}

std::vector<ResultRow> parse_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(fmt::format("cannot read {}", path.string()));
    std::string line;
    if (!std::getline(in, line) || line != kHeader) {
        throw std::runtime_error(fmt::format("{}: missing header '{}'", path.string(), kHeader));
    }
    std::vector<ResultRow> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 5) throw std::runtime_error(fmt::format("{}:{}: expected 5 fields", path.string(), lineno));
        const auto number = [&](const std::string& s) {
            try {
                std::size_t used = 0;
                const double v = std::stod(s, &used);
                if (used != s.size()) throw std::invalid_argument(s);
                return v;
            } catch (const std::exception&) {
                throw std::runtime_error(fmt::format("{}:{}: bad number '{}'", path.string(), lineno, s));
            }
        };
        rows.push_back({cells[0], number(cells[1]), number(cells[2]), cells[3], number(cells[4]), {}});
    }
    return rows;
}

}  // namespace metastab
