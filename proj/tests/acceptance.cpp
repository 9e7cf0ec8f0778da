// Acceptance suite: one PASS/FAIL line per headline criterion.
#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "metastab/colehopf.hpp"
#include "metastab/diagnostics.hpp"
#include "metastab/error.hpp"
#include "metastab/experiments.hpp"
#include "metastab/manifolds.hpp"
#include "metastab/solver.hpp"

using namespace metastab;

namespace {

struct Outcome {
    bool pass = true;
    std::vector<std::string> notes;

    void require(bool ok, const std::string& what) {
        pass = pass && ok;
        notes.push_back(fmt::format("{}{}", ok ? "" : "[x] ", what));
    }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Rows of a study keyed by (metric, mu, tau) for lookup.
class Rows {
public:
    explicit Rows(StudyResult r) : result_(std::move(r)) {}

    std::vector<const ResultRow*> metric(const std::string& name) const {
        std::vector<const ResultRow*> out;
        for (const auto& row : result_.rows) {
            if (row.metric == name) out.push_back(&row);
        }
        return out;
    }
    double value(const std::string& name, double mu = 0.0) const {
        for (const auto* row : metric(name)) {
            if (std::abs(row->mu - mu) <= 1e-12) return row->value;
        }
        throw std::runtime_error("missing metric " + name);
    }
    const ResultRow* at_tau(const std::string& name, double tau) const {
        for (const auto* row : metric(name)) {
            if (std::abs(row->tau - tau) <= 1e-9) return row;
        }
        throw std::runtime_error(fmt::format("missing metric {} at tau {}", name, tau));
    }

private:
    StudyResult result_;
};

StudyResult run_study(const std::string& name) {
    ExperimentConfig c;
    c.name = name;
    return run(c);
}

Outcome oracle_equivalence() {
    Outcome o;
    const auto t0 = Clock::now();
    const double mu = 0.05;
    const double L = domain_half_width(mu, 1.0, 0.5);
    const Grid g = Grid::symmetric(L, static_cast<std::size_t>(std::ceil(2.0 * L / 0.01)) + 1);
    const Field h = bump_data(g, BumpSpec{}, 1);
    const auto traj = evolve(h, mu, 2.0, SolverConfig{}, 0.5);
    for (const auto& s : traj.snapshots) {
        if (s.tau != 0.5 && s.tau != 1.0 && s.tau != 2.0) continue;
        const Field exact = exact_solution(h, mu, s.tau, g);
        const double rel = sup_distance(s.w, exact) / exact.max_abs();
        o.require(rel <= 1e-3, fmt::format("tau={} rel sup error {:.3e}", s.tau, rel));
    }
    const double spent = seconds_since(t0);
    o.require(spent <= 60.0, fmt::format("runtime {:.1f}s", spent));
    return o;
}

Outcome spectrum_check() {
    Outcome o;
    const auto t0 = Clock::now();
    const Rows rows(run_study("spectrum-check"));
    const double spent = seconds_since(t0);
    for (int n = 0; n <= 2; ++n) {
        const double rate = rows.value(fmt::format("rate_n{}", n), 0.05);
        o.require(std::abs(rate + 0.5 * n) <= 1e-4, fmt::format("n={} rate {:.8f}", n, rate));
    }
    o.require(spent <= 5.0, fmt::format("runtime {:.2f}s", spent));
    return o;
}

Outcome fixed_point() {
    Outcome o;
    const double mu = 0.05;
    const auto params = DiffusionWaveParams::from_mass(mu, 1.0);
    const double L = domain_half_width(mu, 0.0, 2.0);
    const auto drift = [&](double h) {
        const Grid g = Grid::symmetric(L, static_cast<std::size_t>(std::ceil(2.0 * L / h)) + 1);
        const Field a = diffusion_wave(params, g);
        double worst = 0.0;
        for (const auto& s : evolve(a, mu, 2.0, SolverConfig{}, 0.25).snapshots) {
            worst = std::max(worst, sup_distance(s.w, a));
        }
        return worst;
    };
    const double coarse = drift(0.005);
    const double fine = drift(0.0025);
    const double order = std::log2(coarse / fine);
    o.require(coarse <= 1e-4, fmt::format("drift over [0,2] at h=0.005: {:.3e}", coarse));
    o.require(order >= 1.8, fmt::format("order {:.3f} (h=0.0025 drift {:.3e})", order, fine));
    return o;
}

Outcome attraction_rate() {
    Outcome o;
    const Rows rows(run_study("decay-rates"));
    const double phi_rate = rows.value("phi_rate", 0.05);
    const double family_rate = rows.value("family_rate", 0.05);
    o.require(phi_rate >= -1.15 && phi_rate <= -0.85, fmt::format("phi rate on [1,5] {:.4f}", phi_rate));
    o.require(std::abs(family_rate + 0.5) <= 0.02, fmt::format("family rate on [1,5] {:.4f}", family_rate));
    o.require(true, fmt::format("C_phi ratio {:.3f} (bound {:.1f})", rows.value("c_phi_ratio_max", 0.05),
                                rows.value("c_phi_bound", 0.05)));
    return o;
}

Outcome transient_scaling() {
    Outcome o;
    const auto t0 = Clock::now();
    const StudyResult r = run_study("transient-scaling");
    const double spent = seconds_since(t0);
    const Rows rows(r);
    for (const auto* row : rows.metric("crossed")) {
        o.require(row->value == 1.0, fmt::format("mu={} crossed", row->mu));
    }
    for (const auto* row : rows.metric("transient_time")) o.notes.push_back(fmt::format("T({})={}", row->mu, row->value));
    const double slope = rows.value("fit_slope");
    const double r2 = rows.value("fit_r_squared");
    o.require(r2 >= 0.9, fmt::format("r^2 {:.4f}", r2));
    o.require(slope > 0.0, fmt::format("slope {:.4f}, intercept {:.4f}", slope, rows.value("fit_intercept")));
    o.require(spent <= 600.0, fmt::format("runtime {:.1f}s", spent));
    return o;
}

Outcome metastability() {
    Outcome o;
    const Rows rows(run_study("metastability-demo"));
    const double early = std::log(3.0);
    const double late = std::log(101.0);
    const double manifold = rows.at_tau("manifold_distance", early)->value;
    const double am_early = rows.at_tau("am_distance", early)->value;
    const double am_late = rows.at_tau("am_distance", late)->value;
    o.require(manifold <= 0.25, fmt::format("N-wave manifold distance at log 3: {:.4f}", manifold));
    o.require(am_late <= 0.1, fmt::format("A_M distance at log 101: {:.4f}", am_late));
    o.require(manifold < am_early, fmt::format("ordering at log 3: {:.4f} < {:.4f}", manifold, am_early));
    return o;
}

Outcome lemma1() {
    Outcome o;
    const Rows rows(run_study("lemma1-convergence"));
    std::string series;
    for (const auto* row : rows.metric("relative_distance")) series += fmt::format(" {}:{:.4f}", row->mu, row->value);
    o.require(rows.value("strictly_decreasing") == 1.0, "strictly decreasing in mu:" + series);
    const double at_001 = rows.value("relative_distance", 0.01);
    o.require(at_001 <= 0.15, fmt::format("relative distance at mu=0.01: {:.4f} (bound 0.15)", at_001));
    return o;
}

Outcome conservation_entropy() {
    Outcome o;
    const double mu = 0.05;
    const Grid g = Grid::symmetric(domain_half_width(mu, 0.0, 2.0), 1201);
    double worst_drift = 0.0;
    double worst_increase = -std::numeric_limits<double>::infinity();
    std::size_t steps = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const Field w0 = positive_bump_data(g, seed);
        // Snapshot spacing below the CFL step, so every solver step is recorded.
        const double every = 1.0 / 8192.0;
        const auto traj = evolve(w0, mu, 1.0, SolverConfig{}, every);
        steps += traj.steps;
        const double m0 = traj.mass_ledger.front();
        double previous = entropy(traj.snapshots.front().w, mu);
        for (std::size_t i = 1; i < traj.snapshots.size(); ++i) {
            worst_drift = std::max(worst_drift, std::abs(traj.mass_ledger[i] - m0) / ((1.0 + std::abs(m0)) *
                                                                                     traj.snapshots[i].tau));
            const double now = entropy(traj.snapshots[i].w, mu);
            worst_increase = std::max(worst_increase, now - previous);
            previous = now;
        }
        o.require(traj.snapshots.size() == traj.steps + 1, fmt::format("seed {}: one snapshot per step", seed));
    }
    o.require(worst_drift <= 1e-8, fmt::format("max mass drift {:.3e} per unit tau, normalised", worst_drift));
    o.require(worst_increase <= 1e-9, fmt::format("max entropy change per step {:.3e} over {} steps",
                                                  worst_increase, steps));
    return o;
}

Outcome structural() {
    Outcome o;
    const double mu = 0.05;
    bool margins_ok = true;
    const auto check_margin = [&](const NWaveParams& p, const Grid& g) {
        margins_ok = margins_ok && nwave_denominator_margin(p, g).min_value > 0.0;
    };

    const Grid fine = Grid::symmetric(6.0, 4801);
    const Field a = diffusion_wave(DiffusionWaveParams::from_mass(mu, 1.0), fine);
    const double roundtrip = sup_distance(cole_hopf_inverse(cole_hopf_forward(a, mu), mu), a);
    o.require(roundtrip <= 1e-7, fmt::format("Cole-Hopf roundtrip {:.3e}", roundtrip));

    const Grid g = Grid::symmetric(7.0, 2801);
    double worst_form = 0.0;
    for (double m : {0.1, 0.05, 0.02}) {
        for (auto [p, q] : {std::pair{1.0, 0.5}, std::pair{0.5, 1.0}, std::pair{1.0, 2.0}}) {
            const auto params = beta_from_pq_numeric(p, q, m);
            check_margin(params, g);
            const Field lhs = diffusive_nwave(params, g);
            const Field rhs = diffusive_nwave_alt(params.mass, params.beta1 / params.beta0, 0.0, m, g);
            worst_form = std::max(worst_form, sup_distance(lhs, rhs));
        }
    }
    o.require(worst_form <= 1e-9, fmt::format("two-form equivalence {:.3e}", worst_form));

    const Field Phi1 = eigenfunction_Phi(1, 1.0, mu, fine);
    const Field dA = diffusion_wave_derivative(DiffusionWaveParams::from_mass(mu, 1.0), fine);
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t i = 0; i < fine.size(); ++i) {
        ab += Phi1[i] * dA[i];
        aa += Phi1[i] * Phi1[i];
        bb += dA[i] * dA[i];
    }
    const double alignment = std::abs(ab) / std::sqrt(aa * bb);
    o.require(alignment >= 1.0 - 1e-10, fmt::format("Phi_1 alignment 1 - {:.3e}", 1.0 - alignment));

    const auto strong = beta_from_pq_numeric(2.0, 1.0, 0.01);
    const auto weak = beta_from_pq_numeric(1.0, 0.5, 0.01);
    const Grid g01 = Grid::symmetric(domain_half_width(0.01, 2.0, 1.0), 4001);
    check_margin(strong, g01);
    check_margin(weak, g01);
    const double ratio = std::abs(strong.beta0 / strong.beta1);
    o.require(ratio <= 1e-8, fmt::format("|beta0/beta1| at mu=0.01, (p,q)=(2,1): {:.3e} ((1,0.5): {:.3e})", ratio,
                                         std::abs(weak.beta0 / weak.beta1)));
    o.require(margins_ok, "denominator margins positive on every constructed N-wave");
    return o;
}

}  // namespace

// With arguments, only the listed criterion numbers run.
int main(int argc, char** argv) {
    std::set<std::size_t> only;
    for (int i = 1; i < argc; ++i) only.insert(std::stoul(argv[i]));
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"oracle equivalence", oracle_equivalence},
        {"spectrum check", spectrum_check},
        {"fixed-point residual", fixed_point},
        {"local attraction rate", attraction_rate},
        {"transient time vs |log mu|", transient_scaling},
        {"metastable replication", metastability},
        {"N-wave convergence in mu", lemma1},
        {"conservation and entropy", conservation_entropy},
        {"structural identities", structural},
    };
    int failed = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        if (!only.empty() && !only.contains(k + 1)) continue;
        const auto& [name, check] = criteria[k];
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o.pass = false;
            o.notes.push_back(fmt::format("exception: {}", e.what()));
        }
        failed += o.pass ? 0 : 1;
        std::string detail;
        for (const auto& n : o.notes) detail += (detail.empty() ? "" : "; ") + n;
        fmt::print("criterion {} {}: {} ({:.1f}s) | {}\n", k + 1, name, o.pass ? "PASS" : "FAIL", seconds_since(t0),
                   detail);
        std::fflush(stdout);
    }
    const std::size_t ran = only.empty() ? criteria.size() : only.size();
    fmt::print("{} of {} criteria passed\n", ran - failed, ran);
    return failed == 0 ? 0 : 1;
}
