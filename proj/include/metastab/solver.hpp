#pragma once

#include <functional>
#include <vector>

#include "metastab/error.hpp"
#include "metastab/similarity.hpp"

namespace metastab {

/// IMEX ARS(2,2,2): diffusion implicit (tridiagonal), drift and
/// transport explicit, all in flux form with Dirichlet-zero ends.
struct SolverConfig {
    /// Requested step; 0 picks the CFL bound each step.
    double dt = 0.0;
    double cfl_safety = 0.4;
    int max_halvings = 20;
};

struct Trajectory {
    std::vector<SimilaritySnapshot> snapshots;  // tau strictly increasing
    std::vector<double> mass_ledger;            // integrate(snapshots[i].w)
    std::size_t steps = 0;
};

/// NaN, overflow or an unsatisfiable step size. Carries everything up to the
/// last good snapshot.
class SolverFailure : public NumericalError {
public:
    SolverFailure(const std::string& what, Trajectory partial)
        : NumericalError(what), partial_(std::move(partial)) {}
    const Trajectory& partial() const { return partial_; }

private:
    Trajectory partial_;
};

/// dt bound cfl * min(h^2/(2mu), h/(max|w| + max|xi|/2)).
double cfl_limit(const Field& w, double mu, double cfl_safety);

/// Integrates w_tau = (mu w' + xi w/2 - w^2/2)' to tau_end, snapshotting at
/// every multiple of snapshot_every (and at tau_end).
Trajectory evolve(const Field& w0, double mu, double tau_end, const SolverConfig& config, double snapshot_every);

/// Called on every recorded snapshot; returning false ends the run there.
using SnapshotObserver = std::function<bool(const SimilaritySnapshot&)>;
Trajectory evolve(const Field& w0, double mu, double tau_end, const SolverConfig& config, double snapshot_every,
                  const SnapshotObserver& keep_going);

/// max_i |(F_{i+1/2} - F_{i-1/2}) / h| with the solver's own fluxes.
double stationary_residual(const Field& w, double mu);

}  // namespace metastab
